#include "cura/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "cura/errors.hpp"

namespace cura {

std::vector<double> Series::column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
    return out;
}

std::size_t Series::column_index(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw SchemaError("column '" + name + "' not found");
    return static_cast<std::size_t>(it - names.begin());
}

// ---------------------------------------------------------------- CSV

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_number(std::string_view field, std::size_t line, const std::string& column) {
    std::string_view s = field;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw ParseError(line, "column '" + column + "': cannot parse '" + std::string(field) + "' as a number");
    return v;
}

struct RawCsv {
    std::vector<std::string> header;
    std::vector<std::string> lines;  // data lines, index i is file line i + 2
};

RawCsv read_raw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open '" + path.string() + "'");
    RawCsv raw;
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("'" + path.string() + "' has no header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    for (auto f : split_fields(line)) {
        if (f.size() >= 2 && f.front() == '"' && f.back() == '"') f = f.substr(1, f.size() - 2);
        raw.header.emplace_back(f);
    }
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            raw.lines.emplace_back();
            continue;
        }
        raw.lines.push_back(std::move(line));
    }
    // Trailing blank lines are not rows.
    while (!raw.lines.empty() && raw.lines.back().empty()) raw.lines.pop_back();
    return raw;
}

Series select_columns(const RawCsv& raw, const std::vector<std::string>& wanted) {
    std::vector<std::size_t> idx;
    for (const auto& name : wanted) {
        const auto it = std::find(raw.header.begin(), raw.header.end(), name);
        if (it == raw.header.end()) throw SchemaError("column '" + name + "' not found in header");
        idx.push_back(static_cast<std::size_t>(it - raw.header.begin()));
    }
    Series s;
    s.names = wanted;
    s.rows = raw.lines.size();
    s.values.reserve(s.rows * wanted.size());
    for (std::size_t r = 0; r < raw.lines.size(); ++r) {
        const std::size_t line_no = r + 2;
        const auto fields = split_fields(raw.lines[r]);
        if (fields.size() != raw.header.size())
            throw ParseError(line_no, "expected " + std::to_string(raw.header.size()) + " fields, found " +
                                          std::to_string(fields.size()));
        for (std::size_t c = 0; c < idx.size(); ++c) s.values.push_back(parse_number(fields[idx[c]], line_no, wanted[c]));
    }
    return s;
}

}  // namespace

Series load_csv(const std::filesystem::path& path, const std::string& target,
                const std::vector<std::string>& features) {
    std::vector<std::string> wanted = features;
    if (!target.empty() && std::find(wanted.begin(), wanted.end(), target) == wanted.end()) wanted.push_back(target);
    if (wanted.empty()) throw UsageError("no columns selected from '" + path.string() + "'");
    return select_columns(read_raw(path), wanted);
}

Series load_csv(const std::filesystem::path& path) {
    const RawCsv raw = read_raw(path);
    return select_columns(raw, raw.header);
}

void write_csv(const std::filesystem::path& path, const Series& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    for (std::size_t c = 0; c < series.cols(); ++c) out << (c ? "," : "") << series.names[c];
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < series.rows; ++r) {
        for (std::size_t c = 0; c < series.cols(); ++c) {
            const auto res = std::to_chars(buf, buf + sizeof buf, series.at(r, c));
            if (c) out << ',';
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
    if (!out) throw UsageError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------- Normalizer

bool Normalizer::covers(std::size_t column) const {
    return std::find(columns.begin(), columns.end(), column) != columns.end();
}

namespace {

std::size_t slot_of(const Normalizer& n, std::size_t column) {
    const auto it = std::find(n.columns.begin(), n.columns.end(), column);
    if (it == n.columns.end()) throw UsageError("column " + std::to_string(column) + " is not normalized");
    return static_cast<std::size_t>(it - n.columns.begin());
}

}  // namespace

double Normalizer::apply_value(std::size_t column, double v) const {
    const auto i = slot_of(*this, column);
    return (v - mean[i]) / stddev[i];
}

double Normalizer::invert_value(std::size_t column, double v) const {
    const auto i = slot_of(*this, column);
    return v * stddev[i] + mean[i];
}

Series Normalizer::apply(const Series& s) const {
    Series out = s;
    for (std::size_t i = 0; i < columns.size(); ++i)
        for (std::size_t r = 0; r < s.rows; ++r) out.at(r, columns[i]) = (s.at(r, columns[i]) - mean[i]) / stddev[i];
    return out;
}

Series Normalizer::invert(const Series& s) const {
    Series out = s;
    for (std::size_t i = 0; i < columns.size(); ++i)
        for (std::size_t r = 0; r < s.rows; ++r) out.at(r, columns[i]) = s.at(r, columns[i]) * stddev[i] + mean[i];
    return out;
}

Normalizer zscore_fit(const Series& series, std::size_t train_rows, std::vector<std::size_t> columns) {
    if (train_rows == 0 || train_rows > series.rows)
        throw UsageError("zscore_fit: train_rows must be in [1, " + std::to_string(series.rows) + "], got " +
                         std::to_string(train_rows));
    if (columns.empty())
        for (std::size_t c = 0; c < series.cols(); ++c) columns.push_back(c);
    Normalizer n;
    n.columns = std::move(columns);
    for (auto c : n.columns) {
        if (c >= series.cols()) throw UsageError("zscore_fit: column " + std::to_string(c) + " out of range");
        double m = 0.0;
        for (std::size_t r = 0; r < train_rows; ++r) m += series.at(r, c);
        m /= static_cast<double>(train_rows);
        double var = 0.0;
        for (std::size_t r = 0; r < train_rows; ++r) {
            const double d = series.at(r, c) - m;
            var += d * d;
        }
        var /= static_cast<double>(train_rows);
        if (!(var > 0.0)) throw DegenerateError("column '" + series.names[c] + "' has zero variance on training rows");
        n.mean.push_back(m);
        n.stddev.push_back(std::sqrt(var));
    }
    return n;
}

Series zscore_apply(const Normalizer& n, const Series& s) { return n.apply(s); }
Series zscore_invert(const Normalizer& n, const Series& s) { return n.invert(s); }

// ------------------------------------------------------------- windows

std::string to_string(Task t) { return t == Task::regression ? "regression" : "classification"; }

Task task_from_string(const std::string& s) {
    if (s == "regression") return Task::regression;
    if (s == "classification") return Task::classification;
    throw ParameterError("unknown task '" + s + "'");
}

std::size_t window_count(std::size_t rows, std::size_t window, std::size_t horizon, std::size_t stride) {
    if (stride == 0) throw UsageError("stride must be positive");
    if (rows < window + horizon) return 0;
    return (rows - window - horizon) / stride + 1;
}

namespace {

std::size_t split_point(std::size_t samples, double fraction) {
    // The epsilon keeps exact products such as 10 * 0.8 from flooring down.
    return static_cast<std::size_t>(std::floor(static_cast<double>(samples) * fraction + 1e-9));
}

void check_fraction(double f) {
    if (!(f > 0.0 && f < 1.0)) throw UsageError("train fraction must lie in (0, 1)");
}

}  // namespace

std::size_t fit_rows(std::size_t samples, const WindowSpec& spec) {
    check_fraction(spec.train_fraction);
    const std::size_t train = std::max<std::size_t>(1, split_point(samples, spec.train_fraction));
    return (train - 1) * spec.stride + spec.window + spec.effective_horizon();
}

namespace {

WindowedDataset cut_windows(const Series& series, const WindowSpec& spec, const Normalizer* fitted) {
    if (spec.window == 0) throw UsageError("window length must be positive");
    if (spec.stride == 0) throw UsageError("stride must be positive");
    if (spec.features.empty()) throw UsageError("at least one feature column is required");
    if (spec.task == Task::regression && spec.horizon == 0) throw UsageError("horizon must be positive");
    for (auto c : spec.features)
        if (c >= series.cols()) throw UsageError("feature column " + std::to_string(c) + " out of range");
    if (spec.target >= series.cols()) throw UsageError("target column " + std::to_string(spec.target) + " out of range");

    const std::size_t L = spec.window, H = spec.effective_horizon();
    if (series.rows < L + H)
        throw InsufficientDataError("need at least " + std::to_string(L + H) + " rows for window " +
                                    std::to_string(L) + " and horizon " + std::to_string(H) + ", got " +
                                    std::to_string(series.rows));
    const std::size_t S = window_count(series.rows, L, H, spec.stride);

    WindowedDataset ds;
    ds.spec = spec;
    ds.normalizer_rows = fit_rows(S, spec);

    std::vector<std::size_t> cols = spec.features;
    if (spec.task == Task::regression) {
        if (std::find(cols.begin(), cols.end(), spec.target) == cols.end()) cols.push_back(spec.target);
    } else {
        std::erase(cols, spec.target);
        if (cols.empty()) throw UsageError("classification needs a feature column besides the label");
    }
    if (fitted) {
        for (auto c : cols)
            if (!fitted->covers(c)) throw SchemaError("normalizer does not cover column '" + series.names[c] + "'");
        ds.normalizer = *fitted;
    } else {
        ds.normalizer = zscore_fit(series, ds.normalizer_rows, cols);
    }
    const Series z = ds.normalizer.apply(series);

    const std::size_t C = spec.features.size();
    ds.inputs.reserve(S);
    for (std::size_t i = 0; i < S; ++i) {
        const std::size_t start = i * spec.stride;
        Tensor x(Shape{L, C});
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t c = 0; c < C; ++c) x.at(t, c) = z.at(start + t, spec.features[c]);
        ds.inputs.push_back(std::move(x));
        ds.starts.push_back(start);
        if (spec.task == Task::regression) {
            Tensor y(Shape{H});
            for (std::size_t h = 0; h < H; ++h) y[h] = z.at(start + L + h, spec.target);
            ds.targets.push_back(std::move(y));
        } else {
            const std::size_t row = start + L - 1;
            const double v = series.at(row, spec.target);
            if (!(v >= 0.0) || v != std::floor(v))
                throw ParseError(row + 2, "class label " + std::to_string(v) + " is not a non-negative integer");
            const auto label = static_cast<std::size_t>(v);
            ds.labels.push_back(label);
            ds.num_classes = std::max(ds.num_classes, label + 1);
        }
    }
    return ds;
}

}  // namespace

WindowedDataset make_windows(const Series& series, const WindowSpec& spec) {
    return cut_windows(series, spec, nullptr);
}

WindowedDataset make_windows(const Series& series, const WindowSpec& spec, const Normalizer& fitted) {
    return cut_windows(series, spec, &fitted);
}

std::pair<WindowedDataset, WindowedDataset> chrono_split(const WindowedDataset& dataset, double train_fraction) {
    check_fraction(train_fraction);
    if (dataset.size() < 2) throw UsageError("chrono_split needs at least 2 samples");
    const std::size_t n = split_point(dataset.size(), train_fraction);

    auto slice = [&](std::size_t lo, std::size_t hi) {
        WindowedDataset part;
        part.spec = dataset.spec;
        part.normalizer = dataset.normalizer;
        part.normalizer_rows = dataset.normalizer_rows;
        part.num_classes = dataset.num_classes;
        const auto b = static_cast<std::ptrdiff_t>(lo), e = static_cast<std::ptrdiff_t>(hi);
        part.inputs.assign(dataset.inputs.begin() + b, dataset.inputs.begin() + e);
        part.starts.assign(dataset.starts.begin() + b, dataset.starts.begin() + e);
        if (!dataset.targets.empty()) part.targets.assign(dataset.targets.begin() + b, dataset.targets.begin() + e);
        if (!dataset.labels.empty()) part.labels.assign(dataset.labels.begin() + b, dataset.labels.begin() + e);
        return part;
    };
    return {slice(0, n), slice(n, dataset.size())};
}

// ----------------------------------------------------------- synthetic

std::string to_string(SynthKind k) {
    switch (k) {
        case SynthKind::sine_mix: return "sine_mix";
        case SynthKind::freq_classes: return "freq_classes";
        case SynthKind::linear_ar: return "linear_ar";
    }
    throw ParameterError("unknown synthetic kind");
}

SynthKind synth_kind_from_string(const std::string& s) {
    if (s == "sine_mix") return SynthKind::sine_mix;
    if (s == "freq_classes") return SynthKind::freq_classes;
    if (s == "linear_ar") return SynthKind::linear_ar;
    throw ParameterError("unknown synthetic kind '" + s + "'");
}

double class_frequency(std::size_t k, std::size_t classes) {
    if (classes <= 1) return 0.25;
    return 0.25 + 1.75 * static_cast<double>(k) / static_cast<double>(classes - 1);
}

Series gen_synth(const SynthSpec& spec) {
    if (spec.rows == 0) throw ParameterError("rows must be positive");
    if (spec.channels == 0) throw ParameterError("channels must be positive");
    if (!(spec.noise_std >= 0.0)) throw ParameterError("noise_std must be non-negative");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto noise = [&] { return spec.noise_std > 0.0 ? spec.noise_std * gauss(rng) : 0.0; };

    const std::size_t C = spec.channels, N = spec.rows;
    Series s;
    for (std::size_t c = 0; c < C; ++c) s.names.push_back("x" + std::to_string(c));
    s.rows = N;

    switch (spec.kind) {
        case SynthKind::sine_mix: {
            s.values.resize(N * C);
            for (std::size_t t = 0; t < N; ++t)
                for (std::size_t c = 0; c < C; ++c) {
                    const double w = 2.0 * std::numbers::pi / 32.0 * (1.0 + 0.25 * static_cast<double>(c));
                    const double tt = static_cast<double>(t);
                    s.at(t, c) = std::sin(w * tt) + 0.5 * std::sin(std::numbers::phi * w * tt) + noise();
                }
            break;
        }
        case SynthKind::freq_classes: {
            if (spec.classes == 0) throw ParameterError("classes must be positive");
            if (spec.segment == 0) throw ParameterError("segment length must be positive");
            s.names.push_back("label");
            s.values.resize(N * (C + 1));
            std::uniform_int_distribution<std::size_t> pick(0, spec.classes - 1);
            std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
            std::size_t label = 0;
            double phi = 0.0;
            for (std::size_t t = 0; t < N; ++t) {
                const std::size_t offset = t % spec.segment;
                if (offset == 0) {
                    label = pick(rng);
                    phi = phase(rng);
                }
                const double w = class_frequency(label, spec.classes);
                for (std::size_t c = 0; c < C; ++c)
                    s.at(t, c) = std::sin(w * (static_cast<double>(offset) - static_cast<double>(c)) + phi) + noise();
                s.at(t, C) = static_cast<double>(label);
            }
            break;
        }
        case SynthKind::linear_ar: {
            s.values.resize(N * C);
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t t = 0; t < N; ++t) {
                    if (t < 2) {
                        s.at(t, c) = 1.0;
                        continue;
                    }
                    s.at(t, c) = spec.ar1 * s.at(t - 1, c) + spec.ar2 * s.at(t - 2, c) + noise();
                }
            break;
        }
    }
    return s;
}

}  // namespace cura
