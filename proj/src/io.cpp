#include "cura/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cura/errors.hpp"

namespace cura {

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
    uLong crc = crc32(0L, Z_NULL, 0);
    while (size > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

// ---------------------------------------------------------- model file

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'U', 'R', 'A'};

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint64_t v) {
        if (v > 0xFFFFFFFFu) throw UsageError("value " + std::to_string(v) + " does not fit the model format");
        put(v, 4);
    }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::size_t remaining() const { return size_ - pos_; }

private:
    std::uint64_t get(int n) {
        if (remaining() < static_cast<std::size_t>(n))
            throw LoadError(LoadError::Kind::malformed, "model file ends unexpectedly");
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

template <class E>
E enum_from_byte(std::uint8_t b, std::uint8_t count, const char* what) {
    if (b >= count) throw LoadError(LoadError::Kind::malformed, std::string("invalid ") + what + " code");
    return static_cast<E>(b);
}

}  // namespace

std::vector<std::uint8_t> encode_model(const CuraConfig& config, const CuraParams& params) {
    const auto layout = param_layout(config);
    ByteWriter w;
    for (auto b : kMagic) w.u8(b);
    w.u16(kModelFormatVersion);
    w.u32(config.in_channels);
    w.u32(config.seq_len);
    w.u32(config.model_dim);
    w.u32(config.out_dim);
    w.u8(static_cast<std::uint8_t>(config.gating));
    w.u8(static_cast<std::uint8_t>(config.gate_activation));
    w.u8(static_cast<std::uint8_t>(config.nonlinearity));
    w.u8(static_cast<std::uint8_t>(config.filter));
    w.u8(static_cast<std::uint8_t>(config.filter_mode));
    w.u32(config.kernel_size);
    w.u8(static_cast<std::uint8_t>(config.pooling));
    w.u64(config.seed);
    w.u32(layout.size());
    for (const auto& spec : layout) {
        const Tensor& t = params[spec.blob];
        if (t.shape() != spec.shape)
            throw ShapeError("parameter " + std::string(blob_name(spec.blob)) + " has shape " +
                             shape_string(t.shape()) + ", expected " + shape_string(spec.shape));
        w.u8(static_cast<std::uint8_t>(t.rank()));
        for (auto e : t.shape()) w.u32(e);
        for (double v : t.data()) w.f64(v);
    }
    auto& bytes = w.bytes();
    const std::uint32_t crc = crc32_of(bytes.data(), bytes.size());
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
    return std::move(bytes);
}

SavedModel decode_model(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw LoadError(LoadError::Kind::bad_magic, "not a CURA model file (bad magic)");
    if (bytes.size() < 6) throw LoadError(LoadError::Kind::malformed, "model file ends inside the header");
    const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
    if (version != kModelFormatVersion)
        throw LoadError(LoadError::Kind::unsupported_version,
                        "unsupported model format version " + std::to_string(version));
    if (bytes.size() < 10) throw LoadError(LoadError::Kind::checksum_mismatch, "model file too short for a checksum");
    const std::size_t body = bytes.size() - 4;
    const std::uint32_t stored = static_cast<std::uint32_t>(bytes[body]) | (static_cast<std::uint32_t>(bytes[body + 1]) << 8) |
                                 (static_cast<std::uint32_t>(bytes[body + 2]) << 16) |
                                 (static_cast<std::uint32_t>(bytes[body + 3]) << 24);
    if (stored != crc32_of(bytes.data(), body))
        throw LoadError(LoadError::Kind::checksum_mismatch, "model file checksum mismatch");

    ByteReader r(bytes.data() + 6, body - 6);
    SavedModel m;
    auto& c = m.config;
    c.in_channels = r.u32();
    c.seq_len = r.u32();
    c.model_dim = r.u32();
    c.out_dim = r.u32();
    c.gating = enum_from_byte<GatingKind>(r.u8(), 3, "gating");
    c.gate_activation = enum_from_byte<Activation>(r.u8(), 5, "gate activation");
    c.nonlinearity = enum_from_byte<Nonlinearity>(r.u8(), 3, "nonlinearity");
    c.filter = enum_from_byte<FilterKind>(r.u8(), 3, "filter");
    c.filter_mode = enum_from_byte<ConvMode>(r.u8(), 2, "filter mode");
    c.kernel_size = r.u32();
    c.pooling = enum_from_byte<Pooling>(r.u8(), 2, "pooling");
    c.seed = r.u64();

    std::vector<BlobSpec> layout;
    try {
        layout = param_layout(c);
    } catch (const ParameterError& e) {
        throw LoadError(LoadError::Kind::malformed, std::string("invalid stored config: ") + e.what());
    }
    const std::uint32_t count = r.u32();
    if (count != layout.size())
        throw LoadError(LoadError::Kind::malformed, "expected " + std::to_string(layout.size()) +
                                                        " parameter blobs, found " + std::to_string(count));
    for (const auto& spec : layout) {
        Shape shape(r.u8());
        for (auto& e : shape) e = r.u32();
        if (shape != spec.shape)
            throw LoadError(LoadError::Kind::malformed, "blob " + std::string(blob_name(spec.blob)) + " has shape " +
                                                            shape_string(shape) + ", expected " +
                                                            shape_string(spec.shape));
        Tensor t(shape);
        for (auto& v : t.data()) v = r.f64();
        m.params[spec.blob] = std::move(t);
    }
    if (r.remaining() != 0) throw LoadError(LoadError::Kind::malformed, "trailing bytes after parameter blobs");
    return m;
}

void save_model(const std::filesystem::path& path, const CuraConfig& config, const CuraParams& params) {
    const auto bytes = encode_model(config, params);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw UsageError("failed writing '" + path.string() + "'");
}

SavedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(LoadError::Kind::io, "cannot open model file '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_model(bytes);
}

// ---------------------------------------------------------- run config

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_integer(const std::string& key, const std::string& v, std::size_t line) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(line, "'" + key + "' expects a non-negative integer, got '" + v + "'");
    return out;
}

double parse_real(const std::string& key, const std::string& v, std::size_t line) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(line, "'" + key + "' expects a number, got '" + v + "'");
    return out;
}

bool parse_flag(const std::string& key, const std::string& v, std::size_t line) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(line, "'" + key + "' expects true or false, got '" + v + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value, std::size_t line) {
    auto size = [&] { return parse_integer<std::size_t>(key, value, line); };
    auto real = [&] { return parse_real(key, value, line); };
    try {
        if (key == "task") task = task_from_string(value);
        else if (key == "data") data = value;
        else if (key == "target") target = value;
        else if (key == "features") features = split_list(value);
        else if (key == "window" || key == "seq_len") window = size();
        else if (key == "horizon") horizon = size();
        else if (key == "stride") stride = size();
        else if (key == "train_fraction") train_fraction = real();
        else if (key == "num_classes") num_classes = size();
        else if (key == "in_channels") in_channels = size();
        else if (key == "out_dim") out_dim = size();
        else if (key == "model_dim") model.model_dim = size();
        else if (key == "gating") model.gating = gating_from_string(value);
        else if (key == "gate_activation") model.gate_activation = gate_activation_from_string(value);
        else if (key == "nonlinearity") model.nonlinearity = nonlinearity_from_string(value);
        else if (key == "filter") model.filter = filter_from_string(value);
        else if (key == "filter_mode") model.filter_mode = filter_mode_from_string(value);
        else if (key == "kernel_size") model.kernel_size = size();
        else if (key == "pooling") model.pooling = pooling_from_string(value);
        else if (key == "seed") {
            const auto s = parse_integer<std::uint64_t>(key, value, line);
            model.seed = s;
            hyper.seed = s;
            synth.seed = s;
        }
        else if (key == "init_seed") model.seed = parse_integer<std::uint64_t>(key, value, line);
        else if (key == "shuffle_seed") hyper.seed = parse_integer<std::uint64_t>(key, value, line);
        else if (key == "learning_rate") hyper.learning_rate = real();
        else if (key == "beta1") hyper.beta1 = real();
        else if (key == "beta2") hyper.beta2 = real();
        else if (key == "epsilon") hyper.epsilon = real();
        else if (key == "amsgrad") hyper.amsgrad = parse_flag(key, value, line);
        else if (key == "weight_decay") hyper.weight_decay = real();
        else if (key == "epochs") hyper.epochs = size();
        else if (key == "batch_size") hyper.batch_size = size();
        else if (key == "synth_kind") synth.kind = synth_kind_from_string(value);
        else if (key == "synth_rows") synth.rows = size();
        else if (key == "synth_channels") synth.channels = size();
        else if (key == "synth_noise") synth.noise_std = real();
        else if (key == "synth_classes") synth.classes = size();
        else if (key == "synth_segment") synth.segment = size();
        else if (key == "synth_ar1") synth.ar1 = real();
        else if (key == "synth_ar2") synth.ar2 = real();
        else if (key == "synth_seed") synth.seed = parse_integer<std::uint64_t>(key, value, line);
        else throw ConfigError(line, "unknown key '" + key + "'");
    } catch (const ParameterError& e) {
        throw ConfigError(line, e.what());
    }
}

CuraConfig RunConfig::resolved_model() const {
    CuraConfig c = model;
    c.seq_len = window;
    if (in_channels) c.in_channels = *in_channels;
    else if (!features.empty()) c.in_channels = features.size();
    else if (data.empty()) c.in_channels = synth.channels;
    else throw ConfigError(0, "set 'features' or 'in_channels'");
    if (out_dim) {
        c.out_dim = *out_dim;
    } else if (task == Task::regression) {
        c.out_dim = horizon;
    } else if (num_classes) {
        c.out_dim = num_classes;
    } else if (data.empty()) {
        c.out_dim = synth.classes;
    } else {
        throw ConfigError(0, "classification needs 'num_classes'");
    }
    return c;
}

std::string RunConfig::resolved_target() const {
    if (!target.empty()) return target;
    if (!data.empty()) throw ConfigError(0, "set 'target' when reading data from a file");
    return task == Task::classification ? "label" : "x0";
}

std::vector<std::string> RunConfig::resolved_features() const {
    if (!features.empty()) return features;
    if (!data.empty()) throw ConfigError(0, "set 'features' when reading data from a file");
    std::vector<std::string> out;
    for (std::size_t c = 0; c < synth.channels; ++c) out.push_back("x" + std::to_string(c));
    return out;
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig rc;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(line_no, "missing key before '='");
        rc.set(key, trim(line.substr(eq + 1)), line_no);
    }
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

Series load_series(const RunConfig& rc) {
    if (rc.data.empty()) return gen_synth(rc.synth);
    return load_csv(rc.data, rc.resolved_target(), rc.resolved_features());
}

WindowSpec window_spec(const RunConfig& rc, const Series& series) {
    WindowSpec spec;
    spec.window = rc.window;
    spec.horizon = rc.horizon;
    spec.stride = rc.stride;
    spec.task = rc.task;
    spec.train_fraction = rc.train_fraction;
    spec.target = series.column_index(rc.resolved_target());
    for (const auto& f : rc.resolved_features()) spec.features.push_back(series.column_index(f));
    return spec;
}

WindowedDataset build_dataset(const RunConfig& rc) {
    const Series series = load_series(rc);
    return make_windows(series, window_spec(rc, series));
}

// -------------------------------------------------------------- sidecar

DataSidecar DataSidecar::from_dataset(const WindowedDataset& ds, const Series& series) {
    DataSidecar s;
    s.task = ds.spec.task;
    for (auto c : ds.spec.features) s.features.push_back(series.names.at(c));
    s.target = series.names.at(ds.spec.target);
    s.window = ds.spec.window;
    s.horizon = ds.spec.effective_horizon();
    s.stride = ds.spec.stride;
    for (auto c : ds.normalizer.columns) s.normalized_columns.push_back(series.names.at(c));
    s.mean = ds.normalizer.mean;
    s.stddev = ds.normalizer.stddev;
    return s;
}

std::filesystem::path sidecar_path(const std::filesystem::path& model_path) {
    auto p = model_path;
    p += ".norm";
    return p;
}

namespace {

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

std::string hex_list(const std::vector<double>& values) {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto r = std::to_chars(buf, buf + sizeof buf, values[i], std::chars_format::hex);
        out += (i ? "," : "") + std::string(buf, r.ptr);
    }
    return out;
}

std::vector<double> parse_hex_list(const std::string& s, std::size_t line) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        std::string_view v = item;
        bool negative = false;
        if (!v.empty() && v.front() == '-') {
            negative = true;
            v.remove_prefix(1);
        }
        double d = 0.0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d, std::chars_format::hex);
        if (ec != std::errc() || ptr != v.data() + v.size())
            throw ConfigError(line, "bad hexadecimal float '" + item + "'");
        out.push_back(negative ? -d : d);
    }
    return out;
}

}  // namespace

void save_sidecar(const std::filesystem::path& path, const DataSidecar& s) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    out << "task = " << to_string(s.task) << '\n'
        << "features = " << join(s.features) << '\n'
        << "target = " << s.target << '\n'
        << "window = " << s.window << '\n'
        << "horizon = " << s.horizon << '\n'
        << "stride = " << s.stride << '\n'
        << "normalized = " << join(s.normalized_columns) << '\n'
        << "mean = " << hex_list(s.mean) << '\n'
        << "stddev = " << hex_list(s.stddev) << '\n';
}

DataSidecar load_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open '" + path.string() + "'");
    DataSidecar s;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "task") s.task = task_from_string(value);
            else if (key == "features") s.features = split_list(value);
            else if (key == "target") s.target = value;
            else if (key == "window") s.window = parse_integer<std::size_t>(key, value, line_no);
            else if (key == "horizon") s.horizon = parse_integer<std::size_t>(key, value, line_no);
            else if (key == "stride") s.stride = parse_integer<std::size_t>(key, value, line_no);
            else if (key == "normalized") s.normalized_columns = split_list(value);
            else if (key == "mean") s.mean = parse_hex_list(value, line_no);
            else if (key == "stddev") s.stddev = parse_hex_list(value, line_no);
            else throw ConfigError(line_no, "unknown key '" + key + "'");
        } catch (const ParameterError& e) {
            throw ConfigError(line_no, e.what());
        }
    }
    if (s.mean.size() != s.normalized_columns.size() || s.stddev.size() != s.normalized_columns.size())
        throw ConfigError(0, "normalizer statistics do not match the column list in '" + path.string() + "'");
    return s;
}

}  // namespace cura
