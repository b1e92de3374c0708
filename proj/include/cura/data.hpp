#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cura/tensor.hpp"

namespace cura {

/// N x C readings in temporal order, row-major.
struct Series {
    std::vector<std::string> names;
    std::size_t rows = 0;
    std::vector<double> values;

    std::size_t cols() const noexcept { return names.size(); }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    std::vector<double> column(std::size_t c) const;
    /// Index of the column called `name`; throws SchemaError if absent.
    std::size_t column_index(const std::string& name) const;

    friend bool operator==(const Series&, const Series&) = default;
};

/// Reads a UTF-8 comma-separated file with one header row. The result holds
/// `features` in the given order followed by `target` when it is not already
/// one of the features. An empty `target` selects nothing extra.
Series load_csv(const std::filesystem::path& path, const std::string& target,
                const std::vector<std::string>& features);
/// Every column of the file, in file order.
Series load_csv(const std::filesystem::path& path);
/// Writes shortest round-trip decimal text, so reloading is bit-exact.
void write_csv(const std::filesystem::path& path, const Series& series);

/// Per-column z-score statistics (population standard deviation).
struct Normalizer {
    std::vector<std::size_t> columns;  // series columns covered
    std::vector<double> mean;
    std::vector<double> stddev;

    /// Returns a copy with the covered columns standardized.
    Series apply(const Series& s) const;
    Series invert(const Series& s) const;
    double apply_value(std::size_t column, double v) const;
    double invert_value(std::size_t column, double v) const;
    bool covers(std::size_t column) const;

    friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

/// Fits on rows [0, train_rows) of the given columns (all columns when
/// `columns` is empty). A column with zero variance over those rows raises
/// DegenerateError naming it.
Normalizer zscore_fit(const Series& series, std::size_t train_rows, std::vector<std::size_t> columns = {});
Series zscore_apply(const Normalizer& n, const Series& s);
Series zscore_invert(const Normalizer& n, const Series& s);

enum class Task { regression, classification };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct WindowSpec {
    std::size_t window = 20;   // L
    std::size_t horizon = 1;   // H; ignored (treated as 0) for classification
    std::size_t stride = 1;
    std::size_t target = 0;    // series column of the target / class id
    std::vector<std::size_t> features;
    Task task = Task::regression;
    double train_fraction = 0.8;

    std::size_t effective_horizon() const noexcept { return task == Task::classification ? 0 : horizon; }
};

/// floor((N - L - H) / stride) + 1, or 0 when N < L + H.
std::size_t window_count(std::size_t rows, std::size_t window, std::size_t horizon, std::size_t stride);

/// Number of leading series rows the normalizer may see: every row touched
/// by the first floor(S * fraction) windows (at least one window).
std::size_t fit_rows(std::size_t samples, const WindowSpec& spec);

/// Sliding windows over a normalized series.
///
/// Window i reads rows [i*stride, i*stride + L) of the feature columns. For
/// regression its target is the target column over the next H rows; for
/// classification it is the class id on the window's last row.
struct WindowedDataset {
    std::vector<Tensor> inputs;        // each L x C
    std::vector<Tensor> targets;       // each H (regression)
    std::vector<std::size_t> labels;   // classification
    std::vector<std::size_t> starts;   // first series row of each window
    Normalizer normalizer;
    WindowSpec spec;
    std::size_t normalizer_rows = 0;   // rows the normalizer was fitted on
    std::size_t num_classes = 0;       // classification only

    std::size_t size() const noexcept { return inputs.size(); }
    bool empty() const noexcept { return inputs.empty(); }
};

/// Fits the normalizer on the training rows (fit_rows), standardizes feature
/// columns (and the target for regression) and cuts the windows.
/// Throws InsufficientDataError when N < L + H.
WindowedDataset make_windows(const Series& series, const WindowSpec& spec);
/// Same windows, standardized with an already fitted normalizer.
WindowedDataset make_windows(const Series& series, const WindowSpec& spec, const Normalizer& fitted);

/// First floor(S * fraction) samples train, the rest test, order preserved.
std::pair<WindowedDataset, WindowedDataset> chrono_split(const WindowedDataset& dataset, double train_fraction = 0.8);

enum class SynthKind { sine_mix, freq_classes, linear_ar };

std::string to_string(SynthKind k);
SynthKind synth_kind_from_string(const std::string& s);

struct SynthSpec {
    SynthKind kind = SynthKind::sine_mix;
    std::size_t rows = 1000;
    std::size_t channels = 1;
    std::uint64_t seed = 0;
    double noise_std = 0.0;
    // freq_classes
    std::size_t classes = 6;
    std::size_t segment = 32;
    // linear_ar
    double ar1 = 0.5;
    double ar2 = 0.3;
};

/// Seeded synthetic series.
///   sine_mix:     x_c(t) = sin(w_c t) + 0.5 sin(phi w_c t) + noise, phi the golden ratio
///   freq_classes: consecutive segments, each a random-phase sinusoid whose
///                 frequency is set by its class; channel c sees it delayed
///                 by c samples. A trailing "label" column holds the class.
///   linear_ar:    x_t = ar1 x_{t-1} + ar2 x_{t-2} + noise, x_0 = x_1 = 1
Series gen_synth(const SynthSpec& spec);

/// Angular frequency (radians per sample) used for class `k` of `classes`.
double class_frequency(std::size_t k, std::size_t classes);

}  // namespace cura
