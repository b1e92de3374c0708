#pragma once

// Binary model files and plain-text run configurations.
//
// Model file layout (all integers and floats little-endian):
//
//   "CURA"                      4 bytes magic
//   u16 version                 currently 1
//   config                      u32 in_channels, u32 seq_len, u32 model_dim,
//                               u32 out_dim, u8 gating, u8 gate_activation,
//                               u8 nonlinearity, u8 filter, u8 filter_mode,
//                               u32 kernel_size, u8 pooling, u64 seed
//   u32 blob count
//   per blob, in param_layout order:
//     u8 rank, rank x u32 extents, extent-product x f64 values
//   u32 CRC-32 of every preceding byte

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cura/data.hpp"
#include "cura/model.hpp"
#include "cura/training.hpp"

namespace cura {

inline constexpr std::uint16_t kModelFormatVersion = 1;

struct SavedModel {
    CuraConfig config;
    CuraParams params;
};

std::vector<std::uint8_t> encode_model(const CuraConfig& config, const CuraParams& params);
/// Throws LoadError: bad_magic, unsupported_version, checksum_mismatch or
/// malformed, checked in that order.
SavedModel decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const std::filesystem::path& path, const CuraConfig& config, const CuraParams& params);
SavedModel load_model(const std::filesystem::path& path);

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size);

/// Everything `train`, `eval` and `ablate` need: model selectors,
/// optimizer settings and where the data comes from. When `data` is empty
/// the series is generated from `synth`.
struct RunConfig {
    Task task = Task::regression;
    std::string data;
    std::string target;
    std::vector<std::string> features;
    std::size_t window = 20;
    std::size_t horizon = 1;
    std::size_t stride = 1;
    double train_fraction = 0.8;
    std::size_t num_classes = 0;
    std::optional<std::size_t> in_channels;  // defaults to the feature count
    std::optional<std::size_t> out_dim;      // defaults to horizon / num_classes
    CuraConfig model;                        // dimensions filled by resolved_model()
    Hyperparams hyper;
    SynthSpec synth;

    /// Model config with in_channels, seq_len and out_dim derived from the
    /// data settings unless set explicitly.
    CuraConfig resolved_model() const;
    /// Target and feature names, defaulting to the synthetic column names.
    std::string resolved_target() const;
    std::vector<std::string> resolved_features() const;
    /// Applies one `key = value` binding. Throws ConfigError on an unknown
    /// key or a malformed value; `line` is used in the message.
    void set(const std::string& key, const std::string& value, std::size_t line = 0);
};

/// `key = value` lines, `#` starts a comment. Every non-blank line must bind
/// a known key.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Loads (or generates) the series named by `rc` and cuts the windows.
Series load_series(const RunConfig& rc);
/// Window geometry from `rc` with column names resolved against `series`.
WindowSpec window_spec(const RunConfig& rc, const Series& series);
WindowedDataset build_dataset(const RunConfig& rc);

/// Preprocessing state `predict` needs beyond the model file: column names,
/// window geometry and the fitted normalizer. Stored next to the model as
/// text with hexadecimal floats, so it round-trips exactly.
struct DataSidecar {
    Task task = Task::regression;
    std::vector<std::string> features;
    std::string target;
    std::size_t window = 0;
    std::size_t horizon = 0;
    std::size_t stride = 1;
    std::vector<std::string> normalized_columns;
    std::vector<double> mean;
    std::vector<double> stddev;

    static DataSidecar from_dataset(const WindowedDataset& ds, const Series& series);
    friend bool operator==(const DataSidecar&, const DataSidecar&) = default;
};

std::filesystem::path sidecar_path(const std::filesystem::path& model_path);
void save_sidecar(const std::filesystem::path& path, const DataSidecar& s);
DataSidecar load_sidecar(const std::filesystem::path& path);

}  // namespace cura
