#pragma once

// The CURA core: gating -> residual combination -> nonlinear unit -> filter
// -> pooled output projection.
//
// Every linear unit maps channels independently at each of the L positions;
// only the filter (and the convolutional variants of the gate and the
// nonlinearity) mixes information along the sequence axis.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cura/autodiff.hpp"
#include "cura/ops.hpp"
#include "cura/tensor.hpp"

namespace cura {

enum class GatingKind { multiplicative, linear, convolutional };
enum class Nonlinearity { relu, gelu, tanh_conv };
enum class FilterKind { conv1d, linear_1x1, none };
enum class Pooling { mean, last };

/// Taps of the depthwise convolution wrapped around the affine gate in the
/// convolutional gating variant.
inline constexpr std::size_t kGateConvTaps = 3;

struct CuraConfig {
    std::size_t in_channels = 1;
    std::size_t seq_len = 1;  // 1 = tabular input
    std::size_t model_dim = 8;
    std::size_t out_dim = 1;
    GatingKind gating = GatingKind::multiplicative;
    Activation gate_activation = Activation::sigmoid;
    Nonlinearity nonlinearity = Nonlinearity::relu;
    FilterKind filter = FilterKind::conv1d;
    ConvMode filter_mode = ConvMode::depthwise;
    std::size_t kernel_size = 3;
    Pooling pooling = Pooling::mean;
    std::uint64_t seed = 0;

    /// Throws ParameterError on a zero extent or a gate activation other
    /// than sigmoid / hard_sigmoid.
    void validate() const;

    friend bool operator==(const CuraConfig&, const CuraConfig&) = default;
};

std::string to_string(GatingKind v);
std::string to_string(Nonlinearity v);
std::string to_string(FilterKind v);
std::string to_string(ConvMode v);
std::string to_string(Pooling v);
GatingKind gating_from_string(std::string_view s);
Nonlinearity nonlinearity_from_string(std::string_view s);
FilterKind filter_from_string(std::string_view s);
ConvMode filter_mode_from_string(std::string_view s);
Pooling pooling_from_string(std::string_view s);
/// sigmoid or hard_sigmoid only.
Activation gate_activation_from_string(std::string_view s);

/// Learnable tensors, enumerated in serialization order.
enum class Blob : std::size_t {
    gate_w,       // C x D
    gate_b,       // D
    res_w,        // C x D
    res_b,        // D
    nl_w,         // D x D
    nl_b,         // D
    nl_conv_w,    // k x D, tanh_conv only
    nl_conv_b,    // D, tanh_conv only
    filter_w,     // k x D | k x D x D | D x D, absent for filter none
    filter_b,     // D, absent for filter none
    gate_conv_w,  // 3 x D, convolutional gating only
    gate_conv_b,  // D, convolutional gating only
    out_w,        // D x H
    out_b,        // H
};
inline constexpr std::size_t kBlobCount = 14;

std::string_view blob_name(Blob b);

struct BlobSpec {
    Blob blob;
    Shape shape;
    bool is_bias;
    std::size_t fan_in;
    std::size_t fan_out;
};

/// Blobs present for `config`, in serialization order.
std::vector<BlobSpec> param_layout(const CuraConfig& config);

/// Number of learnable scalars implied by `config`.
std::size_t count_params(const CuraConfig& config);

class CuraParams {
public:
    Tensor& operator[](Blob b) { return slots_[static_cast<std::size_t>(b)]; }
    const Tensor& operator[](Blob b) const { return slots_[static_cast<std::size_t>(b)]; }
    bool has(Blob b) const { return !(*this)[b].empty(); }

    /// Present blobs in serialization order.
    std::vector<Blob> present() const;
    std::size_t total_size() const;

    friend bool operator==(const CuraParams&, const CuraParams&) = default;

private:
    std::array<Tensor, kBlobCount> slots_;
};

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
/// Deterministic under (config, seed).
CuraParams init_params(const CuraConfig& config, std::uint64_t seed);

/// Zero tensors with the layout of `config`.
CuraParams zero_params(const CuraConfig& config);

/// Parameters recorded as tape leaves.
class BoundParams {
public:
    BoundParams(ad::Tape& tape, const CuraParams& params, bool requires_grad);
    ad::Var operator[](Blob b) const;
    bool has(Blob b) const { return present_[static_cast<std::size_t>(b)]; }

private:
    std::array<ad::Var, kBlobCount> vars_{};
    std::array<bool, kBlobCount> present_{};
};

// Traced units. Each returns L x D except the projection, which returns a
// vector of H values.
ad::Var gating_forward(ad::Var x, const BoundParams& p, const CuraConfig& config);
ad::Var residual_forward(ad::Var x, const BoundParams& p, const CuraConfig& config);
ad::Var residual_gate_combine(ad::Var g, ad::Var r);
ad::Var nonlinear_unit(ad::Var h1, const BoundParams& p, const CuraConfig& config);
ad::Var filter_unit(ad::Var h2, const BoundParams& p, const CuraConfig& config);
ad::Var output_projection(ad::Var h3, const BoundParams& p, const CuraConfig& config);
ad::Var cura_forward(ad::Var x, const BoundParams& p, const CuraConfig& config);

// Untraced convenience forms.
Tensor gating_forward(const Tensor& x, const CuraParams& params, const CuraConfig& config);
Tensor residual_forward(const Tensor& x, const CuraParams& params, const CuraConfig& config);
/// h1 = g * r + r
Tensor residual_gate_combine(const Tensor& g, const Tensor& r);
Tensor nonlinear_unit(const Tensor& h1, const CuraParams& params, const CuraConfig& config);
Tensor filter_unit(const Tensor& h2, const CuraParams& params, const CuraConfig& config);
Tensor output_projection(const Tensor& h3, const CuraParams& params, const CuraConfig& config);
Tensor cura_forward(const Tensor& x, const CuraParams& params, const CuraConfig& config);

/// Forward pass over many inputs. Samples are independent, so they fan out
/// across OpenMP threads; results are in input order.
std::vector<Tensor> predict_batch(const CuraParams& params, const CuraConfig& config,
                                  std::span<const Tensor> inputs);

}  // namespace cura
