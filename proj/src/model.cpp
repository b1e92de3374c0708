#include "cura/model.hpp"

#include <cmath>
#include <exception>
#include <random>

#include "cura/errors.hpp"

namespace cura {

void CuraConfig::validate() const {
    if (in_channels == 0) throw ParameterError("in_channels must be positive");
    if (seq_len == 0) throw ParameterError("seq_len must be positive");
    if (model_dim == 0) throw ParameterError("model_dim must be positive");
    if (out_dim == 0) throw ParameterError("out_dim must be positive");
    if (kernel_size == 0) throw ParameterError("kernel_size must be positive");
    if (gate_activation != Activation::sigmoid && gate_activation != Activation::hard_sigmoid)
        throw ParameterError("gate activation must be sigmoid or hard_sigmoid, got " + to_string(gate_activation));
}

std::string to_string(GatingKind v) {
    switch (v) {
        case GatingKind::multiplicative: return "multiplicative";
        case GatingKind::linear: return "linear";
        case GatingKind::convolutional: return "convolutional";
    }
    throw ParameterError("unknown gating kind");
}

std::string to_string(Nonlinearity v) {
    switch (v) {
        case Nonlinearity::relu: return "relu";
        case Nonlinearity::gelu: return "gelu";
        case Nonlinearity::tanh_conv: return "tanh_conv";
    }
    throw ParameterError("unknown nonlinearity");
}

std::string to_string(FilterKind v) {
    switch (v) {
        case FilterKind::conv1d: return "conv1d";
        case FilterKind::linear_1x1: return "linear_1x1";
        case FilterKind::none: return "none";
    }
    throw ParameterError("unknown filter kind");
}

std::string to_string(ConvMode v) {
    return v == ConvMode::depthwise ? "depthwise" : "full";
}

std::string to_string(Pooling v) {
    return v == Pooling::mean ? "mean" : "last";
}

GatingKind gating_from_string(std::string_view s) {
    if (s == "multiplicative") return GatingKind::multiplicative;
    if (s == "linear") return GatingKind::linear;
    if (s == "convolutional") return GatingKind::convolutional;
    throw ParameterError("unknown gating kind '" + std::string(s) + "'");
}

Nonlinearity nonlinearity_from_string(std::string_view s) {
    if (s == "relu") return Nonlinearity::relu;
    if (s == "gelu") return Nonlinearity::gelu;
    if (s == "tanh_conv") return Nonlinearity::tanh_conv;
    throw ParameterError("unknown nonlinearity '" + std::string(s) + "'");
}

FilterKind filter_from_string(std::string_view s) {
    if (s == "conv1d") return FilterKind::conv1d;
    if (s == "linear_1x1") return FilterKind::linear_1x1;
    if (s == "none") return FilterKind::none;
    throw ParameterError("unknown filter kind '" + std::string(s) + "'");
}

ConvMode filter_mode_from_string(std::string_view s) {
    if (s == "depthwise") return ConvMode::depthwise;
    if (s == "full") return ConvMode::full;
    throw ParameterError("unknown filter mode '" + std::string(s) + "'");
}

Pooling pooling_from_string(std::string_view s) {
    if (s == "mean") return Pooling::mean;
    if (s == "last") return Pooling::last;
    throw ParameterError("unknown pooling '" + std::string(s) + "'");
}

Activation gate_activation_from_string(std::string_view s) {
    const Activation a = activation_from_string(s);
    if (a != Activation::sigmoid && a != Activation::hard_sigmoid)
        throw ParameterError("gate activation must be sigmoid or hard_sigmoid, got '" + std::string(s) + "'");
    return a;
}

std::string_view blob_name(Blob b) {
    switch (b) {
        case Blob::gate_w: return "W_g";
        case Blob::gate_b: return "b_g";
        case Blob::res_w: return "W_r";
        case Blob::res_b: return "b_r";
        case Blob::nl_w: return "W_n";
        case Blob::nl_b: return "b_n";
        case Blob::nl_conv_w: return "Theta_n.kernel";
        case Blob::nl_conv_b: return "Theta_n.bias";
        case Blob::filter_w: return "Theta_f.weight";
        case Blob::filter_b: return "Theta_f.bias";
        case Blob::gate_conv_w: return "Theta_g.kernel";
        case Blob::gate_conv_b: return "Theta_g.bias";
        case Blob::out_w: return "W_o";
        case Blob::out_b: return "b_o";
    }
    return "?";
}

std::vector<BlobSpec> param_layout(const CuraConfig& config) {
    config.validate();
    const std::size_t C = config.in_channels, D = config.model_dim, H = config.out_dim, k = config.kernel_size;
    std::vector<BlobSpec> out;
    auto matrix = [&](Blob b, std::size_t r, std::size_t c) { out.push_back({b, {r, c}, false, r, c}); };
    auto bias = [&](Blob b, std::size_t n) { out.push_back({b, {n}, true, 0, 0}); };

    matrix(Blob::gate_w, C, D);
    bias(Blob::gate_b, D);
    matrix(Blob::res_w, C, D);
    bias(Blob::res_b, D);
    matrix(Blob::nl_w, D, D);
    bias(Blob::nl_b, D);
    if (config.nonlinearity == Nonlinearity::tanh_conv) {
        out.push_back({Blob::nl_conv_w, {k, D}, false, k, k});
        bias(Blob::nl_conv_b, D);
    }
    switch (config.filter) {
        case FilterKind::conv1d:
            if (config.filter_mode == ConvMode::depthwise)
                out.push_back({Blob::filter_w, {k, D}, false, k, k});
            else
                out.push_back({Blob::filter_w, {k, D, D}, false, k * D, k * D});
            bias(Blob::filter_b, D);
            break;
        case FilterKind::linear_1x1:
            matrix(Blob::filter_w, D, D);
            bias(Blob::filter_b, D);
            break;
        case FilterKind::none: break;
    }
    if (config.gating == GatingKind::convolutional) {
        out.push_back({Blob::gate_conv_w, {kGateConvTaps, D}, false, kGateConvTaps, kGateConvTaps});
        bias(Blob::gate_conv_b, D);
    }
    matrix(Blob::out_w, D, H);
    bias(Blob::out_b, H);
    return out;
}

std::size_t count_params(const CuraConfig& config) {
    std::size_t n = 0;
    for (const auto& spec : param_layout(config)) n += shape_size(spec.shape);
    return n;
}

std::vector<Blob> CuraParams::present() const {
    std::vector<Blob> out;
    for (std::size_t i = 0; i < kBlobCount; ++i)
        if (!slots_[i].empty()) out.push_back(static_cast<Blob>(i));
    return out;
}

std::size_t CuraParams::total_size() const {
    std::size_t n = 0;
    for (const auto& t : slots_) n += t.size();
    return n;
}

CuraParams init_params(const CuraConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    CuraParams p;
    for (const auto& spec : param_layout(config)) {
        Tensor t(spec.shape);
        if (!spec.is_bias) {
            const double bound = std::sqrt(6.0 / static_cast<double>(spec.fan_in + spec.fan_out));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (auto& v : t.data()) v = dist(rng);
        }
        p[spec.blob] = std::move(t);
    }
    return p;
}

CuraParams zero_params(const CuraConfig& config) {
    CuraParams p;
    for (const auto& spec : param_layout(config)) p[spec.blob] = Tensor(spec.shape);
    return p;
}

BoundParams::BoundParams(ad::Tape& tape, const CuraParams& params, bool requires_grad) {
    for (Blob b : params.present()) {
        const auto i = static_cast<std::size_t>(b);
        vars_[i] = tape.leaf(params[b], requires_grad);
        present_[i] = true;
    }
}

ad::Var BoundParams::operator[](Blob b) const {
    if (!has(b)) throw UsageError("parameter " + std::string(blob_name(b)) + " is not part of this model");
    return vars_[static_cast<std::size_t>(b)];
}

namespace {

void expect_shape(const char* unit, const Tensor& t, std::size_t rows, std::size_t cols) {
    if (t.rank() != 2 || t.rows() != rows || t.cols() != cols)
        throw ShapeError(std::string(unit) + ": expected " + shape_string({rows, cols}) + " input, got " +
                         shape_string(t.shape()));
}

ad::Var affine(ad::Var x, ad::Var w, ad::Var b) {
    return ad::add_row_bias(ad::matmul(x, w), b);
}

}  // namespace

ad::Var gating_forward(ad::Var x, const BoundParams& p, const CuraConfig& config) {
    expect_shape("gating", x.value(), config.seq_len, config.in_channels);
    ad::Var z = affine(x, p[Blob::gate_w], p[Blob::gate_b]);
    switch (config.gating) {
        case GatingKind::multiplicative: return ad::activation(config.gate_activation, z);
        case GatingKind::linear: return z;
        case GatingKind::convolutional:
            return ad::activation(config.gate_activation,
                                  ad::conv1d(z, p[Blob::gate_conv_w], p[Blob::gate_conv_b], ConvMode::depthwise));
    }
    throw ParameterError("unknown gating kind");
}

ad::Var residual_forward(ad::Var x, const BoundParams& p, const CuraConfig& config) {
    expect_shape("residual", x.value(), config.seq_len, config.in_channels);
    return affine(x, p[Blob::res_w], p[Blob::res_b]);
}

ad::Var residual_gate_combine(ad::Var g, ad::Var r) {
    if (g.shape() != r.shape())
        throw ShapeError("residual_gate_combine: gate " + shape_string(g.shape()) + " vs residual " +
                         shape_string(r.shape()));
    return ad::add(ad::hadamard(g, r), r);
}

ad::Var nonlinear_unit(ad::Var h1, const BoundParams& p, const CuraConfig& config) {
    expect_shape("nonlinear unit", h1.value(), config.seq_len, config.model_dim);
    ad::Var z = affine(h1, p[Blob::nl_w], p[Blob::nl_b]);
    switch (config.nonlinearity) {
        case Nonlinearity::relu: return ad::activation(Activation::relu, z);
        case Nonlinearity::gelu: return ad::activation(Activation::gelu, z);
        case Nonlinearity::tanh_conv:
            return ad::conv1d(ad::activation(Activation::tanh, z), p[Blob::nl_conv_w], p[Blob::nl_conv_b],
                              ConvMode::depthwise);
    }
    throw ParameterError("unknown nonlinearity");
}

ad::Var filter_unit(ad::Var h2, const BoundParams& p, const CuraConfig& config) {
    expect_shape("filter", h2.value(), config.seq_len, config.model_dim);
    switch (config.filter) {
        case FilterKind::conv1d: return ad::conv1d(h2, p[Blob::filter_w], p[Blob::filter_b], config.filter_mode);
        case FilterKind::linear_1x1: return affine(h2, p[Blob::filter_w], p[Blob::filter_b]);
        case FilterKind::none: return h2;
    }
    throw ParameterError("unknown filter kind");
}

ad::Var output_projection(ad::Var h3, const BoundParams& p, const CuraConfig& config) {
    expect_shape("output projection", h3.value(), config.seq_len, config.model_dim);
    ad::Var pooled = config.pooling == Pooling::mean ? ad::mean_rows(h3) : ad::last_row(h3);
    ad::Var y = affine(pooled, p[Blob::out_w], p[Blob::out_b]);
    return ad::reshape(y, Shape{config.out_dim});
}

ad::Var cura_forward(ad::Var x, const BoundParams& p, const CuraConfig& config) {
    ad::Var g = gating_forward(x, p, config);
    ad::Var r = residual_forward(x, p, config);
    ad::Var h1 = residual_gate_combine(g, r);
    ad::Var h2 = nonlinear_unit(h1, p, config);
    ad::Var h3 = filter_unit(h2, p, config);
    return output_projection(h3, p, config);
}

namespace {

template <class Unit>
Tensor run_untraced(const Tensor& input, const CuraParams& params, const CuraConfig& config, Unit unit) {
    ad::Tape tape;
    BoundParams p(tape, params, false);
    return unit(tape.constant(input), p, config).value();
}

}  // namespace

Tensor gating_forward(const Tensor& x, const CuraParams& params, const CuraConfig& config) {
    return run_untraced(x, params, config, [](ad::Var v, const BoundParams& p, const CuraConfig& c) {
        return gating_forward(v, p, c);
    });
}

Tensor residual_forward(const Tensor& x, const CuraParams& params, const CuraConfig& config) {
    return run_untraced(x, params, config, [](ad::Var v, const BoundParams& p, const CuraConfig& c) {
        return residual_forward(v, p, c);
    });
}

Tensor residual_gate_combine(const Tensor& g, const Tensor& r) {
    ad::Tape tape;
    return residual_gate_combine(tape.constant(g), tape.constant(r)).value();
}

Tensor nonlinear_unit(const Tensor& h1, const CuraParams& params, const CuraConfig& config) {
    return run_untraced(h1, params, config, [](ad::Var v, const BoundParams& p, const CuraConfig& c) {
        return nonlinear_unit(v, p, c);
    });
}

Tensor filter_unit(const Tensor& h2, const CuraParams& params, const CuraConfig& config) {
    return run_untraced(h2, params, config, [](ad::Var v, const BoundParams& p, const CuraConfig& c) {
        return filter_unit(v, p, c);
    });
}

Tensor output_projection(const Tensor& h3, const CuraParams& params, const CuraConfig& config) {
    return run_untraced(h3, params, config, [](ad::Var v, const BoundParams& p, const CuraConfig& c) {
        return output_projection(v, p, c);
    });
}

Tensor cura_forward(const Tensor& x, const CuraParams& params, const CuraConfig& config) {
    return run_untraced(x, params, config, [](ad::Var v, const BoundParams& p, const CuraConfig& c) {
        return cura_forward(v, p, c);
    });
}

std::vector<Tensor> predict_batch(const CuraParams& params, const CuraConfig& config,
                                  std::span<const Tensor> inputs) {
    for (const auto& x : inputs) expect_shape("predict", x, config.seq_len, config.in_channels);
    std::vector<Tensor> out(inputs.size());
    std::exception_ptr failure;
    const auto n = static_cast<std::ptrdiff_t>(inputs.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = cura_forward(inputs[static_cast<std::size_t>(i)], params, config);
        } catch (...) {
#pragma omp critical(cura_predict_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace cura
