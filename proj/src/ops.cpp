#include "cura/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cura/errors.hpp"

namespace cura {

Activation activation_from_string(std::string_view name) {
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "hard_sigmoid") return Activation::hard_sigmoid;
    if (name == "relu") return Activation::relu;
    if (name == "gelu") return Activation::gelu;
    if (name == "tanh") return Activation::tanh;
    throw ParameterError("unknown activation '" + std::string(name) + "'");
}

std::string to_string(Activation kind) {
    switch (kind) {
        case Activation::sigmoid: return "sigmoid";
        case Activation::hard_sigmoid: return "hard_sigmoid";
        case Activation::relu: return "relu";
        case Activation::gelu: return "gelu";
        case Activation::tanh: return "tanh";
    }
    throw ParameterError("unknown activation kind");
}

double activate(Activation kind, double x) {
    switch (kind) {
        case Activation::sigmoid:
            // Split on sign so exp never overflows.
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            else {
                const double e = std::exp(x);
                return e / (1.0 + e);
            }
        case Activation::hard_sigmoid: return std::clamp(0.2 * x + 0.5, 0.0, 1.0);
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::gelu: return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
        case Activation::tanh: return std::tanh(x);
    }
    throw ParameterError("unknown activation kind");
}

double activate_grad(Activation kind, double x) {
    switch (kind) {
        case Activation::sigmoid: {
            const double s = activate(Activation::sigmoid, x);
            return s * (1.0 - s);
        }
        case Activation::hard_sigmoid: return (x > -2.5 && x < 2.5) ? 0.2 : 0.0;
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::gelu: {
            const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
            const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
            return cdf + x * pdf;
        }
        case Activation::tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
    }
    throw ParameterError("unknown activation kind");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw ShapeError("matmul: cannot multiply " + shape_string(a.shape()) + " by " + shape_string(b.shape()));
    Tensor c(Shape{a.rows(), b.cols()});
    kernels::matmul(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    return c;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("hadamard: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                         " differ");
    Tensor c(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] * b[i];
    return c;
}

Tensor apply_activation(Activation kind, const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = activate(kind, x[i]);
    return y;
}

kernels::ConvShape conv_shape(const Tensor& x, const Tensor& kernel, const Tensor& bias, ConvMode mode) {
    if (x.rank() != 2) throw ShapeError("conv1d: input must be L x D, got " + shape_string(x.shape()));
    kernels::ConvShape s;
    s.length = x.rows();
    s.in_channels = x.cols();
    s.mode = mode;
    if (kernel.empty()) throw ParameterError("conv1d: kernel size must be positive");
    s.taps = kernel.dim(0);
    if (mode == ConvMode::depthwise) {
        if (kernel.rank() != 2 || kernel.dim(1) != s.in_channels)
            throw ShapeError("conv1d: depthwise kernel " + shape_string(kernel.shape()) + " does not match input " +
                             shape_string(x.shape()));
        s.out_channels = s.in_channels;
    } else {
        if (kernel.rank() != 3 || kernel.dim(1) != s.in_channels)
            throw ShapeError("conv1d: full kernel " + shape_string(kernel.shape()) + " does not match input " +
                             shape_string(x.shape()));
        s.out_channels = kernel.dim(2);
    }
    if (!bias.empty() && (bias.rank() != 1 || bias.dim(0) != s.out_channels))
        throw ShapeError("conv1d: bias " + shape_string(bias.shape()) + " does not match " +
                         std::to_string(s.out_channels) + " output channels");
    return s;
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, ConvMode mode) {
    const auto s = conv_shape(x, kernel, bias, mode);
    Tensor out(Shape{s.length, s.out_channels});
    kernels::conv1d(x.data(), kernel.data(), bias.data(), out.data(), s);
    return out;
}

}  // namespace cura
