#pragma once

#include <string>
#include <string_view>

#include "cura/kernels.hpp"
#include "cura/tensor.hpp"

namespace cura {

enum class Activation { sigmoid, hard_sigmoid, relu, gelu, tanh };

/// Throws ParameterError for names outside the five registered kinds.
Activation activation_from_string(std::string_view name);
std::string to_string(Activation kind);

/// Scalar activation and its derivative.
///   hard_sigmoid(x) = clamp(0.2 x + 0.5, 0, 1), slope 0 at the clamp corners
///   gelu(x)         = x * Phi(x) with the exact error-function CDF
///   relu'(0)        = 0
double activate(Activation kind, double x);
double activate_grad(Activation kind, double x);

using kernels::ConvMode;

/// Untraced primitives. Each validates shapes and throws ShapeError naming
/// the offending extents.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor apply_activation(Activation kind, const Tensor& x);

/// Same-padded correlation of `x` (L x D) along its rows.
///   depthwise: kernel k x D, bias D, output L x D
///   full:      kernel k x D x D_out, bias D_out, output L x D_out
/// Padding is ceil((k-1)/2) zeros on the left and floor((k-1)/2) on the right.
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, ConvMode mode);

/// Validates kernel/bias extents against `x` and returns the kernel geometry.
kernels::ConvShape conv_shape(const Tensor& x, const Tensor& kernel, const Tensor& bias, ConvMode mode);

}  // namespace cura
