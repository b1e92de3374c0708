// Reference loops. Written for clarity; the OpenMP versions must match these
// bitwise.

#include <cstddef>
#include <span>

#include "cura/kernels.hpp"

namespace cura::kernels::serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = s;
        }
}

void matmul_tn(std::span<const double> a, std::span<const double> c, std::span<double> out, std::size_t m,
               std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += a[i * k + p] * c[i * n + j];
            out[p * n + j] = s;
        }
}

void matmul_nt(std::span<const double> c, std::span<const double> b, std::span<double> out, std::size_t m,
               std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += c[i * n + j] * b[p * n + j];
            out[i * k + p] = s;
        }
}

void conv1d(std::span<const double> x, std::span<const double> kernel, std::span<const double> bias,
            std::span<double> out, const ConvShape& s) {
    const auto L = static_cast<std::ptrdiff_t>(s.length);
    const auto pad = static_cast<std::ptrdiff_t>(s.pad_left());
    const std::size_t C = s.in_channels;
    const std::size_t O = s.out_channels;
    for (std::ptrdiff_t t = 0; t < L; ++t)
        for (std::size_t o = 0; o < O; ++o) {
            double acc = 0.0;
            for (std::size_t j = 0; j < s.taps; ++j) {
                const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(j) - pad;
                if (src < 0 || src >= L) continue;
                const auto row = static_cast<std::size_t>(src);
                if (s.mode == ConvMode::depthwise) {
                    acc += x[row * C + o] * kernel[j * C + o];
                } else {
                    for (std::size_t i = 0; i < C; ++i) acc += x[row * C + i] * kernel[(j * C + i) * O + o];
                }
            }
            out[static_cast<std::size_t>(t) * O + o] = acc + (bias.empty() ? 0.0 : bias[o]);
        }
}

void conv1d_grad_input(std::span<const double> grad_out, std::span<const double> kernel,
                       std::span<double> grad_x, const ConvShape& s) {
    const auto L = static_cast<std::ptrdiff_t>(s.length);
    const auto pad = static_cast<std::ptrdiff_t>(s.pad_left());
    const std::size_t C = s.in_channels;
    const std::size_t O = s.out_channels;
    for (std::ptrdiff_t src = 0; src < L; ++src)
        for (std::size_t i = 0; i < C; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < s.taps; ++j) {
                const std::ptrdiff_t t = src - static_cast<std::ptrdiff_t>(j) + pad;
                if (t < 0 || t >= L) continue;
                const auto row = static_cast<std::size_t>(t);
                if (s.mode == ConvMode::depthwise) {
                    acc += grad_out[row * O + i] * kernel[j * C + i];
                } else {
                    for (std::size_t o = 0; o < O; ++o) acc += grad_out[row * O + o] * kernel[(j * C + i) * O + o];
                }
            }
            grad_x[static_cast<std::size_t>(src) * C + i] = acc;
        }
}

void conv1d_grad_kernel(std::span<const double> x, std::span<const double> grad_out,
                        std::span<double> grad_kernel, std::span<double> grad_bias, const ConvShape& s) {
    const auto L = static_cast<std::ptrdiff_t>(s.length);
    const auto pad = static_cast<std::ptrdiff_t>(s.pad_left());
    const std::size_t C = s.in_channels;
    const std::size_t O = s.out_channels;
    const std::size_t per_tap = s.mode == ConvMode::depthwise ? C : C * O;
    for (std::size_t j = 0; j < s.taps; ++j)
        for (std::size_t e = 0; e < per_tap; ++e) {
            const std::size_t i = s.mode == ConvMode::depthwise ? e : e / O;
            const std::size_t o = s.mode == ConvMode::depthwise ? e : e % O;
            double acc = 0.0;
            for (std::ptrdiff_t t = 0; t < L; ++t) {
                const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(j) - pad;
                if (src < 0 || src >= L) continue;
                acc += x[static_cast<std::size_t>(src) * C + i] * grad_out[static_cast<std::size_t>(t) * O + o];
            }
            grad_kernel[j * per_tap + e] = acc;
        }
    if (!grad_bias.empty())
        for (std::size_t o = 0; o < O; ++o) {
            double acc = 0.0;
            for (std::ptrdiff_t t = 0; t < L; ++t) acc += grad_out[static_cast<std::size_t>(t) * O + o];
            grad_bias[o] = acc;
        }
}

}  // namespace cura::kernels::serial
