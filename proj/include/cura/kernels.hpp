#pragma once

// Dense inner loops used by the autodiff engine.
//
// Every kernel has a plain serial reference in `serial::` and an OpenMP
// version in `parallel::`. Each output element is produced by a single
// thread with the same summation order in both, so the two agree bitwise;
// tests rely on that. Outputs are overwritten, never accumulated into.

#include <cstddef>
#include <span>

namespace cura::kernels {

enum class Exec { serial, parallel, automatic };

/// Policy used by the dispatching overloads below. Defaults to `automatic`,
/// which goes parallel only when the problem is large enough and more than
/// one thread is available.
void set_default_exec(Exec exec) noexcept;
Exec default_exec() noexcept;
int max_threads() noexcept;

enum class ConvMode { depthwise, full };

/// Geometry of a same-padded stride-1 correlation along the length axis.
/// Depthwise kernels are laid out taps x channels; full kernels are
/// taps x in_channels x out_channels.
struct ConvShape {
    std::size_t length = 0;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t taps = 0;
    ConvMode mode = ConvMode::depthwise;

    /// Zero rows inserted before the first sample: ceil((taps - 1) / 2).
    std::size_t pad_left() const noexcept { return taps / 2; }
    std::size_t kernel_size() const noexcept {
        return mode == ConvMode::depthwise ? taps * in_channels : taps * in_channels * out_channels;
    }
};

namespace serial {

/// c(m x n) = a(m x k) * b(k x n)
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n);
/// out(k x n) = a(m x k)^T * c(m x n)
void matmul_tn(std::span<const double> a, std::span<const double> c, std::span<double> out, std::size_t m,
               std::size_t k, std::size_t n);
/// out(m x k) = c(m x n) * b(k x n)^T
void matmul_nt(std::span<const double> c, std::span<const double> b, std::span<double> out, std::size_t m,
               std::size_t k, std::size_t n);

void conv1d(std::span<const double> x, std::span<const double> kernel, std::span<const double> bias,
            std::span<double> out, const ConvShape& s);
void conv1d_grad_input(std::span<const double> grad_out, std::span<const double> kernel,
                       std::span<double> grad_x, const ConvShape& s);
void conv1d_grad_kernel(std::span<const double> x, std::span<const double> grad_out,
                        std::span<double> grad_kernel, std::span<double> grad_bias, const ConvShape& s);

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> c, std::span<double> out, std::size_t m,
               std::size_t k, std::size_t n);
void matmul_nt(std::span<const double> c, std::span<const double> b, std::span<double> out, std::size_t m,
               std::size_t k, std::size_t n);

void conv1d(std::span<const double> x, std::span<const double> kernel, std::span<const double> bias,
            std::span<double> out, const ConvShape& s);
void conv1d_grad_input(std::span<const double> grad_out, std::span<const double> kernel,
                       std::span<double> grad_x, const ConvShape& s);
void conv1d_grad_kernel(std::span<const double> x, std::span<const double> grad_out,
                        std::span<double> grad_kernel, std::span<double> grad_bias, const ConvShape& s);

}  // namespace parallel

// Dispatching entry points.
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n, Exec exec = default_exec());
void matmul_tn(std::span<const double> a, std::span<const double> c, std::span<double> out, std::size_t m,
               std::size_t k, std::size_t n, Exec exec = default_exec());
void matmul_nt(std::span<const double> c, std::span<const double> b, std::span<double> out, std::size_t m,
               std::size_t k, std::size_t n, Exec exec = default_exec());
void conv1d(std::span<const double> x, std::span<const double> kernel, std::span<const double> bias,
            std::span<double> out, const ConvShape& s, Exec exec = default_exec());
void conv1d_grad_input(std::span<const double> grad_out, std::span<const double> kernel,
                       std::span<double> grad_x, const ConvShape& s, Exec exec = default_exec());
void conv1d_grad_kernel(std::span<const double> x, std::span<const double> grad_out,
                        std::span<double> grad_kernel, std::span<double> grad_bias, const ConvShape& s,
                        Exec exec = default_exec());

}  // namespace cura::kernels
