#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "cura/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cura::kernels {

namespace {

Exec g_default_exec = Exec::automatic;

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = std::size_t{1} << 15;

bool go_parallel(Exec exec, std::size_t work) {
    if (exec == Exec::serial) return false;
    if (exec == Exec::parallel) return true;
    return work >= kParallelWork && max_threads() > 1;
}

std::size_t conv_work(const ConvShape& s) {
    return s.length * s.kernel_size();
}

}  // namespace

void set_default_exec(Exec exec) noexcept { g_default_exec = exec; }
Exec default_exec() noexcept { return g_default_exec; }

int max_threads() noexcept {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* crow = c.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            const double* brow = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_tn(std::span<const double> a, std::span<const double> c, std::span<double> out, std::size_t m,
               std::size_t k, std::size_t n) {
    const auto cols = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pp = 0; pp < cols; ++pp) {
        const auto p = static_cast<std::size_t>(pp);
        double* orow = out.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = a[i * k + p];
            const double* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * crow[j];
        }
    }
}

void matmul_nt(std::span<const double> c, std::span<const double> b, std::span<double> out, std::size_t m,
               std::size_t k, std::size_t n) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double* crow = c.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b.data() + p * n;
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += crow[j] * brow[j];
            out[i * k + p] = s;
        }
    }
}

void conv1d(std::span<const double> x, std::span<const double> kernel, std::span<const double> bias,
            std::span<double> out, const ConvShape& s) {
    const auto L = static_cast<std::ptrdiff_t>(s.length);
    const auto pad = static_cast<std::ptrdiff_t>(s.pad_left());
    const std::size_t C = s.in_channels;
    const std::size_t O = s.out_channels;
#pragma omp parallel
    {
        std::vector<double> acc(O);
#pragma omp for schedule(static)
        for (std::ptrdiff_t t = 0; t < L; ++t) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t j = 0; j < s.taps; ++j) {
                const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(j) - pad;
                if (src < 0 || src >= L) continue;
                const double* xrow = x.data() + static_cast<std::size_t>(src) * C;
                if (s.mode == ConvMode::depthwise) {
                    const double* w = kernel.data() + j * C;
                    for (std::size_t d = 0; d < C; ++d) acc[d] += xrow[d] * w[d];
                } else {
                    for (std::size_t i = 0; i < C; ++i) {
                        const double xv = xrow[i];
                        const double* w = kernel.data() + (j * C + i) * O;
                        for (std::size_t o = 0; o < O; ++o) acc[o] += xv * w[o];
                    }
                }
            }
            double* orow = out.data() + static_cast<std::size_t>(t) * O;
            for (std::size_t o = 0; o < O; ++o) orow[o] = acc[o] + (bias.empty() ? 0.0 : bias[o]);
        }
    }
}

void conv1d_grad_input(std::span<const double> grad_out, std::span<const double> kernel,
                       std::span<double> grad_x, const ConvShape& s) {
    const auto L = static_cast<std::ptrdiff_t>(s.length);
    const auto pad = static_cast<std::ptrdiff_t>(s.pad_left());
    const std::size_t C = s.in_channels;
    const std::size_t O = s.out_channels;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t src = 0; src < L; ++src) {
        double* gx = grad_x.data() + static_cast<std::size_t>(src) * C;
        for (std::size_t i = 0; i < C; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < s.taps; ++j) {
                const std::ptrdiff_t t = src - static_cast<std::ptrdiff_t>(j) + pad;
                if (t < 0 || t >= L) continue;
                const double* g = grad_out.data() + static_cast<std::size_t>(t) * O;
                if (s.mode == ConvMode::depthwise) {
                    acc += g[i] * kernel[j * C + i];
                } else {
                    const double* w = kernel.data() + (j * C + i) * O;
                    for (std::size_t o = 0; o < O; ++o) acc += g[o] * w[o];
                }
            }
            gx[i] = acc;
        }
    }
}

void conv1d_grad_kernel(std::span<const double> x, std::span<const double> grad_out,
                        std::span<double> grad_kernel, std::span<double> grad_bias, const ConvShape& s) {
    const auto L = static_cast<std::ptrdiff_t>(s.length);
    const auto pad = static_cast<std::ptrdiff_t>(s.pad_left());
    const std::size_t C = s.in_channels;
    const std::size_t O = s.out_channels;
    const bool depthwise = s.mode == ConvMode::depthwise;
    // One task per (tap, input channel); full mode accumulates a whole output row.
    const auto tasks = static_cast<std::ptrdiff_t>(s.taps * C);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t task = 0; task < tasks; ++task) {
        const std::size_t j = static_cast<std::size_t>(task) / C;
        const std::size_t i = static_cast<std::size_t>(task) % C;
        double* gw = depthwise ? grad_kernel.data() + j * C + i : grad_kernel.data() + (j * C + i) * O;
        const std::size_t width = depthwise ? 1 : O;
        for (std::size_t o = 0; o < width; ++o) gw[o] = 0.0;
        for (std::ptrdiff_t t = 0; t < L; ++t) {
            const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(j) - pad;
            if (src < 0 || src >= L) continue;
            const double xv = x[static_cast<std::size_t>(src) * C + i];
            const double* g = grad_out.data() + static_cast<std::size_t>(t) * O;
            if (depthwise)
                gw[0] += xv * g[i];
            else
                for (std::size_t o = 0; o < O; ++o) gw[o] += xv * g[o];
        }
    }
    if (!grad_bias.empty()) {
        const auto outs = static_cast<std::ptrdiff_t>(O);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t oo = 0; oo < outs; ++oo) {
            const auto o = static_cast<std::size_t>(oo);
            double acc = 0.0;
            for (std::ptrdiff_t t = 0; t < L; ++t) acc += grad_out[static_cast<std::size_t>(t) * O + o];
            grad_bias[o] = acc;
        }
    }
}

}  // namespace parallel

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n, Exec exec) {
    if (go_parallel(exec, m * k * n))
        parallel::matmul(a, b, c, m, k, n);
    else
        serial::matmul(a, b, c, m, k, n);
}

void matmul_tn(std::span<const double> a, std::span<const double> c, std::span<double> out, std::size_t m,
               std::size_t k, std::size_t n, Exec exec) {
    if (go_parallel(exec, m * k * n))
        parallel::matmul_tn(a, c, out, m, k, n);
    else
        serial::matmul_tn(a, c, out, m, k, n);
}

void matmul_nt(std::span<const double> c, std::span<const double> b, std::span<double> out, std::size_t m,
               std::size_t k, std::size_t n, Exec exec) {
    if (go_parallel(exec, m * k * n))
        parallel::matmul_nt(c, b, out, m, k, n);
    else
        serial::matmul_nt(c, b, out, m, k, n);
}

void conv1d(std::span<const double> x, std::span<const double> kernel, std::span<const double> bias,
            std::span<double> out, const ConvShape& s, Exec exec) {
    if (go_parallel(exec, conv_work(s)))
        parallel::conv1d(x, kernel, bias, out, s);
    else
        serial::conv1d(x, kernel, bias, out, s);
}

void conv1d_grad_input(std::span<const double> grad_out, std::span<const double> kernel,
                       std::span<double> grad_x, const ConvShape& s, Exec exec) {
    if (go_parallel(exec, conv_work(s)))
        parallel::conv1d_grad_input(grad_out, kernel, grad_x, s);
    else
        serial::conv1d_grad_input(grad_out, kernel, grad_x, s);
}

void conv1d_grad_kernel(std::span<const double> x, std::span<const double> grad_out,
                        std::span<double> grad_kernel, std::span<double> grad_bias, const ConvShape& s,
                        Exec exec) {
    if (go_parallel(exec, conv_work(s)))
        parallel::conv1d_grad_kernel(x, grad_out, grad_kernel, grad_bias, s);
    else
        serial::conv1d_grad_kernel(x, grad_out, grad_kernel, grad_bias, s);
}

}  // namespace cura::kernels
