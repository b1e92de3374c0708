#pragma once

// Plain-loop reference implementation used as a test oracle. It reads the
// raw parameter arrays and re-derives every unit from its formula without
// calling any library math, so agreement with the library is evidence of
// correctness rather than of shared code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "cura/model.hpp"

namespace oracle {

using Rows = std::vector<std::vector<double>>;  // L x width

// Smallest distance of any pre-activation to a point where the activation
// is not differentiable. Finite differences are meaningless near these.
struct KinkMargin {
    double min_distance = std::numeric_limits<double>::infinity();
    void note(double d) { min_distance = std::min(min_distance, std::abs(d)); }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double activation(cura::Activation kind, double x, KinkMargin* kinks = nullptr) {
    switch (kind) {
        case cura::Activation::sigmoid: return sigmoid(x);
        case cura::Activation::hard_sigmoid: {
            if (kinks) {
                kinks->note(x - 2.5);
                kinks->note(x + 2.5);
            }
            const double y = 0.2 * x + 0.5;
            return y < 0.0 ? 0.0 : (y > 1.0 ? 1.0 : y);
        }
        case cura::Activation::relu:
            if (kinks) kinks->note(x);
            return x > 0.0 ? x : 0.0;
        case cura::Activation::gelu: return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
        case cura::Activation::tanh: return std::tanh(x);
    }
    return 0.0;
}

inline Rows to_rows(const cura::Tensor& t) {
    Rows out(t.dim(0), std::vector<double>(t.dim(1)));
    for (std::size_t r = 0; r < t.dim(0); ++r)
        for (std::size_t c = 0; c < t.dim(1); ++c) out[r][c] = t.values()[r * t.dim(1) + c];
    return out;
}

// x (L x in) times w (in x out, row-major) plus bias b (out).
inline Rows affine(const Rows& x, const cura::Tensor& w, const cura::Tensor& b) {
    const std::size_t in = w.dim(0), out = w.dim(1);
    Rows y(x.size(), std::vector<double>(out));
    for (std::size_t t = 0; t < x.size(); ++t)
        for (std::size_t o = 0; o < out; ++o) {
            double s = b.values()[o];
            for (std::size_t i = 0; i < in; ++i) s += x[t][i] * w.values()[i * out + o];
            y[t][o] = s;
        }
    return y;
}

// Zero-padded "same" correlation with ceil((k-1)/2) zeros before the series.
// Depthwise kernels are k x D; full kernels are k x D_in x D_out.
inline Rows conv_same(const Rows& x, const cura::Tensor& kernel, const cura::Tensor& bias, bool full) {
    const std::size_t L = x.size();
    const std::size_t k = kernel.dim(0);
    const std::size_t in = x.empty() ? 0 : x[0].size();
    const std::size_t out = bias.size();
    const long before = static_cast<long>((k - 1) - (k - 1) / 2);
    Rows y(L, std::vector<double>(out));
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t o = 0; o < out; ++o) {
            double s = bias.values()[o];
            for (std::size_t j = 0; j < k; ++j) {
                const long src = static_cast<long>(t) + static_cast<long>(j) - before;
                if (src < 0 || src >= static_cast<long>(L)) continue;
                const auto& row = x[static_cast<std::size_t>(src)];
                if (full) {
                    for (std::size_t i = 0; i < in; ++i) s += row[i] * kernel.values()[(j * in + i) * out + o];
                } else {
                    s += row[o] * kernel.values()[j * in + o];
                }
            }
            y[t][o] = s;
        }
    return y;
}

inline Rows map(const Rows& x, cura::Activation kind, KinkMargin* kinks) {
    Rows y = x;
    for (auto& row : y)
        for (auto& v : row) v = activation(kind, v, kinks);
    return y;
}

struct Trace {
    Rows g, r, h1, h2, h3;
    std::vector<double> y;
    KinkMargin kinks;
};

inline Trace forward(const cura::Tensor& input, const cura::CuraParams& p, const cura::CuraConfig& c) {
    using cura::Blob;
    Trace tr;
    const Rows x = to_rows(input);

    Rows gate_pre = affine(x, p[Blob::gate_w], p[Blob::gate_b]);
    switch (c.gating) {
        case cura::GatingKind::multiplicative: tr.g = map(gate_pre, c.gate_activation, &tr.kinks); break;
        case cura::GatingKind::linear: tr.g = gate_pre; break;
        case cura::GatingKind::convolutional:
            tr.g = map(conv_same(gate_pre, p[Blob::gate_conv_w], p[Blob::gate_conv_b], false), c.gate_activation,
                       &tr.kinks);
            break;
    }
    tr.r = affine(x, p[Blob::res_w], p[Blob::res_b]);

    tr.h1 = tr.r;
    for (std::size_t t = 0; t < tr.h1.size(); ++t)
        for (std::size_t d = 0; d < tr.h1[t].size(); ++d) tr.h1[t][d] = tr.g[t][d] * tr.r[t][d] + tr.r[t][d];

    const Rows nl_pre = affine(tr.h1, p[Blob::nl_w], p[Blob::nl_b]);
    switch (c.nonlinearity) {
        case cura::Nonlinearity::relu: tr.h2 = map(nl_pre, cura::Activation::relu, &tr.kinks); break;
        case cura::Nonlinearity::gelu: tr.h2 = map(nl_pre, cura::Activation::gelu, &tr.kinks); break;
        case cura::Nonlinearity::tanh_conv:
            tr.h2 = conv_same(map(nl_pre, cura::Activation::tanh, &tr.kinks), p[Blob::nl_conv_w],
                              p[Blob::nl_conv_b], false);
            break;
    }

    switch (c.filter) {
        case cura::FilterKind::conv1d:
            tr.h3 = conv_same(tr.h2, p[Blob::filter_w], p[Blob::filter_b], c.filter_mode == cura::ConvMode::full);
            break;
        case cura::FilterKind::linear_1x1: tr.h3 = affine(tr.h2, p[Blob::filter_w], p[Blob::filter_b]); break;
        case cura::FilterKind::none: tr.h3 = tr.h2; break;
    }

    const std::size_t D = c.model_dim;
    std::vector<double> pooled(D, 0.0);
    if (c.pooling == cura::Pooling::mean) {
        for (const auto& row : tr.h3)
            for (std::size_t d = 0; d < D; ++d) pooled[d] += row[d];
        for (auto& v : pooled) v /= static_cast<double>(tr.h3.size());
    } else {
        pooled = tr.h3.back();
    }
    const auto& wo = p[Blob::out_w];
    const auto& bo = p[Blob::out_b];
    tr.y.assign(c.out_dim, 0.0);
    for (std::size_t h = 0; h < c.out_dim; ++h) {
        double s = bo.values()[h];
        for (std::size_t d = 0; d < D; ++d) s += pooled[d] * wo.values()[d * c.out_dim + h];
        tr.y[h] = s;
    }
    return tr;
}

inline double mse(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

// Hand-counted parameter total for a config, term by term.
inline std::size_t param_count(const cura::CuraConfig& c) {
    const std::size_t C = c.in_channels, D = c.model_dim, H = c.out_dim, k = c.kernel_size;
    std::size_t n = (C * D + D) + (C * D + D) + (D * D + D) + (D * H + H);
    if (c.gating == cura::GatingKind::convolutional) n += 3 * D + D;
    if (c.nonlinearity == cura::Nonlinearity::tanh_conv) n += k * D + D;
    if (c.filter == cura::FilterKind::conv1d) n += (c.filter_mode == cura::ConvMode::full ? k * D * D : k * D) + D;
    if (c.filter == cura::FilterKind::linear_1x1) n += D * D + D;
    return n;
}

// Coefficient of determination from its definition.
inline double r2(const std::vector<double>& y, const std::vector<double>& y_hat) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    return 1.0 - ss_res / ss_tot;
}

// Macro F1 from a confusion count; classes with no support and no
// predictions score 0.
inline double macro_f1(const std::vector<std::size_t>& labels, const std::vector<std::size_t>& preds,
                       std::size_t classes) {
    double total = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            tp += labels[i] == k && preds[i] == k;
            fp += labels[i] != k && preds[i] == k;
            fn += labels[i] == k && preds[i] != k;
        }
        total += tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
    }
    return total / static_cast<double>(classes);
}

}  // namespace oracle
