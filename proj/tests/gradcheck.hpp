#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "cura/autodiff.hpp"
#include "cura/model.hpp"
#include "oracle.hpp"
#include "support.hpp"

namespace testing {

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t entries = 0;
    std::size_t resamples = 0;
    std::string worst;  // blob and index of the largest error
};

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// MSE loss of the CURA output against a random target. Analytic gradients
// come from the tape; numeric ones from central differences of the oracle
// forward pass. Draws whose pre-activations sit within `kink_margin` of a
// non-differentiable point are redrawn.
inline GradCheck gradient_check(const cura::CuraConfig& config, std::uint64_t seed, double step = 1e-5,
                                double kink_margin = 1e-3) {
    std::mt19937_64 rng(seed);
    GradCheck out;
    cura::CuraParams params;
    cura::Tensor x, target;
    for (;;) {
        params = cura::init_params(config, rng());
        for (auto b : params.present())
            for (auto& v : params[b].data()) v += std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
        x = random_tensor({config.seq_len, config.in_channels}, rng);
        target = random_tensor({config.out_dim}, rng);
        if (oracle::forward(x, params, config).kinks.min_distance >= kink_margin) break;
        ++out.resamples;
    }

    cura::ad::Tape tape;
    cura::BoundParams bound(tape, params, true);
    const cura::ad::Var input = tape.leaf(x, true);
    const cura::ad::Var loss = cura::ad::mse_loss(cura::cura_forward(input, bound, config), target);
    const cura::ad::Gradients grads = tape.backward(loss);

    auto numeric_loss = [&](const cura::CuraParams& p, const cura::Tensor& in) {
        return oracle::mse(oracle::forward(in, p, config).y, target.values());
    };
    auto note = [&](double analytic, double numeric, const std::string& where) {
        const double e = relative_error(analytic, numeric);
        ++out.entries;
        if (e > out.max_rel_error) {
            out.max_rel_error = e;
            out.worst = where;
        }
    };

    for (auto b : params.present()) {
        const cura::Tensor& g = grads[bound[b]];
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            cura::CuraParams plus = params, minus = params;
            plus[b][i] += step;
            minus[b][i] -= step;
            const double numeric = (numeric_loss(plus, x) - numeric_loss(minus, x)) / (2 * step);
            note(g[i], numeric, std::string(cura::blob_name(b)) + "[" + std::to_string(i) + "]");
        }
    }
    const cura::Tensor& gx = grads[input];
    for (std::size_t i = 0; i < x.size(); ++i) {
        cura::Tensor plus = x, minus = x;
        plus[i] += step;
        minus[i] -= step;
        const double numeric = (numeric_loss(params, plus) - numeric_loss(params, minus)) / (2 * step);
        note(gx[i], numeric, "X[" + std::to_string(i) + "]");
    }
    return out;
}

// Random configs cycling through every variant on every axis.
inline std::vector<cura::CuraConfig> variant_sweep(std::size_t count, std::uint64_t seed) {
    using namespace cura;
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    const GatingKind gatings[] = {GatingKind::multiplicative, GatingKind::linear, GatingKind::convolutional};
    const Activation gate_acts[] = {Activation::sigmoid, Activation::hard_sigmoid};
    const Nonlinearity nonlins[] = {Nonlinearity::relu, Nonlinearity::gelu, Nonlinearity::tanh_conv};
    const FilterKind filters[] = {FilterKind::conv1d, FilterKind::linear_1x1, FilterKind::none};
    const std::size_t kernels[] = {1, 3, 5};
    std::vector<CuraConfig> out;
    for (std::size_t i = 0; i < count; ++i) {
        CuraConfig c;
        c.seq_len = pick(1, 8);
        c.in_channels = pick(1, 4);
        c.model_dim = pick(2, 8);
        c.out_dim = pick(1, 3);
        c.gating = gatings[i % 3];
        c.gate_activation = gate_acts[(i / 3) % 2];
        c.nonlinearity = nonlins[(i / 2) % 3];
        c.filter = filters[(i / 4) % 3];
        c.filter_mode = (i / 5) % 2 ? ConvMode::full : ConvMode::depthwise;
        c.kernel_size = kernels[i % 3 == 0 ? pick(0, 2) : (i / 7) % 3];
        c.pooling = i % 2 ? Pooling::last : Pooling::mean;
        c.seed = rng();
        out.push_back(c);
    }
    return out;
}

}  // namespace testing
