#pragma once

// One-axis-at-a-time ablation over the architectural variants: the default
// core plus two alternative gates, one alternative gate activation, two
// alternative nonlinearities and two alternative filters.

#include <cstddef>
#include <string>
#include <vector>

#include "cura/io.hpp"
#include "cura/model.hpp"

namespace cura {

struct AblationVariant {
    std::string axis;  // default | gating | gate_activation | nonlinearity | filter
    std::string name;
    CuraConfig config;
};

/// The eight variants in report order. `base` supplies dimensions, kernel
/// size, filter mode, pooling and seed; its variant selectors are reset to
/// the default (multiplicative, sigmoid, relu, conv1d) before one axis is
/// changed.
std::vector<AblationVariant> ablation_variants(const CuraConfig& base);

struct AblationResult {
    AblationVariant variant;
    std::size_t param_count = 0;
    double score = 0.0;  // F1 or R^2 on the test split
    double final_loss = 0.0;
    bool finite = false;
};

/// Trains every variant on the dataset described by `rc`. Variants run
/// concurrently when OpenMP has threads; results come back in variant order.
std::vector<AblationResult> run_ablation(const RunConfig& rc);

/// key=value lines per variant, then a table ranked by score (ties keep
/// variant order). Contains no timing, so equal inputs give equal bytes.
std::string format_ablation_report(const std::vector<AblationResult>& results, Task task);

/// Desk-scale stand-in for a six-class, three-channel activity task:
/// freq_classes windows of 32 samples.
RunConfig classification_analogue();

/// Desk-scale stand-in for a univariate next-step price forecast: a
/// noiseless sine_mix series, 20-step window, 1-step horizon.
RunConfig regression_analogue();

}  // namespace cura
