#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cura/data.hpp"
#include "cura/model.hpp"

namespace cura {

// ------------------------------------------------------------- metrics

double mse(std::span<const double> y, std::span<const double> y_hat);
double mae(std::span<const double> y, std::span<const double> y_hat);
/// 1 - SS_res / SS_tot. Throws DegenerateError for a constant target.
double r2_score(std::span<const double> y, std::span<const double> y_hat);
/// Unweighted mean of per-class F1 over `num_classes` classes. A class
/// with no true and no predicted members scores 0.
double f1_macro(std::span<const std::size_t> labels, std::span<const std::size_t> preds, std::size_t num_classes);
/// -log softmax(logits)[true_class], max-subtracted.
double cross_entropy(std::span<const double> logits, std::size_t true_class);

/// Performance per parameter: M (percent) / P.
double parameter_efficiency(double metric_percent, std::size_t param_count);

/// One efficiency entry as printed in a published comparison table.
struct EfficiencyRow {
    std::string dataset;
    std::string model;
    std::size_t params;
    double metric_percent;
    std::string printed;  // as printed, e.g. "0.021"
};

enum class PrintedMatch { truncated, rounded, discrepancy };

struct EfficiencyCheck {
    EfficiencyRow row;
    double eta;
    PrintedMatch match;
};

/// Compares eta = M / P against the printed value at the printed number of
/// decimals, accepting either truncation or rounding.
EfficiencyCheck check_efficiency(const EfficiencyRow& row);
/// The published parameter-efficiency table (25 rows).
const std::vector<EfficiencyRow>& published_efficiency_table();

// ----------------------------------------------------------- optimizer

struct Hyperparams {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool amsgrad = true;
    double weight_decay = 1e-5;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;

    /// Throws ParameterError when a bound is violated.
    void validate() const;
};

/// Moments for one parameter set, aligned with CuraParams::present().
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::vector<Tensor> v_max;
    std::size_t step = 0;

    static AdamState zeros_like(const CuraParams& params);
};

/// One AdamW step with AMSGrad:
///   theta *= 1 - lr * wd
///   m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2;  v_max = max(v_max, v)
///   theta -= lr * (m / (1 - b1^t)) / (sqrt(v_max / (1 - b2^t)) + eps)
/// Without amsgrad, v replaces v_max in the update. `grads` must match the
/// present blobs of `params` in order and shape.
void adam_amsgrad_step(CuraParams& params, std::span<const Tensor> grads, AdamState& state, const Hyperparams& hyper);

/// Same recurrence on a flat parameter vector.
void adam_amsgrad_step(std::span<double> params, std::span<const double> grads, std::span<double> m,
                       std::span<double> v, std::span<double> v_max, std::size_t step, const Hyperparams& hyper);

// ------------------------------------------------------------ training

struct Metrics {
    std::optional<double> r2;
    std::optional<double> f1;
    std::optional<double> accuracy;
    std::optional<double> mae;
    std::optional<double> mse;
};

struct TrainReport {
    std::vector<double> epoch_losses;
    Metrics test;
    std::size_t param_count = 0;
    double efficiency = 0.0;  // primary metric in percent / param_count
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;

    /// Every field except wall time.
    bool same_result(const TrainReport& other) const;
};

struct FitResult {
    CuraParams params;
    TrainReport report;
};

/// Loss of a single sample: MSE for regression, cross-entropy for
/// classification. Recorded on the tape of `p`.
ad::Var sample_loss(ad::Var x, const BoundParams& p, const CuraConfig& config, const WindowedDataset& data,
                    std::size_t index);

/// Mean loss over the samples at `indices` together with the gradient of every
/// present blob.
struct LossAndGrad {
    double loss;
    std::vector<Tensor> grads;
};
LossAndGrad batch_loss_and_grad(const CuraParams& params, const CuraConfig& config, const WindowedDataset& data,
                                std::span<const std::size_t> indices);

/// Test metrics. Regression predictions and targets are mapped back to the
/// original scale of the target column first.
Metrics evaluate(const CuraParams& params, const CuraConfig& config, const WindowedDataset& data);

/// R^2 or F1 in percent, whichever the task reports.
double primary_metric_percent(const Metrics& m);

/// Mini-batch training with a seeded per-epoch shuffle, then evaluation on
/// `test`. Deterministic under (config, data, hyper). Throws UsageError for
/// an empty training set and DivergenceError on a non-finite epoch loss.
FitResult fit(const CuraConfig& config, const WindowedDataset& train, const WindowedDataset& test,
              const Hyperparams& hyper);
/// Splits `dataset` chronologically at its spec's train fraction first.
FitResult fit(const CuraConfig& config, const WindowedDataset& dataset, const Hyperparams& hyper);

}  // namespace cura
