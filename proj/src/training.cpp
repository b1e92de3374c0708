#include "cura/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "cura/errors.hpp"

namespace cura {

// ------------------------------------------------------------- metrics

namespace {

void check_pair(const char* what, std::size_t a, std::size_t b, std::size_t min_len) {
    if (a != b)
        throw UsageError(std::string(what) + ": lengths " + std::to_string(a) + " and " + std::to_string(b) +
                         " differ");
    if (a < min_len)
        throw UsageError(std::string(what) + ": needs at least " + std::to_string(min_len) + " values");
}

}  // namespace

double mse(std::span<const double> y, std::span<const double> y_hat) {
    check_pair("mse", y.size(), y_hat.size(), 1);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    return s / static_cast<double>(y.size());
}

double mae(std::span<const double> y, std::span<const double> y_hat) {
    check_pair("mae", y.size(), y_hat.size(), 1);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - y_hat[i]);
    return s / static_cast<double>(y.size());
}

double r2_score(std::span<const double> y, std::span<const double> y_hat) {
    check_pair("r2_score", y.size(), y_hat.size(), 2);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    if (!(ss_tot > 0.0)) throw DegenerateError("r2_score: target is constant");
    return 1.0 - ss_res / ss_tot;
}

double f1_macro(std::span<const std::size_t> labels, std::span<const std::size_t> preds, std::size_t num_classes) {
    check_pair("f1_macro", labels.size(), preds.size(), 1);
    if (num_classes == 0) throw UsageError("f1_macro: num_classes must be positive");
    std::vector<std::size_t> tp(num_classes), fp(num_classes), fn(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes || preds[i] >= num_classes)
            throw UsageError("f1_macro: class id out of range at index " + std::to_string(i));
        if (labels[i] == preds[i]) {
            ++tp[labels[i]];
        } else {
            ++fp[preds[i]];
            ++fn[labels[i]];
        }
    }
    double total = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
        total += denom ? 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom) : 0.0;
    }
    return total / static_cast<double>(num_classes);
}

double cross_entropy(std::span<const double> logits, std::size_t true_class) {
    if (logits.size() < 2) throw UsageError("cross_entropy: needs at least 2 logits");
    if (true_class >= logits.size()) throw UsageError("cross_entropy: class id out of range");
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - zmax);
    return std::log(denom) - (logits[true_class] - zmax);
}

double parameter_efficiency(double metric_percent, std::size_t param_count) {
    if (param_count == 0) throw UsageError("parameter_efficiency: parameter count must be positive");
    return metric_percent / static_cast<double>(param_count);
}

EfficiencyCheck check_efficiency(const EfficiencyRow& row) {
    const double eta = parameter_efficiency(row.metric_percent, row.params);
    const auto dot = row.printed.find('.');
    const int decimals = dot == std::string::npos ? 0 : static_cast<int>(row.printed.size() - dot - 1);
    const double scale = std::pow(10.0, decimals);
    const double printed = std::round(std::stod(row.printed) * scale);
    const double scaled = eta * scale;
    // The nudge keeps exact quotients such as 95/2375 = 0.04 from truncating to 0.039.
    const double truncated = std::trunc(scaled + std::copysign(1e-9, scaled));
    const double rounded = std::round(scaled);
    PrintedMatch match = PrintedMatch::discrepancy;
    if (rounded == printed)
        match = PrintedMatch::rounded;
    else if (truncated == printed)
        match = PrintedMatch::truncated;
    return {row, eta, match};
}

const std::vector<EfficiencyRow>& published_efficiency_table() {
    static const std::vector<EfficiencyRow> rows = {
        {"S&P 500", "CURA", 746, 99.0, "0.130"},         {"S&P 500", "gMLP", 1067, 99.0, "0.092"},
        {"S&P 500", "GRU", 4478, 97.0, "0.021"},         {"S&P 500", "LSTM", 4513, 98.0, "0.021"},
        {"S&P 500", "TSMixer", 3585, 99.5, "0.027"},     {"House Prices", "CURA", 790, 84.0, "0.10"},
        {"House Prices", "gMLP", 929, 79.0, "0.085"},    {"House Prices", "GRU", 154561, -0.12, "-7.76"},
        {"House Prices", "LSTM", 1285, 21.0, "0.016"},   {"House Prices", "TSMixer", 11475, 71.0, "0.0061"},
        {"ETTm1", "CURA", 731, 86.45, "0.12"},           {"ETTm1", "gMLP", 11423, 80.88, "0.0070"},
        {"ETTm1", "GRU", 14081, 53.70, "0.0038"},        {"ETTm1", "LSTM", 18753, 44.46, "0.0023"},
        {"ETTm1", "TSMixer", 55090, 91.15, "0.0016"},    {"UCI HAR", "CURA", 2342, 95.40, "0.041"},
        {"UCI HAR", "gMLP", 2374, 94.96, "0.040"},       {"UCI HAR", "GRU", 15174, 93.16, "0.0064"},
        {"UCI HAR", "LSTM", 20102, 93.71, "0.0046"},     {"UCI HAR", "TSMixer", 14490, 95.63, "0.0065"},
        {"FallAllD", "CURA", 345, 80.0, "0.231"},        {"FallAllD", "gMLP", 440551, 79.3, "0.00018"},
        {"FallAllD", "GRU", 7681, 77.5, "0.01"},         {"FallAllD", "LSTM", 4769, 77.3, "0.016"},
        {"FallAllD", "TSMixer", 836571, 76.1, "0.000091"},
    };
    return rows;
}

// ----------------------------------------------------------- optimizer

void Hyperparams::validate() const {
    if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ParameterError("beta1 must lie in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ParameterError("beta2 must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
    if (!(weight_decay >= 0.0)) throw ParameterError("weight_decay must be non-negative");
    if (batch_size == 0) throw ParameterError("batch_size must be positive");
}

AdamState AdamState::zeros_like(const CuraParams& params) {
    AdamState s;
    for (Blob b : params.present()) {
        s.m.push_back(Tensor::zeros(params[b].shape()));
        s.v.push_back(Tensor::zeros(params[b].shape()));
        s.v_max.push_back(Tensor::zeros(params[b].shape()));
    }
    return s;
}

void adam_amsgrad_step(std::span<double> params, std::span<const double> grads, std::span<double> m,
                       std::span<double> v, std::span<double> v_max, std::size_t step, const Hyperparams& h) {
    if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size() ||
        v_max.size() != params.size())
        throw UsageError("adam step: parameter, gradient and moment sizes differ");
    if (step == 0) throw UsageError("adam step: step counter starts at 1");
    const double t = static_cast<double>(step);
    const double bc1 = 1.0 - std::pow(h.beta1, t);
    const double bc2 = 1.0 - std::pow(h.beta2, t);
    const double decay = 1.0 - h.learning_rate * h.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        params[i] *= decay;
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
        v_max[i] = std::max(v_max[i], v[i]);
        const double second = h.amsgrad ? v_max[i] : v[i];
        params[i] -= h.learning_rate * (m[i] / bc1) / (std::sqrt(second / bc2) + h.epsilon);
    }
}

void adam_amsgrad_step(CuraParams& params, std::span<const Tensor> grads, AdamState& state, const Hyperparams& hyper) {
    const auto blobs = params.present();
    if (grads.size() != blobs.size() || state.m.size() != blobs.size())
        throw UsageError("adam step: expected " + std::to_string(blobs.size()) + " gradients, got " +
                         std::to_string(grads.size()));
    for (std::size_t i = 0; i < blobs.size(); ++i)
        if (grads[i].shape() != params[blobs[i]].shape())
            throw UsageError("adam step: gradient " + shape_string(grads[i].shape()) + " does not match " +
                             std::string(blob_name(blobs[i])) + " " + shape_string(params[blobs[i]].shape()));
    ++state.step;
    for (std::size_t i = 0; i < blobs.size(); ++i)
        adam_amsgrad_step(params[blobs[i]].data(), grads[i].data(), state.m[i].data(), state.v[i].data(),
                          state.v_max[i].data(), state.step, hyper);
}

// ------------------------------------------------------------ training

bool TrainReport::same_result(const TrainReport& o) const {
    auto same_metrics = [](const Metrics& a, const Metrics& b) {
        return a.r2 == b.r2 && a.f1 == b.f1 && a.accuracy == b.accuracy && a.mae == b.mae && a.mse == b.mse;
    };
    return epoch_losses == o.epoch_losses && same_metrics(test, o.test) && param_count == o.param_count &&
           efficiency == o.efficiency && seed == o.seed;
}

ad::Var sample_loss(ad::Var x, const BoundParams& p, const CuraConfig& config, const WindowedDataset& data,
                    std::size_t index) {
    ad::Var y = cura_forward(x, p, config);
    if (data.spec.task == Task::regression) return ad::mse_loss(y, data.targets[index]);
    return ad::cross_entropy(y, data.labels[index]);
}

LossAndGrad batch_loss_and_grad(const CuraParams& params, const CuraConfig& config, const WindowedDataset& data,
                                std::span<const std::size_t> indices) {
    if (indices.empty()) throw UsageError("empty batch");
    ad::Tape tape;
    BoundParams bound(tape, params, true);
    std::optional<ad::Var> total;
    for (auto i : indices) {
        ad::Var l = sample_loss(tape.constant(data.inputs.at(i)), bound, config, data, i);
        total = total ? ad::add(*total, l) : l;
    }
    ad::Var loss = ad::scale(*total, 1.0 / static_cast<double>(indices.size()));
    const auto grads = tape.backward(loss);
    LossAndGrad out{loss.value()[0], {}};
    for (Blob b : params.present()) out.grads.push_back(grads[bound[b]]);
    return out;
}

namespace {

std::size_t argmax(const Tensor& t) {
    return static_cast<std::size_t>(std::max_element(t.data().begin(), t.data().end()) - t.data().begin());
}

void check_compatible(const CuraConfig& config, const WindowedDataset& data) {
    const auto& spec = data.spec;
    if (config.seq_len != spec.window)
        throw UsageError("model seq_len " + std::to_string(config.seq_len) + " does not match window " +
                         std::to_string(spec.window));
    if (config.in_channels != spec.features.size())
        throw UsageError("model in_channels " + std::to_string(config.in_channels) + " does not match " +
                         std::to_string(spec.features.size()) + " feature columns");
    if (spec.task == Task::regression && config.out_dim != spec.horizon)
        throw UsageError("regression needs out_dim equal to the horizon " + std::to_string(spec.horizon));
    if (spec.task == Task::classification && (config.out_dim < 2 || config.out_dim < data.num_classes))
        throw UsageError("classification needs out_dim >= max(2, number of classes " +
                         std::to_string(data.num_classes) + ")");
}

}  // namespace

Metrics evaluate(const CuraParams& params, const CuraConfig& config, const WindowedDataset& data) {
    if (data.empty()) throw UsageError("evaluate: empty dataset");
    check_compatible(config, data);
    const auto outputs = predict_batch(params, config, data.inputs);
    Metrics m;
    if (data.spec.task == Task::regression) {
        std::vector<double> y, y_hat;
        for (std::size_t i = 0; i < outputs.size(); ++i)
            for (std::size_t h = 0; h < outputs[i].size(); ++h) {
                y.push_back(data.normalizer.invert_value(data.spec.target, data.targets[i][h]));
                y_hat.push_back(data.normalizer.invert_value(data.spec.target, outputs[i][h]));
            }
        m.mse = mse(y, y_hat);
        m.mae = mae(y, y_hat);
        m.r2 = r2_score(y, y_hat);
    } else {
        std::vector<std::size_t> preds;
        for (const auto& o : outputs) preds.push_back(argmax(o));
        std::size_t hits = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == data.labels[i];
        m.f1 = f1_macro(data.labels, preds, config.out_dim);
        m.accuracy = static_cast<double>(hits) / static_cast<double>(preds.size());
    }
    return m;
}

double primary_metric_percent(const Metrics& m) {
    if (m.r2) return 100.0 * *m.r2;
    if (m.f1) return 100.0 * *m.f1;
    throw UsageError("metrics carry neither R^2 nor F1");
}

FitResult fit(const CuraConfig& config, const WindowedDataset& train, const WindowedDataset& test,
              const Hyperparams& hyper) {
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    hyper.validate();
    if (train.empty()) throw UsageError("fit: empty training set");
    check_compatible(config, train);

    FitResult result{init_params(config, config.seed), {}};
    AdamState state = AdamState::zeros_like(result.params);
    std::mt19937_64 rng(hyper.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t lo = 0; lo < order.size(); lo += hyper.batch_size) {
            const std::size_t hi = std::min(order.size(), lo + hyper.batch_size);
            const std::span<const std::size_t> batch(order.data() + lo, hi - lo);
            const auto lg = batch_loss_and_grad(result.params, config, train, batch);
            if (!std::isfinite(lg.loss))
                throw DivergenceError(epoch + 1, "training diverged at epoch " + std::to_string(epoch + 1));
            epoch_loss += lg.loss * static_cast<double>(batch.size());
            adam_amsgrad_step(result.params, lg.grads, state, hyper);
        }
        epoch_loss /= static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss))
            throw DivergenceError(epoch + 1, "training diverged at epoch " + std::to_string(epoch + 1));
        result.report.epoch_losses.push_back(epoch_loss);
    }

    auto& report = result.report;
    report.param_count = count_params(config);
    report.seed = hyper.seed;
    if (!test.empty()) {
        report.test = evaluate(result.params, config, test);
        report.efficiency = parameter_efficiency(primary_metric_percent(report.test), report.param_count);
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

FitResult fit(const CuraConfig& config, const WindowedDataset& dataset, const Hyperparams& hyper) {
    auto [train, test] = chrono_split(dataset, dataset.spec.train_fraction);
    return fit(config, train, test, hyper);
}

}  // namespace cura
