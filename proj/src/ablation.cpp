#include "cura/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>

#include "cura/errors.hpp"
#include "cura/report.hpp"

namespace cura {

std::vector<AblationVariant> ablation_variants(const CuraConfig& base) {
    CuraConfig d = base;
    d.gating = GatingKind::multiplicative;
    d.gate_activation = Activation::sigmoid;
    d.nonlinearity = Nonlinearity::relu;
    d.filter = FilterKind::conv1d;

    std::vector<AblationVariant> out;
    out.push_back({"default", "default", d});
    auto with = [&](const char* axis, const std::string& name, auto mutate) {
        CuraConfig c = d;
        mutate(c);
        out.push_back({axis, name, c});
    };
    with("gating", "linear", [](CuraConfig& c) { c.gating = GatingKind::linear; });
    with("gating", "convolutional", [](CuraConfig& c) { c.gating = GatingKind::convolutional; });
    with("gate_activation", "hard_sigmoid", [](CuraConfig& c) { c.gate_activation = Activation::hard_sigmoid; });
    with("nonlinearity", "gelu", [](CuraConfig& c) { c.nonlinearity = Nonlinearity::gelu; });
    with("nonlinearity", "tanh_conv", [](CuraConfig& c) { c.nonlinearity = Nonlinearity::tanh_conv; });
    with("filter", "linear_1x1", [](CuraConfig& c) { c.filter = FilterKind::linear_1x1; });
    with("filter", "none", [](CuraConfig& c) { c.filter = FilterKind::none; });
    return out;
}

std::vector<AblationResult> run_ablation(const RunConfig& rc) {
    const WindowedDataset dataset = build_dataset(rc);
    const auto [train, test] = chrono_split(dataset, rc.train_fraction);
    const auto variants = ablation_variants(rc.resolved_model());

    std::vector<AblationResult> results(variants.size());
    std::exception_ptr failure;
    const auto n = static_cast<std::ptrdiff_t>(variants.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        auto& r = results[static_cast<std::size_t>(i)];
        r.variant = variants[static_cast<std::size_t>(i)];
        r.param_count = count_params(r.variant.config);
        try {
            const FitResult fitted = fit(r.variant.config, train, test, rc.hyper);
            const auto& rep = fitted.report;
            r.final_loss = rep.epoch_losses.empty() ? 0.0 : rep.epoch_losses.back();
            r.score = rep.test.f1 ? *rep.test.f1 : rep.test.r2.value_or(0.0);
            r.finite = std::isfinite(r.final_loss) && std::isfinite(r.score);
        } catch (const DivergenceError&) {
            r.finite = false;
        } catch (...) {
#pragma omp critical(cura_ablation_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

std::string format_ablation_report(const std::vector<AblationResult>& results, Task task) {
    const std::string metric = task == Task::classification ? "f1" : "r2";
    std::ostringstream os;
    os << "variants=" << results.size() << '\n';
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        const std::string p = "variant." + std::to_string(i) + ".";
        os << p << "axis=" << r.variant.axis << '\n'
           << p << "name=" << r.variant.name << '\n'
           << p << "params=" << r.param_count << '\n'
           << p << metric << '=' << format_number(r.score) << '\n'
           << p << "final_loss=" << format_number(r.final_loss) << '\n'
           << p << "finite=" << (r.finite ? "true" : "false") << '\n';
    }
    os << '\n';

    std::vector<std::size_t> order(results.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return results[a].score > results[b].score; });
    TextTable t({"rank", "axis", "variant", "params", metric, "final_loss"});
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const auto& r = results[order[rank]];
        t.add_row({std::to_string(rank + 1), r.variant.axis, r.variant.name, std::to_string(r.param_count),
                   format_number(r.score), r.finite ? format_number(r.final_loss) : "diverged"});
    }
    os << t.render();
    return os.str();
}

RunConfig classification_analogue() {
    RunConfig rc;
    rc.task = Task::classification;
    rc.synth.kind = SynthKind::freq_classes;
    rc.synth.channels = 3;
    rc.synth.classes = 6;
    rc.synth.segment = 32;
    rc.synth.rows = 32 * 480;
    rc.synth.noise_std = 0.2;
    rc.window = 32;
    rc.stride = 32;
    rc.num_classes = 6;
    rc.model.model_dim = 24;
    rc.model.pooling = Pooling::mean;
    rc.hyper.learning_rate = 1e-2;
    rc.hyper.epochs = 40;
    rc.hyper.batch_size = 16;
    return rc;
}

RunConfig regression_analogue() {
    RunConfig rc;
    rc.task = Task::regression;
    rc.synth.kind = SynthKind::sine_mix;
    rc.synth.channels = 1;
    rc.synth.rows = 600;
    rc.synth.noise_std = 0.0;
    rc.window = 20;
    rc.horizon = 1;
    rc.model.model_dim = 16;
    rc.model.pooling = Pooling::last;
    rc.hyper.learning_rate = 1e-2;
    rc.hyper.epochs = 200;
    rc.hyper.batch_size = 32;
    return rc;
}

}  // namespace cura
