#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "cura/errors.hpp"
#include "cura/training.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace cura;

TEST_CASE("error metrics") {
    const std::vector<double> y{0, 0}, y_hat{1, 3};
    CHECK(mae(y, y_hat) == 2.0);
    CHECK(mse(y, y_hat) == 5.0);
    CHECK(mae(y_hat, y) == mae(y, y_hat));
    CHECK(mse(y, y) == 0.0);
    CHECK(mae(y_hat, y_hat) == 0.0);
    CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), UsageError);
    CHECK_THROWS_AS(mse(std::vector<double>{1}, std::vector<double>{1, 2}), UsageError);
}

TEST_CASE("r2 score") {
    CHECK(r2_score(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 4}) == doctest::Approx(0.5));
    CHECK(r2_score(std::vector<double>{1, 5, 2}, std::vector<double>{1, 5, 2}) == 1.0);
    CHECK(r2_score(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 2}) == 0.0);
    CHECK_THROWS_AS(r2_score(std::vector<double>{4, 4}, std::vector<double>{1, 2}), DegenerateError);
    CHECK_THROWS_AS(r2_score(std::vector<double>{4}, std::vector<double>{4}), UsageError);

    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> y(20), yh(20), ys(20), yhs(20);
        const double shift = 1000 * n(rng);
        for (int i = 0; i < 20; ++i) {
            y[i] = n(rng);
            yh[i] = y[i] + 0.3 * n(rng);
            ys[i] = y[i] + shift;
            yhs[i] = yh[i] + shift;
        }
        CHECK(r2_score(y, yh) == doctest::Approx(r2_score(ys, yhs)).epsilon(1e-9));
        CHECK(r2_score(y, yh) == doctest::Approx(oracle::r2(y, yh)).epsilon(1e-12));
    }
}

TEST_CASE("macro F1") {
    const std::vector<std::size_t> labels{0, 0, 1, 1};
    CHECK(f1_macro(labels, labels, 2) == 1.0);
    CHECK(f1_macro(labels, std::vector<std::size_t>{0, 0, 0, 0}, 2) == doctest::Approx(1.0 / 3.0));
    CHECK(f1_macro(std::vector<std::size_t>{0, 0, 0}, std::vector<std::size_t>{0, 0, 0}, 1) == 1.0);
    CHECK_THROWS_AS(f1_macro(labels, std::vector<std::size_t>{0, 0, 3, 0}, 2), UsageError);

    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t K = 2 + trial % 5;
        std::uniform_int_distribution<std::size_t> cls(0, K - 1);
        std::vector<std::size_t> l(30), p(30);
        for (int i = 0; i < 30; ++i) {
            l[i] = cls(rng);
            p[i] = cls(rng) % 2 ? l[i] : cls(rng);
        }
        std::vector<std::size_t> perm(K);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::size_t> lp(30), pp(30);
        for (int i = 0; i < 30; ++i) {
            lp[i] = perm[l[i]];
            pp[i] = perm[p[i]];
        }
        CHECK(f1_macro(l, p, K) == doctest::Approx(f1_macro(lp, pp, K)).epsilon(1e-14));
        CHECK(f1_macro(l, p, K) == doctest::Approx(oracle::macro_f1(l, p, K)).epsilon(1e-14));
    }
}

TEST_CASE("cross entropy on plain logits") {
    CHECK(cross_entropy(std::vector<double>{1, 2}, 1) == doctest::Approx(0.31326168751822286).epsilon(1e-14));
    CHECK(cross_entropy(std::vector<double>{3, 3, 3}, 0) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
    CHECK(cross_entropy(std::vector<double>{0, 50}, 1) < 1e-9);
}

TEST_CASE("parameter efficiency") {
    CHECK(parameter_efficiency(97.0, 4478) == doctest::Approx(0.0216614560071).epsilon(1e-10));
    CHECK(parameter_efficiency(0.0, 123) == 0.0);
    CHECK(parameter_efficiency(84.0, 790) == doctest::Approx(0.10632911392405).epsilon(1e-10));
    CHECK_THROWS_AS(parameter_efficiency(50.0, 0), UsageError);

    auto check = [](const char* model, std::size_t p, double m, const char* printed) {
        return check_efficiency(EfficiencyRow{"d", model, p, m, printed}).match;
    };
    CHECK(check("GRU", 4478, 97.0, "0.021") == PrintedMatch::truncated);
    CHECK(check("TSMixer", 3585, 99.5, "0.027") == PrintedMatch::truncated);
    CHECK(check("x", 2374, 94.96, "0.040") == PrintedMatch::rounded);
    CHECK(check("CURA", 746, 99.0, "0.130") == PrintedMatch::discrepancy);
    CHECK(published_efficiency_table().size() == 25);
}

TEST_CASE("AdamW with AMSGrad follows the hand recurrence") {
    Hyperparams h;
    h.learning_rate = 0.1;
    h.weight_decay = 0.01;
    std::vector<double> theta{1.0}, m{0.0}, v{0.0}, v_max{0.0};
    adam_amsgrad_step(theta, std::vector<double>{0.5}, m, v, v_max, 1, h);
    CHECK(theta[0] == doctest::Approx(0.899000002).epsilon(1e-14));
    CHECK(m[0] == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(v_max[0] == doctest::Approx(0.00025).epsilon(1e-14));
    adam_amsgrad_step(theta, std::vector<double>{-0.25}, m, v, v_max, 2, h);
    CHECK(theta[0] == doctest::Approx(0.8714672987058463).epsilon(1e-14));
    CHECK(v_max[0] == doctest::Approx(0.00031225).epsilon(1e-14));

    // The running max never decreases, even when v does.
    double previous = v_max[0];
    for (std::size_t step = 3; step < 40; ++step) {
        adam_amsgrad_step(theta, std::vector<double>{step < 10 ? 0.0 : 0.01}, m, v, v_max, step, h);
        CHECK(v_max[0] >= previous);
        CHECK(v_max[0] >= v[0]);
        previous = v_max[0];
    }
}

TEST_CASE("first Adam step moves each weight by about lr in the direction against the gradient") {
    Hyperparams h;
    h.learning_rate = 1e-3;
    h.weight_decay = 0.0;
    std::vector<double> theta{0.3, -0.2, 1.0}, m(3), v(3), vm(3);
    const std::vector<double> start = theta, g{2.0, -0.001, 50.0};
    adam_amsgrad_step(theta, g, m, v, vm, 1, h);
    for (int i = 0; i < 3; ++i) CHECK(theta[i] - start[i] == doctest::Approx(-1e-3 * (g[i] > 0 ? 1 : -1)).epsilon(1e-4));
}

TEST_CASE("Adam with zero gradients and no decay leaves parameters alone") {
    CuraConfig c;
    c.in_channels = 2;
    c.seq_len = 4;
    const CuraParams start = init_params(c, 3);
    CuraParams p = start;
    AdamState state = AdamState::zeros_like(p);
    std::vector<Tensor> zeros;
    for (auto b : p.present()) zeros.push_back(Tensor::zeros(p[b].shape()));
    Hyperparams h;
    h.weight_decay = 0.0;
    for (int i = 0; i < 5; ++i) adam_amsgrad_step(p, zeros, state, h);
    CHECK(p == start);
    CHECK(state.step == 5);
}

TEST_CASE("hyperparameter validation") {
    Hyperparams h;
    h.learning_rate = 0.0;
    CHECK_THROWS_AS(h.validate(), ParameterError);
    h = Hyperparams{};
    h.beta1 = 1.0;
    CHECK_THROWS_AS(h.validate(), ParameterError);
    h = Hyperparams{};
    h.batch_size = 0;
    CHECK_THROWS_AS(h.validate(), ParameterError);
}

namespace {

WindowedDataset sine_windows(std::size_t rows, std::size_t window) {
    SynthSpec s;
    s.rows = rows;
    const Series series = gen_synth(s);
    WindowSpec spec;
    spec.window = window;
    spec.horizon = 1;
    spec.features = {0};
    spec.target = 0;
    return make_windows(series, spec);
}

CuraConfig config_for(std::size_t window) {
    CuraConfig c;
    c.seq_len = window;
    return c;
}

}  // namespace

TEST_CASE("zero epochs returns the initial parameters") {
    const auto ds = sine_windows(120, 10);
    Hyperparams h;
    h.epochs = 0;
    CuraConfig c = config_for(10);
    c.seed = 77;
    const auto result = fit(c, ds, h);
    CHECK(result.params == init_params(c, 77));
    CHECK(result.report.epoch_losses.empty());
}

TEST_CASE("training is reproducible") {
    const auto ds = sine_windows(200, 10);
    Hyperparams h;
    h.epochs = 5;
    h.seed = 4;
    const auto a = fit(config_for(10), ds, h);
    const auto b = fit(config_for(10), ds, h);
    CHECK(a.params == b.params);
    CHECK(a.report.same_result(b.report));
    h.seed = 5;
    CHECK_FALSE(fit(config_for(10), ds, h).params == a.params);
}

TEST_CASE("loss falls over the first ten epochs with default settings") {
    const auto ds = sine_windows(400, 20);
    Hyperparams h;
    h.epochs = 10;
    const auto r = fit(config_for(20), ds, h).report;
    REQUIRE(r.epoch_losses.size() == 10);
    int rises = 0;
    for (std::size_t e = 1; e < 10; ++e) rises += r.epoch_losses[e] > r.epoch_losses[e - 1];
    CHECK(rises <= 1);
    CHECK(r.epoch_losses.back() < r.epoch_losses.front());
}

TEST_CASE("a tiny noiseless linear set is fit almost exactly") {
    WindowedDataset ds;
    ds.spec.window = 1;
    ds.spec.horizon = 1;
    ds.spec.features = {0};
    for (int i = 0; i < 8; ++i) {
        const double x = -1.0 + i * (2.0 / 7.0);
        ds.inputs.push_back(Tensor::matrix({{x}}));
        ds.targets.push_back(Tensor::vector({0.5 * x - 0.25}));
        ds.starts.push_back(static_cast<std::size_t>(i));
    }
    Hyperparams h;
    h.learning_rate = 1e-2;
    h.batch_size = 8;
    h.epochs = 2000;
    const auto r = fit(config_for(1), ds, WindowedDataset{}, h).report;
    CHECK(r.epoch_losses.back() < 1e-4);
}

TEST_CASE("fit rejects inconsistent inputs") {
    const auto ds = sine_windows(100, 10);
    Hyperparams h;
    h.epochs = 1;
    CHECK_THROWS(fit(config_for(12), ds, h));
    CHECK_THROWS_AS(fit(config_for(10), WindowedDataset{}, WindowedDataset{}, h), UsageError);
    h.learning_rate = 1e6;
    h.epochs = 50;
    CHECK_THROWS_AS(fit(config_for(10), ds, h), DivergenceError);
}

TEST_CASE("evaluation reports metrics on the original scale") {
    const auto ds = sine_windows(300, 10);
    Hyperparams h;
    h.epochs = 3;
    const auto [train, test] = chrono_split(ds, 0.8);
    const auto result = fit(config_for(10), train, test, h);
    const Metrics m = evaluate(result.params, config_for(10), test);
    REQUIRE(m.r2.has_value());
    CHECK(*m.r2 == result.report.test.r2);

    std::vector<double> y, yh;
    const auto target = test.spec.target;
    for (std::size_t i = 0; i < test.size(); ++i) {
        y.push_back(test.normalizer.invert_value(target, test.targets[i][0]));
        yh.push_back(test.normalizer.invert_value(target, cura_forward(test.inputs[i], result.params, config_for(10))[0]));
    }
    CHECK(*m.r2 == doctest::Approx(oracle::r2(y, yh)).epsilon(1e-12));
    CHECK(result.report.param_count == count_params(config_for(10)));
    CHECK(result.report.efficiency == doctest::Approx(100.0 * *m.r2 / 145.0).epsilon(1e-12));
}
