#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "cura/errors.hpp"
#include "cura/kernels.hpp"
#include "cura/ops.hpp"
#include "support.hpp"

using namespace cura;

TEST_CASE("matmul hand examples") {
    const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
    const Tensor b = Tensor::matrix({{5}, {6}});
    CHECK(matmul(a, b) == Tensor::matrix({{17}, {39}}));

    const Tensor m = Tensor::matrix({{1, -2, 3}, {0.5, 4, -1}});
    CHECK(matmul(Tensor::identity(2), m) == m);
    CHECK(matmul(Tensor::zeros({4, 2}), m) == Tensor::zeros({4, 3}));
}

TEST_CASE("matmul rejects mismatched extents") {
    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
    CHECK_THROWS_AS(matmul(Tensor::zeros({2}), Tensor::zeros({2, 3})), ShapeError);
}

TEST_CASE("matmul associativity on random triples") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> ext(1, 7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = ext(rng), k = ext(rng), n = ext(rng), q = ext(rng);
        const Tensor a = testing::random_tensor({m, k}, rng);
        const Tensor b = testing::random_tensor({k, n}, rng);
        const Tensor c = testing::random_tensor({n, q}, rng);
        CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) <= 1e-9);
    }
}

TEST_CASE("hadamard") {
    CHECK(hadamard(Tensor::vector({1, 2}), Tensor::vector({3, 4})) == Tensor::vector({3, 8}));
    const Tensor a = Tensor::matrix({{1.5, -2}, {0, 7}});
    CHECK(hadamard(a, Tensor::ones({2, 2})) == a);
    CHECK(hadamard(a, Tensor::zeros({2, 2})) == Tensor::zeros({2, 2}));
    CHECK_THROWS_AS(hadamard(a, Tensor::ones({2, 3})), ShapeError);
}

TEST_CASE("conv1d hand examples") {
    const Tensor x = Tensor::matrix({{1}, {2}, {3}});
    const Tensor zero_bias = Tensor::zeros({1});
    CHECK(conv1d(x, Tensor::matrix({{1}, {1}, {1}}), zero_bias, ConvMode::depthwise) ==
          Tensor::matrix({{3}, {6}, {5}}));
    CHECK(conv1d(x, Tensor::matrix({{1}, {0}, {-1}}), zero_bias, ConvMode::depthwise) ==
          Tensor::matrix({{-2}, {-2}, {2}}));

    std::mt19937_64 rng(3);
    const Tensor wide = testing::random_tensor({9, 4}, rng);
    Tensor impulse = Tensor::zeros({3, 4});
    for (std::size_t d = 0; d < 4; ++d) impulse.at(1, d) = 1.0;
    CHECK(conv1d(wide, impulse, Tensor::zeros({4}), ConvMode::depthwise) == wide);

    const Tensor bias = Tensor::vector({0.25, -1, 3, 0});
    const Tensor flat = conv1d(wide, Tensor::zeros({3, 4}), bias, ConvMode::depthwise);
    for (std::size_t t = 0; t < 9; ++t)
        for (std::size_t d = 0; d < 4; ++d) CHECK(flat.at(t, d) == bias[d]);
}

TEST_CASE("conv1d padding for even kernels puts the extra zero on the left") {
    // k=2: one zero before, none after, so out[t] = w0*x[t-1] + w1*x[t].
    const Tensor x = Tensor::matrix({{1}, {10}, {100}});
    const Tensor y = conv1d(x, Tensor::matrix({{1}, {2}}), Tensor::zeros({1}), ConvMode::depthwise);
    CHECK(y == Tensor::matrix({{2}, {21}, {210}}));
}

TEST_CASE("conv1d full mode mixes channels") {
    // Two input channels, one output, k=1: a plain per-row dot product.
    const Tensor x = Tensor::matrix({{1, 2}, {3, 4}});
    Tensor k(Shape{1, 2, 1}, std::vector<double>{10, 100});
    CHECK(conv1d(x, k, Tensor::vector({1}), ConvMode::full) == Tensor::matrix({{211}, {431}}));
}

TEST_CASE("conv1d validation") {
    const Tensor x = Tensor::zeros({4, 2});
    CHECK_THROWS_AS(conv1d(x, Tensor::zeros({3, 3}), Tensor::zeros({2}), ConvMode::depthwise), ShapeError);
    CHECK_THROWS_AS(conv1d(x, Tensor::zeros({3, 2}), Tensor::zeros({3}), ConvMode::depthwise), ShapeError);
    CHECK_THROWS(conv1d(x, Tensor(), Tensor::zeros({2}), ConvMode::depthwise));
}

TEST_CASE("activation definitions") {
    CHECK(activate(Activation::relu, -1.0) == 0.0);
    CHECK(activate(Activation::relu, 2.0) == 2.0);
    CHECK(activate(Activation::sigmoid, 0.0) == 0.5);
    CHECK(activate(Activation::hard_sigmoid, 0.5) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(activate(Activation::hard_sigmoid, 10.0) == 1.0);
    CHECK(activate(Activation::hard_sigmoid, -10.0) == 0.0);
    CHECK(activate(Activation::gelu, 1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
    CHECK(activate(Activation::tanh, 0.5) == std::tanh(0.5));
    CHECK(activation_from_string("hard_sigmoid") == Activation::hard_sigmoid);
    CHECK_THROWS_AS(activation_from_string("swish"), ParameterError);
}

TEST_CASE("activation ranges") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(-30, 30);
    for (int i = 0; i < 2000; ++i) {
        const double x = dist(rng);
        const double s = activate(Activation::sigmoid, x);
        CHECK(s > 0.0);
        CHECK(s < 1.0);
        CHECK(activate(Activation::relu, x) >= 0.0);
    }
    CHECK(std::isfinite(activate(Activation::sigmoid, -800.0)));
    CHECK(std::isfinite(activate(Activation::sigmoid, 800.0)));
}

TEST_CASE("activation derivatives match central differences away from kinks") {
    const double h = 1e-6;
    for (auto kind : {Activation::sigmoid, Activation::hard_sigmoid, Activation::relu, Activation::gelu,
                      Activation::tanh}) {
        for (double x : {-3.1, -1.2, -0.3, 0.4, 1.7, 2.9}) {
            const double fd = (activate(kind, x + h) - activate(kind, x - h)) / (2 * h);
            CHECK(activate_grad(kind, x) == doctest::Approx(fd).epsilon(1e-7));
        }
    }
    CHECK(activate_grad(Activation::relu, 0.0) == 0.0);
}

namespace {

template <class F>
void both_paths_agree(F run) {
    std::vector<double> a, b;
    run(kernels::Exec::serial, a);
    run(kernels::Exec::parallel, b);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bitwise") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t m = 17 + trial, k = 9 + trial, n = 13;
        const Tensor a = testing::random_tensor({m, k}, rng);
        const Tensor b = testing::random_tensor({k, n}, rng);
        const Tensor c = testing::random_tensor({m, n}, rng);
        both_paths_agree([&](kernels::Exec e, std::vector<double>& out) {
            out.assign(m * n, 0.0);
            kernels::matmul(a.data(), b.data(), out, m, k, n, e);
        });
        both_paths_agree([&](kernels::Exec e, std::vector<double>& out) {
            out.assign(k * n, 0.0);
            kernels::matmul_tn(a.data(), c.data(), out, m, k, n, e);
        });
        both_paths_agree([&](kernels::Exec e, std::vector<double>& out) {
            out.assign(m * k, 0.0);
            kernels::matmul_nt(c.data(), b.data(), out, m, k, n, e);
        });

        for (auto mode : {kernels::ConvMode::depthwise, kernels::ConvMode::full}) {
            const std::size_t L = 23, D = 6, taps = 1 + 2 * static_cast<std::size_t>(trial % 3);
            kernels::ConvShape s{L, D, D, taps, mode};
            const Tensor x = testing::random_tensor({L, D}, rng);
            const Tensor kern = testing::random_tensor({s.kernel_size()}, rng);
            const Tensor bias = testing::random_tensor({D}, rng);
            const Tensor g = testing::random_tensor({L, D}, rng);
            both_paths_agree([&](kernels::Exec e, std::vector<double>& out) {
                out.assign(L * D, 0.0);
                kernels::conv1d(x.data(), kern.data(), bias.data(), out, s, e);
            });
            both_paths_agree([&](kernels::Exec e, std::vector<double>& out) {
                out.assign(L * D, 0.0);
                kernels::conv1d_grad_input(g.data(), kern.data(), out, s, e);
            });
            both_paths_agree([&](kernels::Exec e, std::vector<double>& out) {
                out.assign(s.kernel_size() + D, 0.0);
                std::span<double> all(out);
                kernels::conv1d_grad_kernel(x.data(), g.data(), all.first(s.kernel_size()),
                                            all.subspan(s.kernel_size()), s, e);
            });
        }
    }
}

TEST_CASE("tensor basics") {
    CHECK_THROWS(Tensor(Shape{0, 3}));
    CHECK(Tensor::identity(3).at(2, 2) == 1.0);
    CHECK(Tensor::zeros({2, 3}).reshaped({3, 2}).shape() == Shape{3, 2});
    CHECK_THROWS(Tensor::zeros({2, 3}).reshaped({4, 2}));
    Tensor t = Tensor::ones({2});
    t[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
    CHECK(shape_string({2, 3}) == "[2x3]");
}
