// Serial reference vs OpenMP kernels, plus one end-to-end training step.
//   ./cura_bench --benchmark_filter=matmul

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cura/kernels.hpp"
#include "cura/model.hpp"
#include "cura/training.hpp"

namespace k = cura::kernels;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

template <auto Kernel>
void bm_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = noise(n * n, 1), b = noise(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        Kernel(a, b, c, n, n, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n * n * n));
}

template <auto Kernel>
void bm_conv(benchmark::State& state) {
    k::ConvShape s;
    s.length = static_cast<std::size_t>(state.range(0));
    s.in_channels = s.out_channels = static_cast<std::size_t>(state.range(1));
    s.taps = 5;
    s.mode = state.range(2) ? k::ConvMode::full : k::ConvMode::depthwise;
    const auto x = noise(s.length * s.in_channels, 3), w = noise(s.kernel_size(), 4), b = noise(s.out_channels, 5);
    std::vector<double> out(s.length * s.out_channels);
    for (auto _ : state) {
        Kernel(x, w, b, out, s);
        benchmark::DoNotOptimize(out.data());
    }
}

void bm_train_epoch(benchmark::State& state) {
    cura::CuraConfig c;
    c.seq_len = 32;
    c.in_channels = 3;
    c.model_dim = static_cast<std::size_t>(state.range(0));
    c.out_dim = 6;
    const auto params = cura::init_params(c, 0);
    cura::WindowedDataset data;
    data.spec.task = cura::Task::classification;
    data.num_classes = 6;
    std::mt19937_64 rng(6);
    for (std::size_t i = 0; i < 64; ++i) {
        cura::Tensor x({c.seq_len, c.in_channels});
        for (auto& v : x.data()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
        data.inputs.push_back(std::move(x));
        data.labels.push_back(i % 6);
        data.starts.push_back(i);
    }
    std::vector<std::size_t> batch(64);
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
    for (auto _ : state) benchmark::DoNotOptimize(cura::batch_loss_and_grad(params, c, data, batch));
}

}  // namespace

BENCHMARK(bm_matmul<k::serial::matmul>)->Name("matmul/serial")->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(bm_matmul<k::parallel::matmul>)->Name("matmul/parallel")->Arg(32)->Arg(128)->Arg(256)->UseRealTime();
BENCHMARK(bm_conv<k::serial::conv1d>)
    ->Name("conv1d/serial")
    ->ArgsProduct({{256, 4096}, {16, 64}, {0, 1}});
BENCHMARK(bm_conv<k::parallel::conv1d>)
    ->Name("conv1d/parallel")
    ->ArgsProduct({{256, 4096}, {16, 64}, {0, 1}})
    ->UseRealTime();
BENCHMARK(bm_train_epoch)->Name("train/batch_loss_and_grad")->Arg(8)->Arg(24)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
