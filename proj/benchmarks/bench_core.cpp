#include <benchmark/benchmark.h>

#include "flocode/rng.hpp"
#include "flocode/tensor.hpp"
#include "flocode/tensor_ops.hpp"

namespace {

flocode::Tensor random_tensor(flocode::Rng& rng, std::vector<int> shape) {
    std::vector<double> data(static_cast<size_t>(flocode::shape_numel(shape)));
    for (auto& x : data) x = rng.normal();
    return flocode::Tensor::from_data(shape, data);
}

void BM_matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    flocode::Rng rng(1);
    flocode::Tensor a = random_tensor(rng, {n, n});
    flocode::Tensor b = random_tensor(rng, {n, n});
    for (auto _ : state) {
        benchmark::DoNotOptimize(flocode::ops::matmul(a, b));
    }
}
BENCHMARK(BM_matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_softmax_rows(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    flocode::Rng rng(2);
    flocode::Tensor x = random_tensor(rng, {n, n});
    for (auto _ : state) {
        benchmark::DoNotOptimize(flocode::ops::softmax_rows(x));
    }
}
BENCHMARK(BM_softmax_rows)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
