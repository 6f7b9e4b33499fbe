#include <benchmark/benchmark.h>

#include <random>

#include "neurospect/nn.hpp"
#include "neurospect/pipeline.hpp"

using namespace neurospect;

namespace {

std::vector<nn::Sample<float>> batch_of(const nn::Architecture& arch, std::size_t n) {
  std::mt19937_64 rng(11);
  std::normal_distribution<float> nd;
  std::vector<nn::Sample<float>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].input.resize(nn::shape_size(arch.input));
    for (auto& v : out[i].input) v = nd(rng);
    out[i].aux.assign(arch.aux_len(), 0.5f);
    out[i].target = static_cast<int>(i % 7);
  }
  return out;
}

// Gradient throughput of the reference model; compare P=4 against P=1.
// Speedup needs as many free cores as partitions.
void BM_ParallelGradient(benchmark::State& state) {
  const auto arch = nn::Architecture::reference();
  const auto model = nn::Model<float>::init(arch, 1);
  const auto batch = batch_of(arch, 256);
  const auto p = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(pipeline::parallel_gradient<float>(model, batch, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_ParallelGradient)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
