#include <benchmark/benchmark.h>

#include <random>

#include "neurospect/montage.hpp"
#include "neurospect/spectral.hpp"

using namespace neurospect;

namespace {

spectral::SampledWindow montage_noise(double seconds) {
  spectral::SampledWindow w;
  w.fs = 128.0;
  w.n_samples = static_cast<std::size_t>(seconds * w.fs);
  w.n_channels = kMontage.size();
  for (auto e : kMontage) w.electrodes.emplace_back(e);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  w.samples.resize(w.n_samples * w.n_channels);
  for (auto& v : w.samples) v = nd(rng);
  return w;
}

void BM_WelchPsd(benchmark::State& state) {
  const auto w = montage_noise(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(spectral::welch_psd(w, {}));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_WelchPsd)->Arg(16)->Arg(60)->Unit(benchmark::kMillisecond);

// 171 channel pairs x 6 bands.
void BM_Coherence(benchmark::State& state) {
  const auto w = montage_noise(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(spectral::msc_coherence(w, {}, spectral::six_bands()));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Coherence)->Arg(16)->Arg(60)->Unit(benchmark::kMillisecond);

}  // namespace
