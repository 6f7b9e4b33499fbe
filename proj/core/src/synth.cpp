#include <cmath>
#include <complex>
#include <random>

#include "fft.hpp"
#include "neurospect/errors.hpp"
#include "neurospect/spectral.hpp"

namespace neurospect::spectral {

ClassProfile ClassProfile::uniform(std::size_t n_channels, double coherence) {
  ClassProfile p;
  CouplingGroup g;
  g.coherence = coherence;
  for (std::size_t c = 0; c < n_channels; ++c) g.channels.push_back(c);
  p.groups.push_back(std::move(g));
  return p;
}

SampledWindow synth_eeg(const ClassProfile& profile, double duration_s, double fs,
                        std::uint64_t seed, const std::vector<std::string>& electrodes) {
  if (!(duration_s > 0.0)) throw InvalidArgument("synthetic duration must be positive");
  if (!(fs > 0.0)) throw InvalidArgument("sampling rate must be positive");
  if (electrodes.empty()) throw InvalidArgument("no electrodes given");
  validate_bands(profile.bands);
  if (profile.band_scale.size() != profile.bands.size()) {
    throw InvalidArgument("band_scale must have one entry per band");
  }
  for (double s : profile.band_scale) {
    if (!(s >= 0.0)) throw InvalidArgument("band scales must be non-negative");
  }
  const std::size_t channels = electrodes.size();
  std::vector<int> group_of(channels, -1);
  for (std::size_t g = 0; g < profile.groups.size(); ++g) {
    const auto& group = profile.groups[g];
    if (!(group.coherence >= 0.0 && group.coherence <= 1.0)) {
      throw InvalidArgument("target coherence must lie in [0, 1]");
    }
    for (std::size_t c : group.channels) {
      if (c >= channels) throw InvalidArgument("coupling group references unknown channel");
      if (group_of[c] != -1) throw InvalidArgument("channel belongs to two coupling groups");
      group_of[c] = static_cast<int>(g);
    }
  }

  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  if (n < 16) throw InvalidArgument("synthetic window too short");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto white = [&] {
    std::vector<double> v(n);
    for (double& x : v) x = normal(rng);
    return v;
  };

  std::vector<std::vector<double>> sources;
  for (std::size_t g = 0; g < profile.groups.size(); ++g) sources.push_back(white());

  detail::RealFft fft(n);
  std::vector<double> gain(fft.bins());
  for (std::size_t k = 0; k < gain.size(); ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    double scale = profile.out_of_band_scale;
    for (std::size_t b = 0; b < profile.bands.size(); ++b) {
      if (f >= profile.bands[b].lo && f < profile.bands[b].hi) scale = profile.band_scale[b];
    }
    gain[k] = std::sqrt(scale) * profile.amplitude_uv / static_cast<double>(n);
  }

  SampledWindow out;
  out.n_samples = n;
  out.n_channels = channels;
  out.fs = fs;
  out.electrodes = electrodes;
  out.samples.assign(n * channels, 0.0);

  std::vector<std::complex<double>> spectrum(fft.bins());
  std::vector<double> shaped(n);
  for (std::size_t c = 0; c < channels; ++c) {
    auto x = white();
    if (group_of[c] >= 0) {
      const double r = std::sqrt(profile.groups[group_of[c]].coherence);
      const double a = std::sqrt(1.0 - r);
      const double b = std::sqrt(r);
      const auto& s = sources[group_of[c]];
      for (std::size_t i = 0; i < n; ++i) x[i] = a * x[i] + b * s[i];
    }
    fft.forward(x, spectrum);
    for (std::size_t k = 0; k < spectrum.size(); ++k) spectrum[k] *= gain[k];
    fft.inverse(spectrum, shaped);
    for (std::size_t i = 0; i < n; ++i) out.samples[i * channels + c] = shaped[i];
  }
  return out;
}

}  // namespace neurospect::spectral
