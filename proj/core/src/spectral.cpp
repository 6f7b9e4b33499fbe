#include "neurospect/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>

#include "fft.hpp"
#include "neurospect/errors.hpp"

namespace neurospect::spectral {
namespace {

std::vector<double> taper(Taper kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (kind == Taper::hann) {
    // Periodic Hann, the usual choice for spectral estimation.
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                   static_cast<double>(n)));
    }
  }
  return w;
}

// Windowed, detrended spectra of every segment of one channel:
// result[seg * bins + k].
std::vector<std::complex<double>> segment_spectra(const SampledWindow& window, std::size_t channel,
                                                  const WelchConfig& cfg,
                                                  std::span<const double> w,
                                                  detail::RealFft& fft) {
  const std::size_t n = cfg.segment_len;
  const std::size_t count = cfg.segment_count(window.n_samples);
  const std::size_t bins = fft.bins();
  std::vector<std::complex<double>> out(count * bins);
  std::vector<double> seg(n);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t start = s * cfg.step();
    for (std::size_t i = 0; i < n; ++i) seg[i] = window.at(start + i, channel);
    if (cfg.detrend == Detrend::mean) {
      double mean = 0.0;
      for (double v : seg) mean += v;
      mean /= static_cast<double>(n);
      for (double& v : seg) v -= mean;
    }
    for (std::size_t i = 0; i < n; ++i) seg[i] *= w[i];
    fft.forward(seg, std::span(out).subspan(s * bins, bins));
  }
  return out;
}

std::vector<double> bin_freqs(std::size_t segment_len, double fs) {
  std::vector<double> f(segment_len / 2 + 1);
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = static_cast<double>(k) * fs / static_cast<double>(segment_len);
  }
  return f;
}

void check_bands_within(std::span<const FrequencyBand> bands, double nyquist) {
  validate_bands(bands);
  for (const auto& b : bands) {
    if (b.hi > nyquist + 1e-12) {
      throw InvalidArgument("band '" + b.name + "' exceeds the Nyquist frequency (" +
                            std::to_string(nyquist) + " Hz)");
    }
  }
}

}  // namespace

std::vector<double> SampledWindow::channel(std::size_t c) const {
  std::vector<double> out(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) out[i] = at(i, c);
  return out;
}

void validate_window(const SampledWindow& window) {
  if (!(window.fs > 0.0) || !std::isfinite(window.fs)) {
    throw InvalidArgument("sampling rate must be positive");
  }
  if (window.n_channels == 0 || window.n_samples == 0) {
    throw InvalidArgument("window has no samples or channels");
  }
  if (window.samples.size() != window.n_samples * window.n_channels) {
    throw ShapeError("window sample buffer does not match n_samples x n_channels");
  }
  if (window.electrodes.size() != window.n_channels) {
    throw InvalidArgument("electrode list length does not match channel count");
  }
  std::set<std::string> seen(window.electrodes.begin(), window.electrodes.end());
  if (seen.size() != window.electrodes.size()) {
    throw InvalidArgument("electrode names must be unique");
  }
  for (std::size_t i = 0; i < window.samples.size(); ++i) {
    if (!std::isfinite(window.samples[i])) {
      throw NumericError("non-finite sample at row " + std::to_string(i / window.n_channels) +
                         ", channel " + window.electrodes[i % window.n_channels]);
    }
  }
}

std::size_t WelchConfig::step() const {
  const auto hop = static_cast<std::size_t>(
      std::llround(static_cast<double>(segment_len) * (1.0 - overlap)));
  return std::max<std::size_t>(1, hop);
}

std::size_t WelchConfig::segment_count(std::size_t n_samples) const {
  if (n_samples < segment_len) return 0;
  return (n_samples - segment_len) / step() + 1;
}

void WelchConfig::validate() const {
  if (segment_len < 8) throw InvalidArgument("Welch segment length must be at least 8");
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw InvalidArgument("Welch overlap must be in [0, 1)");
  }
}

std::vector<FrequencyBand> six_bands() {
  return {{"delta", 0.5, 4.0},  {"theta", 4.0, 8.0},     {"alpha", 8.0, 12.0},
          {"beta", 12.0, 25.0}, {"highbeta", 25.0, 30.0}, {"gamma", 30.0, 45.0}};
}

std::vector<FrequencyBand> five_bands() {
  return {{"delta", 0.5, 4.0},
          {"theta", 4.0, 8.0},
          {"alpha", 8.0, 12.0},
          {"beta", 12.0, 30.0},
          {"gamma", 30.0, 45.0}};
}

void validate_bands(std::span<const FrequencyBand> bands) {
  if (bands.empty()) throw InvalidArgument("band list is empty");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const auto& b = bands[i];
    if (!(b.lo >= 0.0 && b.lo < b.hi)) {
      throw InvalidArgument("band '" + b.name + "' must satisfy 0 <= lo < hi");
    }
    if (i > 0 && b.lo < bands[i - 1].hi) {
      throw InvalidArgument("bands must be sorted and non-overlapping ('" + bands[i - 1].name +
                            "', '" + b.name + "')");
    }
  }
}

SpectralDensity welch_psd(const SampledWindow& window, const WelchConfig& cfg) {
  validate_window(window);
  cfg.validate();
  const std::size_t count = cfg.segment_count(window.n_samples);
  if (count == 0) {
    throw InvalidArgument("window of " + std::to_string(window.n_samples) +
                          " samples is shorter than one segment (" +
                          std::to_string(cfg.segment_len) + ")");
  }
  const std::size_t n = cfg.segment_len;
  const auto w = taper(cfg.window, n);
  double w_energy = 0.0;
  for (double v : w) w_energy += v * v;

  detail::RealFft fft(n);
  SpectralDensity out;
  out.freqs = bin_freqs(n, window.fs);
  out.n_channels = window.n_channels;
  out.bin_width = window.fs / static_cast<double>(n);
  const std::size_t bins = fft.bins();
  out.values.assign(window.n_channels * bins, 0.0);

  const double scale = 1.0 / (window.fs * w_energy * static_cast<double>(count));
  for (std::size_t c = 0; c < window.n_channels; ++c) {
    const auto spectra = segment_spectra(window, c, cfg, w, fft);
    double* dst = out.values.data() + c * bins;
    for (std::size_t s = 0; s < count; ++s) {
      for (std::size_t k = 0; k < bins; ++k) dst[k] += std::norm(spectra[s * bins + k]);
    }
    for (std::size_t k = 0; k < bins; ++k) {
      // Fold negative frequencies; DC and (for even n) Nyquist appear once.
      const bool single = k == 0 || (n % 2 == 0 && k == bins - 1);
      dst[k] *= scale * (single ? 1.0 : 2.0);
    }
  }
  return out;
}

BandPowerMatrix band_powers(const SpectralDensity& psd, std::span<const FrequencyBand> bands) {
  if (psd.freqs.empty()) throw InvalidArgument("empty spectral density");
  const double nyquist = psd.freqs.back();
  check_bands_within(bands, nyquist);
  BandPowerMatrix out;
  out.n_bands = bands.size();
  out.n_channels = psd.n_channels;
  out.values.assign(out.n_bands * out.n_channels, 0.0);
  for (std::size_t b = 0; b < bands.size(); ++b) {
    for (std::size_t c = 0; c < psd.n_channels; ++c) {
      const auto density = psd.channel(c);
      double sum = 0.0;
      for (std::size_t k = 0; k < psd.n_bins(); ++k) {
        const double f = psd.freqs[k];
        if (f >= bands[b].lo && f < bands[b].hi) sum += density[k] * psd.bin_width;
      }
      out.at(b, c) = sum;
    }
  }
  return out;
}

std::size_t CoherenceTensor::pair_index(std::size_t i, std::size_t j, std::size_t n_channels) {
  if (i == j || i >= n_channels || j >= n_channels) {
    throw InvalidArgument("invalid electrode pair");
  }
  if (i > j) std::swap(i, j);
  // Pairs (0,1) (0,2) ... (0,n-1) (1,2) ... in row order of the upper triangle.
  return i * n_channels - i * (i + 1) / 2 + (j - i - 1);
}

CoherenceTensor msc_coherence(const SampledWindow& window, const WelchConfig& cfg,
                              std::span<const FrequencyBand> bands) {
  validate_window(window);
  cfg.validate();
  const std::size_t count = cfg.segment_count(window.n_samples);
  if (count < 2) {
    throw InvalidArgument("coherence needs at least 2 Welch segments, got " +
                          std::to_string(count));
  }
  if (window.n_channels < 2) throw InvalidArgument("coherence needs at least 2 channels");
  const std::size_t n = cfg.segment_len;
  const auto freqs = bin_freqs(n, window.fs);
  check_bands_within(bands, freqs.back());

  // Bin index ranges per band.
  std::vector<std::vector<std::size_t>> band_bins(bands.size());
  for (std::size_t b = 0; b < bands.size(); ++b) {
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      if (freqs[k] >= bands[b].lo && freqs[k] < bands[b].hi) band_bins[b].push_back(k);
    }
    if (band_bins[b].empty()) {
      throw InvalidArgument("band '" + bands[b].name + "' contains no frequency bins");
    }
  }

  const auto w = taper(cfg.window, n);
  detail::RealFft fft(n);
  const std::size_t bins = fft.bins();
  const std::size_t channels = window.n_channels;

  std::vector<std::vector<std::complex<double>>> spectra(channels);
  std::vector<double> auto_spec(channels * bins, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    spectra[c] = segment_spectra(window, c, cfg, w, fft);
    for (std::size_t s = 0; s < count; ++s) {
      for (std::size_t k = 0; k < bins; ++k) {
        auto_spec[c * bins + k] += std::norm(spectra[c][s * bins + k]);
      }
    }
  }

  CoherenceTensor out;
  out.n_bands = bands.size();
  out.n_channels = channels;
  const std::size_t pairs = CoherenceTensor::pair_count(channels);
  out.values.assign(out.n_bands * pairs, 0.0);

  for (std::size_t i = 0; i < channels; ++i) {
    for (std::size_t j = i + 1; j < channels; ++j) {
      const std::size_t p = CoherenceTensor::pair_index(i, j, channels);
      for (std::size_t b = 0; b < bands.size(); ++b) {
        double acc = 0.0;
        bool zero_power = false;
        for (std::size_t k : band_bins[b]) {
          std::complex<double> cross{0.0, 0.0};
          for (std::size_t s = 0; s < count; ++s) {
            cross += spectra[i][s * bins + k] * std::conj(spectra[j][s * bins + k]);
          }
          const double denom = auto_spec[i * bins + k] * auto_spec[j * bins + k];
          if (denom <= 0.0) {
            zero_power = true;
            continue;
          }
          acc += std::clamp(std::norm(cross) / denom, 0.0, 1.0);
        }
        if (zero_power) {
          out.warnings.push_back("zero power in band '" + bands[b].name + "' for pair " +
                                 window.electrodes[i] + "-" + window.electrodes[j] +
                                 "; coherence set to 0 on those bins");
        }
        out.values[b * pairs + p] = acc / static_cast<double>(band_bins[b].size());
      }
    }
  }
  return out;
}

}  // namespace neurospect::spectral
