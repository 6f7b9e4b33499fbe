#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace neurospect::spectral {

/// Multichannel EEG segment. Samples are stored row-major
/// (n_samples x n_channels) in microvolts.
struct SampledWindow {
  std::size_t n_samples = 0;
  std::size_t n_channels = 0;
  std::vector<double> samples;
  double fs = 0.0;
  std::vector<std::string> electrodes;

  double at(std::size_t sample, std::size_t channel) const {
    return samples[sample * n_channels + channel];
  }
  std::vector<double> channel(std::size_t c) const;
};

/// Throws InvalidArgument / NumericError when the window is malformed.
void validate_window(const SampledWindow& window);

enum class Taper { hann, rectangular };
enum class Detrend { none, mean };

struct WelchConfig {
  std::size_t segment_len = 256;
  double overlap = 0.5;
  Taper window = Taper::hann;
  Detrend detrend = Detrend::mean;

  std::size_t step() const;
  /// Number of full segments that fit in n_samples (0 if none).
  std::size_t segment_count(std::size_t n_samples) const;
  void validate() const;
};

/// [lo, hi) in Hz.
struct FrequencyBand {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

/// delta 0.5-4, theta 4-8, alpha 8-12, beta 12-25, highbeta 25-30, gamma 30-45.
std::vector<FrequencyBand> six_bands();
/// Same edges with beta spanning 12-30 and no highbeta band.
std::vector<FrequencyBand> five_bands();
/// Sorted, non-overlapping, 0 <= lo < hi.
void validate_bands(std::span<const FrequencyBand> bands);

/// One-sided power density per channel (uV^2/Hz).
struct SpectralDensity {
  std::vector<double> freqs;
  std::size_t n_channels = 0;
  double bin_width = 0.0;
  std::vector<double> values;  // [channel * n_bins + bin]

  std::size_t n_bins() const { return freqs.size(); }
  std::span<const double> channel(std::size_t c) const {
    return {values.data() + c * n_bins(), n_bins()};
  }
};

/// Welch averaged periodogram. The density integrates (sum * bin_width) to
/// the signal variance.
SpectralDensity welch_psd(const SampledWindow& window, const WelchConfig& cfg);

/// Integrated band power per band and channel (uV^2).
struct BandPowerMatrix {
  std::size_t n_bands = 0;
  std::size_t n_channels = 0;
  std::vector<double> values;  // [band * n_channels + channel]

  double at(std::size_t band, std::size_t channel) const {
    return values[band * n_channels + channel];
  }
  double& at(std::size_t band, std::size_t channel) {
    return values[band * n_channels + channel];
  }
};

BandPowerMatrix band_powers(const SpectralDensity& psd,
                            std::span<const FrequencyBand> bands);

/// Band-averaged magnitude-squared coherence for every unordered electrode
/// pair (i < j), stored once per pair.
struct CoherenceTensor {
  std::size_t n_bands = 0;
  std::size_t n_channels = 0;
  std::vector<double> values;  // [band * pair_count + pair_index]
  std::vector<std::string> warnings;

  static std::size_t pair_count(std::size_t n_channels) {
    return n_channels * (n_channels - 1) / 2;
  }
  /// Index of the unordered pair {i, j}, i != j, in canonical order.
  static std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n_channels);

  std::size_t pairs() const { return pair_count(n_channels); }
  double at(std::size_t band, std::size_t i, std::size_t j) const {
    return values[band * pairs() + pair_index(i, j, n_channels)];
  }
};

/// C(f) = |<Sxy>|^2 / (<Sxx><Syy>) per bin, averaged over the band's bins.
/// Bins where either auto-spectrum is zero contribute 0 and add a warning.
CoherenceTensor msc_coherence(const SampledWindow& window, const WelchConfig& cfg,
                              std::span<const FrequencyBand> bands);

/// Channels sharing a coupling group are mixed with one common source so
/// that their pairwise magnitude-squared coherence equals `coherence`.
struct CouplingGroup {
  std::vector<std::size_t> channels;
  double coherence = 0.0;
};

struct ClassProfile {
  std::vector<FrequencyBand> bands = six_bands();
  /// Relative power per band; all channels share this spectral shape.
  std::vector<double> band_scale = {20.0, 10.0, 8.0, 3.0, 2.0, 1.0};
  /// Gain applied outside every band.
  double out_of_band_scale = 0.25;
  double amplitude_uv = 10.0;
  std::vector<CouplingGroup> groups;

  /// Every channel in one group with the given coherence.
  static ClassProfile uniform(std::size_t n_channels, double coherence);
};

/// Deterministic synthetic EEG with controllable coherence. Channel i of a
/// group is sqrt(1-r) n_i + sqrt(r) s with r = sqrt(c), so the expected
/// magnitude-squared coherence between two group members is c.
SampledWindow synth_eeg(const ClassProfile& profile, double duration_s, double fs,
                        std::uint64_t seed, const std::vector<std::string>& electrodes);

}  // namespace neurospect::spectral
