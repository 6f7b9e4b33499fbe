#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "neurospect/dataset.hpp"
#include "neurospect/montage.hpp"
#include "neurospect/spectral.hpp"
#include "neurospect/synthetic.hpp"

namespace neurospect::testing {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("neurospect-test-" + std::to_string(rd()) + "-" + std::to_string(++counter));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path source_dir() { return NEUROSPECT_SOURCE_DIR; }

/// Column names as they appear in the public psychiatric EEG table:
/// AB.<letter>.<band>.a.<ELECTRODE> for band power and
/// COH.<letter>.<band>.a.<E1>.b.<E2> for coherence, FP1/FP2 upper-cased.
inline std::string kaggle_electrode(std::string_view e) {
  if (e == "Fp1") return "FP1";
  if (e == "Fp2") return "FP2";
  return std::string(e);
}

inline std::vector<std::string> kaggle_header() {
  const char* letters = "ABCDEF";
  const auto bands = spectral::six_bands();
  std::vector<std::string> h = {"no.", "sex", "age", "eeg.date", "education", "IQ",
                                "main.disorder", "specific.disorder"};
  for (std::size_t b = 0; b < bands.size(); ++b) {
    for (auto e : kMontage) {
      h.push_back(std::string("AB.") + letters[b] + "." + bands[b].name + ".a." + kaggle_electrode(e));
    }
  }
  h.push_back("");  // the source table has one unnamed separator column
  for (std::size_t b = 0; b < bands.size(); ++b) {
    for (std::size_t i = 0; i < kMontage.size(); ++i) {
      for (std::size_t j = i + 1; j < kMontage.size(); ++j) {
        h.push_back(std::string("COH.") + letters[b] + "." + bands[b].name + ".a." +
                    kaggle_electrode(kMontage[i]) + ".b." + kaggle_electrode(kMontage[j]));
      }
    }
  }
  return h;
}

/// Kaggle-shaped table with synthetic values.
inline std::string kaggle_fixture(std::size_t rows, std::uint64_t seed = 1) {
  static const char* labels[] = {"Addictive disorder", "Anxiety disorder", "Healthy control",
                                 "Mood disorder", "Obsessive compulsive disorder", "Schizophrenia",
                                 "Trauma and stress related disorder"};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> power(1.0, 60.0);
  std::uniform_real_distribution<double> coh(0.0, 1.0);
  std::uniform_real_distribution<double> age(18.0, 70.0);
  const auto header = kaggle_header();
  std::ostringstream out;
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << "\n";
  for (std::size_t r = 0; r < rows; ++r) {
    out << r + 1 << "," << (r % 2 ? "M" : "F") << "," << age(rng) << ",2012.8.30,"
        << (r % 5 == 0 ? std::string() : std::to_string(10 + r % 8)) << ","
        << (r % 7 == 0 ? std::string() : std::to_string(90 + r % 30)) << "," << labels[r % 7]
        << ",specific,";
    for (std::size_t k = 0; k < 114; ++k) out << power(rng) << ",";
    out << ",";
    for (std::size_t k = 0; k < 1026; ++k) out << (k ? "," : "") << coh(rng);
    out << "\n";
  }
  return out.str();
}

/// 115 columns: the label plus 114 band powers in canonical names.
inline std::string psd_only_fixture(std::size_t rows, std::uint64_t seed = 2) {
  static const char* labels[] = {"Healthy control", "Mood disorder", "Schizophrenia"};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> power(1.0, 60.0);
  dataset::FeatureSchema schema;
  schema.mode = dataset::FeatureMode::psd_only;
  std::ostringstream out;
  out << "main.disorder";
  for (const auto& n : schema.psd_names()) out << "," << n;
  out << "\n";
  for (std::size_t r = 0; r < rows; ++r) {
    out << labels[r % 3];
    for (std::size_t k = 0; k < 114; ++k) out << "," << power(rng);
    out << "\n";
  }
  return out.str();
}

inline synthetic::CohortConfig small_cohort(std::size_t per_class = 20, std::size_t n_classes = 3,
                                            double duration_s = 24.0) {
  synthetic::CohortConfig cfg;
  cfg.subjects_per_class = per_class;
  cfg.duration_s = duration_s;
  cfg.classes.clear();
  const dataset::DisorderLabel order[] = {
      dataset::DisorderLabel::healthy_control, dataset::DisorderLabel::mood,
      dataset::DisorderLabel::schizophrenia,   dataset::DisorderLabel::anxiety,
      dataset::DisorderLabel::addictive,       dataset::DisorderLabel::obsessive_compulsive,
      dataset::DisorderLabel::trauma_stress};
  for (std::size_t c = 0; c < n_classes; ++c) cfg.classes.push_back(order[c]);
  return cfg;
}

inline spectral::SampledWindow noise_window(std::size_t n_channels, std::size_t n_samples,
                                            double fs, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  spectral::SampledWindow w;
  w.n_samples = n_samples;
  w.n_channels = n_channels;
  w.fs = fs;
  for (std::size_t c = 0; c < n_channels; ++c) w.electrodes.push_back("ch" + std::to_string(c));
  w.samples.resize(n_samples * n_channels);
  for (auto& v : w.samples) v = nd(rng);
  return w;
}

}  // namespace neurospect::testing
