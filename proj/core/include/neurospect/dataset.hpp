#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "neurospect/montage.hpp"
#include "neurospect/preprocess.hpp"
#include "neurospect/spectral.hpp"

namespace neurospect::dataset {

inline constexpr std::size_t kNumClasses = 7;

/// Codes follow lexicographic order of the label names.
enum class DisorderLabel : int {
  addictive = 0,
  anxiety = 1,
  healthy_control = 2,
  mood = 3,
  obsessive_compulsive = 4,
  schizophrenia = 5,
  trauma_stress = 6,
};

std::string_view label_name(DisorderLabel label);
/// Accepts the canonical names case-insensitively, treating '-' and ' ' alike
/// ("Obsessive compulsive disorder" parses). Throws DataError otherwise.
DisorderLabel parse_label(std::string_view text);
std::vector<std::string> disorder_domain();
inline int label_code(DisorderLabel l) { return static_cast<int>(l); }
inline DisorderLabel label_from_code(int code) { return static_cast<DisorderLabel>(code); }

enum class Sex { female, male };
std::string_view sex_name(Sex s);
/// M/F/male/female (case-insensitive); throws DataError otherwise.
Sex parse_sex(std::string_view text);

struct Demographics {
  std::optional<double> age;
  std::optional<Sex> sex;
  std::optional<double> education;
  std::optional<double> iq;

  /// age in (0, 120], education >= 0, iq in (0, 250] when present.
  void validate() const;
};

inline constexpr std::size_t kDemographicCount = 4;
inline constexpr std::array<std::string_view, kDemographicCount> kDemographicColumns = {
    "age", "sex", "education", "iq"};
inline constexpr std::string_view kLabelColumn = "main.disorder";
inline constexpr std::string_view kIdColumn = "id";

enum class FeatureMode { full, psd_only };
std::string_view mode_name(FeatureMode m);
FeatureMode parse_mode(std::string_view text);

std::string psd_feature_name(std::string_view band, std::string_view electrode);
std::string coh_feature_name(std::string_view band, std::string_view e1, std::string_view e2);

/// Canonical EEG feature layout: psd.<band>.<electrode> band-major in
/// montage order, then coh.<band>.<e1>.<e2> band-major over pairs e1 < e2 in
/// montage order. This order is the vector layout everywhere downstream.
struct FeatureSchema {
  FeatureMode mode = FeatureMode::full;
  std::vector<spectral::FrequencyBand> bands = spectral::six_bands();
  std::vector<std::string> electrodes = montage_electrodes();

  std::size_t psd_count() const { return bands.size() * electrodes.size(); }
  std::size_t coh_count() const;
  std::vector<std::string> psd_names() const;
  std::vector<std::string> coh_names() const;
  std::vector<std::string> feature_names() const;
  /// SHA-256 (hex) over mode, band edges, and feature names.
  std::string fingerprint() const;

  nlohmann::json to_json() const;
  static FeatureSchema from_json(const nlohmann::json& j);
};

/// Missing EEG feature values parsed from a table are stored as NaN and are
/// imputed downstream.
struct SubjectRecord {
  std::string id;
  Demographics demographics;
  spectral::BandPowerMatrix psd;
  std::optional<spectral::CoherenceTensor> coherence;
  DisorderLabel label = DisorderLabel::healthy_control;
};

struct Dataset {
  FeatureSchema schema;
  /// Demographic columns present in the source (subset of kDemographicColumns).
  std::vector<std::string> demographic_columns;
  std::vector<SubjectRecord> records;
};

/// `external_name = canonical_name` per line; '#' starts a comment.
class AdapterMap {
 public:
  static AdapterMap parse(std::string_view text);
  static AdapterMap load(const std::filesystem::path& path);

  std::string map(const std::string& external) const;
  std::size_t size() const { return map_.size(); }

 private:
  std::map<std::string, std::string> map_;
};

/// Reads a feature table. Columns are renamed through the adapter, then
/// matched by canonical name; unknown columns are ignored. Empty, "NA" and
/// "nan" cells are missing.
Dataset parse_feature_table(const std::filesystem::path& path, FeatureMode mode,
                            const AdapterMap& adapter = {},
                            std::vector<spectral::FrequencyBand> bands = spectral::six_bands());
Dataset parse_feature_text(std::string_view text, FeatureMode mode, const AdapterMap& adapter = {},
                           std::vector<spectral::FrequencyBand> bands = spectral::six_bands());

/// Canonical writer: id, demographics, label, then features in schema order.
void write_feature_table(const std::filesystem::path& path, const Dataset& data);
std::string format_feature_table(const Dataset& data);

/// Raw EEG CSV: header `time,<electrode>,...` with the full montage in
/// canonical order.
spectral::SampledWindow read_raw_eeg_csv(const std::filesystem::path& path, double fs);
void write_raw_eeg_csv(const std::filesystem::path& path, const spectral::SampledWindow& window);

struct ExtractionConfig {
  spectral::WelchConfig welch;
  std::vector<spectral::FrequencyBand> bands = spectral::six_bands();
  FeatureMode mode = FeatureMode::full;
};

/// Band power (and coherence in full mode) of one raw window.
SubjectRecord record_from_window(const spectral::SampledWindow& window,
                                 const ExtractionConfig& cfg, std::string id,
                                 Demographics demographics, DisorderLabel label);

/// Dense numeric row: [age, sex, education, iq | log10 band power | coherence].
/// Missing values are NaN; sex is 0 (female) / 1 (male).
std::vector<double> feature_row(const SubjectRecord& record, const FeatureSchema& schema);
std::size_t feature_row_width(const FeatureSchema& schema);

/// CNN input: bands x electrodes x electrodes grid plus scaled demographics.
struct SubjectTensor {
  std::size_t n_bands = 0;
  std::size_t n_channels = 0;
  std::vector<double> grid;  // [band][i][j]
  std::array<double, kDemographicCount> demographics{};

  double at(std::size_t b, std::size_t i, std::size_t j) const {
    return grid[(b * n_channels + i) * n_channels + j];
  }
};

/// Preprocessing state fitted on a training split: outlier fences, missing
/// value fills, demographic min-max scaler, and band-power scaler.
class FeatureTransform {
 public:
  static FeatureTransform fit(const std::vector<std::vector<double>>& train_rows,
                              const FeatureSchema& schema,
                              const std::vector<std::string>& demographic_columns,
                              const preprocess::PreprocessConfig& cfg);

  /// Outlier treatment and imputation only.
  std::vector<double> clean(std::span<const double> row) const;
  /// clean() followed by scaling; coherence passes through unchanged.
  std::vector<double> apply(std::span<const double> row) const;

  const FeatureSchema& schema() const { return schema_; }
  const std::vector<double>& fill_values() const { return fill_; }
  const preprocess::ScalerParams& demographic_scaler() const { return demographic_scaler_; }
  const preprocess::ScalerParams& power_scaler() const { return power_scaler_; }
  /// Number of training rows the transform was fitted on.
  std::size_t fitted_rows() const { return fitted_rows_; }

  nlohmann::json to_json() const;
  static FeatureTransform from_json(const nlohmann::json& j);

 private:
  FeatureSchema schema_;
  preprocess::OutlierPolicy::Action outlier_action_ = preprocess::OutlierPolicy::Action::clip_to_fence;
  std::vector<std::optional<preprocess::OutlierFences>> fences_;
  std::vector<double> fill_;
  preprocess::ScalerParams demographic_scaler_{preprocess::ScaleMode::minmax};
  preprocess::ScalerParams power_scaler_{preprocess::ScaleMode::zscore};
  std::size_t fitted_rows_ = 0;
};

/// Builds the grid from an already transformed row. Off-diagonal entries are
/// coherence when include_coherence is set and exactly 0 otherwise.
SubjectTensor tensor_from_row(std::span<const double> scaled_row, const FeatureSchema& schema,
                              bool include_coherence);

/// Throws InvalidArgument when include_coherence is set and the record has
/// no coherence.
SubjectTensor assemble_tensor(const SubjectRecord& record, bool include_coherence,
                              const FeatureTransform& transform);

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  std::size_t missing = 0;

  /// Values below the first edge land in the first bin, values at or above
  /// the last edge in the last bin.
  void add(std::optional<double> v);
  std::vector<double> fractions() const;
  nlohmann::json to_json() const;
};

struct DatasetSummary {
  std::size_t n_records = 0;
  std::map<std::string, std::size_t> class_counts;
  Histogram age_hist;
  Histogram iq_hist;
  Histogram education_hist;
  std::map<std::string, std::map<std::string, std::size_t>> sex_by_class;
  /// band -> region -> mean band power over records and region electrodes.
  std::map<std::string, std::map<std::string, double>> band_region_power;
  /// One example subject per class (first occurrence), as named features.
  nlohmann::json exemplars = nlohmann::json::array();

  nlohmann::json to_json() const;
};

DatasetSummary summarize_dataset(const Dataset& data);

}  // namespace neurospect::dataset
