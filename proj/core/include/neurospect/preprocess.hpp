#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace neurospect::preprocess {

// Missing numeric values are represented as quiet NaN throughout this module.

struct OutlierPolicy {
  enum class Method { zscore, iqr };
  enum class Action { clip_to_fence, mark_missing };

  Method method = Method::zscore;
  double threshold = 3.0;  // zscore
  double k = 1.5;          // iqr
  Action action = Action::clip_to_fence;

  void validate() const;
};

/// Values strictly outside [lo, hi] are outliers.
struct OutlierFences {
  double lo = 0.0;
  double hi = 0.0;
};

struct OutlierResult {
  std::vector<bool> flags;
  std::vector<double> treated;
  OutlierFences fences;
};

/// Fences from the non-missing values: mean +/- t * sigma (population sigma)
/// or Q1 - k*IQR, Q3 + k*IQR (linearly interpolated quartiles).
OutlierFences fit_outlier_fences(std::span<const double> values, const OutlierPolicy& policy);
/// Flags and treats values against previously fitted fences.
OutlierResult apply_outlier_fences(std::span<const double> values, const OutlierFences& fences,
                                   OutlierPolicy::Action action);
/// fit_outlier_fences followed by apply_outlier_fences.
OutlierResult detect_outliers(std::span<const double> values, const OutlierPolicy& policy);

/// Quantile by linear interpolation between order statistics:
/// q(p) = x[floor(h)] + (h - floor(h)) (x[floor(h)+1] - x[floor(h)]), h = (n-1) p.
double quantile(std::vector<double> sorted_or_not, double p);

double mean_of_observed(std::span<const double> values);
std::string mode_of_observed(std::span<const std::optional<std::string>> values);

std::vector<double> impute_numeric(std::span<const double> values);
std::vector<std::string> impute_categorical(std::span<const std::optional<std::string>> values);

/// Label <-> code bijection; codes follow lexicographic order of the domain.
class EncoderMap {
 public:
  EncoderMap() = default;
  /// Domain given explicitly (e.g. the closed disorder set).
  static EncoderMap from_domain(std::vector<std::string> domain);
  /// Domain taken from the observed values.
  static EncoderMap fit(std::span<const std::string> values);

  int encode(const std::string& label) const;
  const std::string& decode(int code) const;
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  nlohmann::json to_json() const;
  static EncoderMap from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> labels_;
};

struct EncodedLabels {
  std::vector<int> codes;
  EncoderMap map;
};
EncodedLabels encode_labels(std::span<const std::string> labels,
                            std::vector<std::string> domain = {});

enum class ScaleMode { minmax, zscore };

/// Per-feature affine scaling learned from a training matrix.
/// minmax: (x - min) / (max - min); zscore: (x - mean) / std (sample std).
/// Constant features map to 0.
class ScalerParams {
 public:
  explicit ScalerParams(ScaleMode mode = ScaleMode::minmax) : mode_(mode) {}

  /// rows: each row is one sample with the same number of features.
  void fit(const std::vector<std::vector<double>>& rows);
  std::vector<double> apply(std::span<const double> row) const;
  void apply_in_place(std::span<double> row) const;
  std::vector<std::vector<double>> apply(const std::vector<std::vector<double>>& rows) const;

  bool fitted() const { return fitted_; }
  ScaleMode mode() const { return mode_; }
  std::size_t width() const { return offset_.size(); }
  const std::vector<double>& offset() const { return offset_; }
  const std::vector<double>& divisor() const { return divisor_; }
  /// Indices of features with zero spread in the training data.
  const std::vector<std::size_t>& constant_features() const { return constant_; }

  nlohmann::json to_json() const;
  static ScalerParams from_json(const nlohmann::json& j);

 private:
  ScaleMode mode_;
  bool fitted_ = false;
  std::vector<double> offset_;
  std::vector<double> divisor_;  // 0 marks a constant feature
  std::vector<std::size_t> constant_;
};

/// Numeric rows with integer class labels.
struct LabeledRows {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

struct ResamplePolicy {
  enum class Method { smote, undersample, none };
  Method method = Method::smote;
  int k = 5;
  std::uint64_t seed = 7;
};

/// a + lambda (b - a).
std::vector<double> smote_point(std::span<const double> a, std::span<const double> b,
                                double lambda);

/// Equalizes class counts. SMOTE appends synthetic minority rows after the
/// originals; undersampling keeps the original relative order.
LabeledRows resample(const LabeledRows& data, const ResamplePolicy& policy);

struct SplitSpec {
  double train_fraction = 0.8;
  bool stratified = true;
  std::uint64_t seed = 42;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per class: floor(fraction * n_c) to train; the remaining
/// round(fraction * N) - sum(floors) slots go to the classes with the largest
/// fractional parts (ties to the lower class code). Members are drawn from a
/// seeded permutation of each class; both outputs are sorted ascending.
/// Throws if any class has fewer than 2 members.
SplitIndices stratified_split(std::span<const int> labels, const SplitSpec& spec);

/// Same allocation rule, but singleton classes go entirely to train.
SplitIndices holdout_split(std::span<const int> labels, double train_fraction,
                           std::uint64_t seed);

/// Preprocessing configuration document.
struct PreprocessConfig {
  OutlierPolicy outliers;
  bool outliers_on_eeg = false;
  ScaleMode scale = ScaleMode::zscore;  // applied to log band power
  ResamplePolicy resample;
  SplitSpec split;

  static PreprocessConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

}  // namespace neurospect::preprocess
