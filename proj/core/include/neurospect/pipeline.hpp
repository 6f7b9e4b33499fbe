#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neurospect/dataset.hpp"
#include "neurospect/metrics.hpp"
#include "neurospect/nn.hpp"
#include "neurospect/preprocess.hpp"

namespace neurospect::pipeline {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t workers = 4;
  /// Early stopping on validation loss.
  std::size_t patience = 10;
  /// lr <- lr * lr_decay after this many epochs without improvement.
  std::size_t lr_patience = 5;
  double lr_decay = 0.5;
  double validation_fraction = 0.1;
  std::uint64_t seed = 42;
  bool include_coherence = true;
  preprocess::PreprocessConfig preprocess;
  /// Hidden layers; the input shape always comes from the feature schema.
  /// Empty means the reference architecture.
  std::vector<nn::LayerSpec> layers;

  /// epochs >= 1, batch_size >= 1, 1 <= workers <= batch_size, lr > 0,
  /// validation_fraction in [0, 0.5].
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Architecture for a schema: input (bands, electrodes, electrodes), four
/// demographic aux inputs, n_classes outputs.
nn::Architecture architecture_for(const dataset::FeatureSchema& schema, std::size_t n_classes,
                                  const std::vector<nn::LayerSpec>& layers = {});

template <typename T>
struct GradientResult {
  nn::Gradients<T> grads;  // averaged over the batch
  double loss_sum = 0.0;
  std::size_t correct = 0;
};

/// Splits the batch into `workers` contiguous partitions, sums each
/// partition's gradients on its own thread, adds the partition sums in
/// partition order, and divides by the batch size. Throws InvalidArgument
/// when workers is 0 or exceeds the batch size.
template <typename T>
GradientResult<T> parallel_gradient(const nn::Model<T>& model,
                                    std::span<const nn::Sample<T>* const> batch,
                                    std::size_t workers);
template <typename T>
GradientResult<T> parallel_gradient(const nn::Model<T>& model,
                                    std::span<const nn::Sample<T>> batch, std::size_t workers);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  nlohmann::json to_json() const;
};

struct LoopResult {
  nn::Model<float> model;
  TrainHistory history;
};

/// Mini-batch Adam with per-epoch reshuffling, step-decay learning rate and
/// early stopping; the returned model holds the best-validation weights.
/// With an empty validation set the training loss is monitored instead.
LoopResult train_loop(nn::Model<float> model, const std::vector<nn::Sample<float>>& train,
                      const std::vector<nn::Sample<float>>& val, const TrainConfig& cfg);

/// Mean loss and accuracy of a model on samples.
std::pair<double, double> loss_and_accuracy(const nn::Model<float>& model,
                                            const std::vector<nn::Sample<float>>& samples);

/// Train/validation/test preparation shared by training and the ablation.
/// Outlier fences, fills and scalers are fitted on the fit subset (train
/// minus validation) only; resampling touches only that subset.
struct PreparedData {
  dataset::FeatureSchema schema;
  std::vector<std::string> demographic_columns;
  preprocess::EncoderMap encoder;
  dataset::FeatureTransform transform;
  std::vector<std::size_t> fit_records;  // indices into the dataset
  std::vector<std::size_t> val_records;
  std::vector<std::size_t> test_records;
  preprocess::LabeledRows fit_rows;      // scaled and resampled
  preprocess::LabeledRows val_rows;      // scaled
  preprocess::LabeledRows test_rows;     // scaled
};

/// Throws DataError("degenerate class counts ...") when fewer than two
/// classes are present or a class is too small to split.
PreparedData prepare(const dataset::Dataset& data, const TrainConfig& cfg);

/// Throws StateError when preprocessing state could have seen validation or
/// test rows.
void check_no_leakage(const PreparedData& prepared);

std::vector<nn::Sample<float>> to_samples(const preprocess::LabeledRows& rows,
                                          const dataset::FeatureSchema& schema,
                                          bool include_coherence);

struct Prediction {
  int code = 0;
  std::string label;
  std::vector<float> probabilities;
  bool coherence_ablated = false;
};

/// Self-contained trained model.
struct ModelArtifact {
  static constexpr int kFormatVersion = 1;

  std::string created;
  dataset::FeatureSchema schema;
  std::vector<std::string> demographic_columns;
  nn::Model<float> model;
  dataset::FeatureTransform transform;
  preprocess::EncoderMap encoder;
  TrainConfig config;
  std::vector<std::string> test_ids;
  std::optional<metrics::EvaluationReport> report;

  std::string fingerprint() const { return schema.fingerprint(); }
  /// CRC-32 (hex) of the serialized payload.
  std::string version_id() const;

  /// Missing coherence, or a model trained without it, gives zero
  /// off-diagonal entries; the former is flagged in the result.
  Prediction predict(const dataset::SubjectRecord& record) const;

  nlohmann::json payload() const;
  static ModelArtifact from_payload(const nlohmann::json& payload);
};

/// Throws SchemaError when the schema's fingerprint differs from the artifact's.
void check_schema(const ModelArtifact& artifact, const dataset::FeatureSchema& schema);

/// JSON envelope {format_version, created, schema_fingerprint, payload,
/// checksum}. Tensors are base64 little-endian float32.
void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& path);
std::string serialize_artifact(const ModelArtifact& artifact);
/// Throws IntegrityError on version, checksum or fingerprint mismatch.
ModelArtifact load_artifact(const std::filesystem::path& path);
ModelArtifact deserialize_artifact(std::string_view text);

std::string base64_encode_floats(std::span<const float> values);
std::vector<float> base64_decode_floats(std::string_view text);

struct TrainOutput {
  ModelArtifact artifact;
  TrainHistory history;
};

/// prepare -> train_loop -> evaluation on the held-out split.
TrainOutput train(const dataset::Dataset& data, const TrainConfig& cfg);

/// Predicts every record and scores against its label.
metrics::EvaluationReport evaluate(const ModelArtifact& artifact,
                                   const std::vector<dataset::SubjectRecord>& records);
metrics::EvaluationReport evaluate(const ModelArtifact& artifact, const dataset::Dataset& data);

struct ArmResult {
  metrics::EvaluationReport report;
  TrainHistory history;
};

struct AblationReport {
  ArmResult with_coherence;
  ArmResult without_coherence;
  nlohmann::json metadata = nlohmann::json::object();

  nlohmann::json to_json() const;
};

/// Trains two arms that share split, seed, architecture and preprocessing and
/// differ only in include_coherence. Throws InvalidArgument when the records
/// lack coherence.
AblationReport ablation_compare(const dataset::Dataset& data, const TrainConfig& cfg);

}  // namespace neurospect::pipeline
