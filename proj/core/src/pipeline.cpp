#include "neurospect/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "neurospect/errors.hpp"

namespace neurospect::pipeline {
namespace {

const std::set<std::string> kTrainKeys = {
    "epochs",   "batch_size", "lr",   "workers",   "patience",       "lr_patience",
    "lr_decay", "validation_fraction", "seed", "include_coherence", "preprocess", "layers"};

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * (epoch + 1));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

template <typename T>
void add_into(nn::Gradients<T>& acc, const nn::Gradients<T>& g) {
  for (std::size_t l = 0; l < acc.size(); ++l) {
    for (std::size_t k = 0; k < acc[l].weight.size(); ++k) acc[l].weight[k] += g[l].weight[k];
    for (std::size_t k = 0; k < acc[l].bias.size(); ++k) acc[l].bias[k] += g[l].bias[k];
  }
}

std::size_t argmax(std::span<const float> p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<int> record_codes(const std::vector<dataset::SubjectRecord>& records,
                              const preprocess::EncoderMap& encoder) {
  std::vector<int> codes;
  codes.reserve(records.size());
  for (const auto& r : records) codes.push_back(encoder.encode(std::string(dataset::label_name(r.label))));
  return codes;
}

std::string class_count_text(const std::vector<int>& codes, const preprocess::EncoderMap& enc) {
  std::vector<std::size_t> counts(enc.size(), 0);
  for (int c : codes) ++counts[static_cast<std::size_t>(c)];
  std::string out;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    out += (c ? ", " : "") + enc.decode(static_cast<int>(c)) + "=" + std::to_string(counts[c]);
  }
  return out;
}

std::vector<int> predict_codes(const nn::Model<float>& model,
                               const std::vector<nn::Sample<float>>& samples) {
  nn::Workspace<float> ws(model.architecture());
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(static_cast<int>(argmax(ws.forward(model, s.input, s.aux))));
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (workers < 1) throw InvalidArgument("workers must be at least 1");
  if (workers > batch_size) {
    throw InvalidArgument("workers (" + std::to_string(workers) + ") exceeds batch_size (" +
                          std::to_string(batch_size) + ")");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("lr must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InvalidArgument("lr_decay must lie in (0, 1]");
  if (lr_patience < 1 || patience < 1) throw InvalidArgument("patience values must be at least 1");
  if (!(validation_fraction >= 0.0 && validation_fraction <= 0.5)) {
    throw InvalidArgument("validation_fraction must lie in [0, 0.5]");
  }
  preprocess.outliers.validate();
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = {{"epochs", epochs},
                      {"batch_size", batch_size},
                      {"lr", lr},
                      {"workers", workers},
                      {"patience", patience},
                      {"lr_patience", lr_patience},
                      {"lr_decay", lr_decay},
                      {"validation_fraction", validation_fraction},
                      {"seed", seed},
                      {"include_coherence", include_coherence},
                      {"preprocess", preprocess.to_json()}};
  if (!layers.empty()) {
    nlohmann::json lj = nlohmann::json::array();
    for (const auto& l : layers) lj.push_back(nn::layer_to_json(l));
    j["layers"] = lj;
  }
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("train config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kTrainKeys.count(key)) throw InvalidArgument("unknown train config key '" + key + "'");
  }
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.workers = j.value("workers", c.workers);
    c.patience = j.value("patience", c.patience);
    c.lr_patience = j.value("lr_patience", c.lr_patience);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.seed = j.value("seed", c.seed);
    c.include_coherence = j.value("include_coherence", c.include_coherence);
    if (j.contains("preprocess")) c.preprocess = preprocess::PreprocessConfig::from_json(j.at("preprocess"));
    if (j.contains("layers")) {
      for (const auto& l : j.at("layers")) c.layers.push_back(nn::layer_from_json(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

nn::Architecture architecture_for(const dataset::FeatureSchema& schema, std::size_t n_classes,
                                  const std::vector<nn::LayerSpec>& layers) {
  const std::size_t n = schema.electrodes.size();
  if (layers.empty()) {
    return nn::Architecture::reference(schema.bands.size(), n, dataset::kDemographicCount, n_classes);
  }
  nn::Architecture a;
  a.input = {schema.bands.size(), n, n};
  a.layers = layers;
  a.validate();
  if (a.aux_len() != dataset::kDemographicCount) {
    throw InvalidArgument("architecture must contain concat_aux with aux_len 4");
  }
  if (a.n_classes() != n_classes) {
    throw InvalidArgument("architecture outputs " + std::to_string(a.n_classes()) +
                          " classes; the data has " + std::to_string(n_classes));
  }
  return a;
}

template <typename T>
GradientResult<T> parallel_gradient(const nn::Model<T>& model,
                                    std::span<const nn::Sample<T>* const> batch,
                                    std::size_t workers) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  if (workers == 0) throw InvalidArgument("workers must be at least 1");
  if (workers > batch.size()) {
    throw InvalidArgument("workers (" + std::to_string(workers) + ") exceeds batch size (" +
                          std::to_string(batch.size()) + "); a partition would be empty");
  }
  struct Partial {
    nn::Gradients<T> grads;
    double loss = 0.0;
    std::size_t correct = 0;
    std::exception_ptr error;
  };
  std::vector<Partial> parts(workers);
  const std::size_t base = batch.size() / workers;
  const std::size_t extra = batch.size() % workers;
  auto run = [&](std::size_t p) {
    try {
      const std::size_t begin = p * base + std::min(p, extra);
      const std::size_t end = begin + base + (p < extra ? 1 : 0);
      nn::Workspace<T> ws(model.architecture());
      parts[p].grads = nn::zero_gradients(model);
      for (std::size_t i = begin; i < end; ++i) {
        bool ok = false;
        parts[p].loss += static_cast<double>(ws.accumulate(model, *batch[i], parts[p].grads, &ok));
        if (ok) ++parts[p].correct;
      }
    } catch (...) {
      parts[p].error = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers - 1);
    for (std::size_t p = 1; p < workers; ++p) threads.emplace_back(run, p);
    run(0);
  }
  for (const auto& part : parts) {
    if (part.error) std::rethrow_exception(part.error);
  }
  GradientResult<T> out;
  out.grads = std::move(parts[0].grads);
  out.loss_sum = parts[0].loss;
  out.correct = parts[0].correct;
  for (std::size_t p = 1; p < workers; ++p) {
    add_into(out.grads, parts[p].grads);
    out.loss_sum += parts[p].loss;
    out.correct += parts[p].correct;
  }
  const T n = static_cast<T>(batch.size());
  for (auto& layer : out.grads) {
    for (auto& v : layer.weight) v /= n;
    for (auto& v : layer.bias) v /= n;
  }
  return out;
}

template <typename T>
GradientResult<T> parallel_gradient(const nn::Model<T>& model,
                                    std::span<const nn::Sample<T>> batch, std::size_t workers) {
  std::vector<const nn::Sample<T>*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& s : batch) ptrs.push_back(&s);
  return parallel_gradient<T>(model, std::span<const nn::Sample<T>* const>(ptrs), workers);
}

template GradientResult<float> parallel_gradient<float>(const nn::Model<float>&,
                                                        std::span<const nn::Sample<float>* const>,
                                                        std::size_t);
template GradientResult<double> parallel_gradient<double>(
    const nn::Model<double>&, std::span<const nn::Sample<double>* const>, std::size_t);
template GradientResult<float> parallel_gradient<float>(const nn::Model<float>&,
                                                        std::span<const nn::Sample<float>>,
                                                        std::size_t);
template GradientResult<double> parallel_gradient<double>(const nn::Model<double>&,
                                                          std::span<const nn::Sample<double>>,
                                                          std::size_t);

nlohmann::json TrainHistory::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"train_accuracy", e.train_accuracy},
                    {"val_loss", e.val_loss},
                    {"val_accuracy", e.val_accuracy},
                    {"lr", e.lr}});
  }
  return {{"epochs", rows}, {"best_epoch", best_epoch}, {"stopped_early", stopped_early}};
}

std::pair<double, double> loss_and_accuracy(const nn::Model<float>& model,
                                            const std::vector<nn::Sample<float>>& samples) {
  if (samples.empty()) throw InvalidArgument("no samples to score");
  nn::Workspace<float> ws(model.architecture());
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    loss += static_cast<double>(ws.loss(model, s));
    if (argmax(ws.output()) == static_cast<std::size_t>(s.target)) ++correct;
  }
  const auto n = static_cast<double>(samples.size());
  return {loss / n, static_cast<double>(correct) / n};
}

LoopResult train_loop(nn::Model<float> model, const std::vector<nn::Sample<float>>& train,
                      const std::vector<nn::Sample<float>>& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw InvalidArgument("no training samples");
  nn::AdamState adam;
  adam.lr = cfg.lr;
  LoopResult out;
  auto best_params = model.params();
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_improve = 0;
  std::size_t since_decay = 0;

  std::vector<const nn::Sample<float>*> order;
  order.reserve(train.size());
  for (const auto& s : train) order.push_back(&s);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::mt19937_64 rng(epoch_seed(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    const double epoch_lr = adam.lr;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_no = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_no) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - begin);
      const std::span<const nn::Sample<float>* const> batch(order.data() + begin, len);
      try {
        // A short final batch runs with at most one worker per sample.
        auto g = parallel_gradient<float>(model, batch, std::min(cfg.workers, len));
        if (!std::isfinite(g.loss_sum)) throw NumericError("non-finite batch loss");
        loss_sum += g.loss_sum;
        correct += g.correct;
        nn::adam_step(model.params(), g.grads, adam);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no) + ": " + e.what());
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = epoch_lr;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    if (val.empty()) {
      rec.val_loss = rec.train_loss;
      rec.val_accuracy = rec.train_accuracy;
    } else {
      std::tie(rec.val_loss, rec.val_accuracy) = loss_and_accuracy(model, val);
    }
    if (!std::isfinite(rec.val_loss)) {
      throw NumericError("epoch " + std::to_string(epoch) + ": non-finite validation loss");
    }
    out.history.epochs.push_back(rec);

    if (rec.val_loss < best_loss) {
      best_loss = rec.val_loss;
      best_params = model.params();
      out.history.best_epoch = epoch;
      since_improve = 0;
      since_decay = 0;
    } else {
      ++since_improve;
      ++since_decay;
      if (since_decay >= cfg.lr_patience) {
        adam.lr *= cfg.lr_decay;
        since_decay = 0;
      }
      if (since_improve >= cfg.patience) {
        out.history.stopped_early = true;
        break;
      }
    }
  }
  model.params() = std::move(best_params);
  out.model = std::move(model);
  return out;
}

PreparedData prepare(const dataset::Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.records.empty()) throw InvalidArgument("dataset has no records");
  PreparedData p;
  p.schema = data.schema;
  p.demographic_columns = data.demographic_columns;

  std::vector<std::string> names;
  for (const auto& r : data.records) names.emplace_back(dataset::label_name(r.label));
  p.encoder = preprocess::EncoderMap::fit(names);
  const auto codes = record_codes(data.records, p.encoder);
  if (p.encoder.size() < 2) {
    throw DataError("degenerate class counts: training needs at least 2 classes (" +
                    class_count_text(codes, p.encoder) + ")");
  }

  preprocess::SplitIndices split;
  try {
    split = preprocess::stratified_split(codes, cfg.preprocess.split);
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("degenerate class counts: ") + e.what() + " (" +
                    class_count_text(codes, p.encoder) + ")");
  }
  p.test_records = split.test;
  if (cfg.validation_fraction > 0.0) {
    std::vector<int> train_codes;
    for (auto i : split.train) train_codes.push_back(codes[i]);
    const auto hold = preprocess::holdout_split(train_codes, 1.0 - cfg.validation_fraction,
                                                cfg.preprocess.split.seed + 1);
    for (auto i : hold.train) p.fit_records.push_back(split.train[i]);
    for (auto i : hold.test) p.val_records.push_back(split.train[i]);
  } else {
    p.fit_records = split.train;
  }

  std::vector<std::vector<double>> raw(data.records.size());
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    raw[i] = dataset::feature_row(data.records[i], data.schema);
  }
  std::vector<std::vector<double>> fit_raw;
  fit_raw.reserve(p.fit_records.size());
  for (auto i : p.fit_records) fit_raw.push_back(raw[i]);
  p.transform = dataset::FeatureTransform::fit(fit_raw, data.schema, data.demographic_columns,
                                               cfg.preprocess);

  auto scaled = [&](const std::vector<std::size_t>& idx) {
    preprocess::LabeledRows rows;
    for (auto i : idx) {
      rows.rows.push_back(p.transform.apply(raw[i]));
      rows.labels.push_back(codes[i]);
    }
    return rows;
  };
  p.fit_rows = preprocess::resample(scaled(p.fit_records), cfg.preprocess.resample);
  p.val_rows = scaled(p.val_records);
  p.test_rows = scaled(p.test_records);
  return p;
}

void check_no_leakage(const PreparedData& p) {
  if (p.transform.fitted_rows() != p.fit_records.size()) {
    throw StateError("feature transform was fitted on " + std::to_string(p.transform.fitted_rows()) +
                     " rows but the fit split has " + std::to_string(p.fit_records.size()));
  }
  std::set<std::size_t> fit(p.fit_records.begin(), p.fit_records.end());
  for (auto i : p.val_records) {
    if (fit.count(i)) throw StateError("validation record " + std::to_string(i) + " is in the fit split");
  }
  for (auto i : p.test_records) {
    if (fit.count(i)) throw StateError("test record " + std::to_string(i) + " is in the fit split");
  }
  std::set<std::size_t> val(p.val_records.begin(), p.val_records.end());
  for (auto i : p.test_records) {
    if (val.count(i)) throw StateError("test record " + std::to_string(i) + " is in the validation split");
  }
  if (p.fit_rows.rows.size() < p.fit_records.size()) {
    throw StateError("resampled training rows fewer than the fit split");
  }
}

std::vector<nn::Sample<float>> to_samples(const preprocess::LabeledRows& rows,
                                          const dataset::FeatureSchema& schema,
                                          bool include_coherence) {
  std::vector<nn::Sample<float>> out;
  out.reserve(rows.rows.size());
  for (std::size_t i = 0; i < rows.rows.size(); ++i) {
    const auto t = dataset::tensor_from_row(rows.rows[i], schema, include_coherence);
    nn::Sample<float> s;
    s.input.assign(t.grid.begin(), t.grid.end());
    s.aux.assign(t.demographics.begin(), t.demographics.end());
    s.target = rows.labels[i];
    out.push_back(std::move(s));
  }
  return out;
}

Prediction ModelArtifact::predict(const dataset::SubjectRecord& record) const {
  const bool has_coh = record.coherence.has_value();
  const bool use_coh = config.include_coherence && has_coh;
  const auto row = transform.apply(dataset::feature_row(record, schema));
  const auto t = dataset::tensor_from_row(row, schema, use_coh);
  const std::vector<float> input(t.grid.begin(), t.grid.end());
  const std::vector<float> aux(t.demographics.begin(), t.demographics.end());
  Prediction p;
  p.probabilities = model.predict(input, aux);
  p.code = static_cast<int>(argmax(p.probabilities));
  p.label = encoder.decode(p.code);
  p.coherence_ablated = config.include_coherence && !has_coh;
  return p;
}

void check_schema(const ModelArtifact& artifact, const dataset::FeatureSchema& schema) {
  const auto want = artifact.fingerprint();
  const auto got = schema.fingerprint();
  if (want != got) {
    throw SchemaError("schema fingerprint mismatch: model expects " + want.substr(0, 12) + " (" +
                      std::string(dataset::mode_name(artifact.schema.mode)) + "), records have " +
                      got.substr(0, 12) + " (" + std::string(dataset::mode_name(schema.mode)) + ")");
  }
}

metrics::EvaluationReport evaluate(const ModelArtifact& artifact,
                                   const std::vector<dataset::SubjectRecord>& records) {
  if (records.empty()) throw InvalidArgument("cannot evaluate an empty test set");
  std::vector<int> truth;
  std::vector<int> pred;
  for (const auto& r : records) {
    truth.push_back(artifact.encoder.encode(std::string(dataset::label_name(r.label))));
    pred.push_back(artifact.predict(r).code);
  }
  return metrics::evaluate_predictions(truth, pred, artifact.encoder.labels());
}

metrics::EvaluationReport evaluate(const ModelArtifact& artifact, const dataset::Dataset& data) {
  check_schema(artifact, data.schema);
  return evaluate(artifact, data.records);
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

metrics::EvaluationReport score(const nn::Model<float>& model,
                                const std::vector<nn::Sample<float>>& samples,
                                const preprocess::EncoderMap& encoder) {
  std::vector<int> truth;
  for (const auto& s : samples) truth.push_back(s.target);
  return metrics::evaluate_predictions(truth, predict_codes(model, samples), encoder.labels());
}

}  // namespace

TrainOutput train(const dataset::Dataset& data, const TrainConfig& cfg) {
  if (cfg.include_coherence && data.schema.mode != dataset::FeatureMode::full) {
    throw InvalidArgument("include_coherence requires a full feature schema");
  }
  const auto prepared = prepare(data, cfg);
  check_no_leakage(prepared);
  const auto arch = architecture_for(prepared.schema, prepared.encoder.size(), cfg.layers);
  const auto train_s = to_samples(prepared.fit_rows, prepared.schema, cfg.include_coherence);
  const auto val_s = to_samples(prepared.val_rows, prepared.schema, cfg.include_coherence);
  const auto test_s = to_samples(prepared.test_rows, prepared.schema, cfg.include_coherence);
  auto loop = train_loop(nn::Model<float>::init(arch, cfg.seed), train_s, val_s, cfg);

  TrainOutput out;
  auto& a = out.artifact;
  a.created = utc_timestamp();
  a.schema = prepared.schema;
  a.demographic_columns = prepared.demographic_columns;
  a.transform = prepared.transform;
  a.encoder = prepared.encoder;
  a.config = cfg;
  for (auto i : prepared.test_records) a.test_ids.push_back(data.records[i].id);
  if (!test_s.empty()) a.report = score(loop.model, test_s, prepared.encoder);
  a.model = std::move(loop.model);
  out.history = std::move(loop.history);
  return out;
}

nlohmann::json AblationReport::to_json() const {
  const auto& w = with_coherence.report;
  const auto& wo = without_coherence.report;
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < w.class_names.size(); ++c) {
    per.push_back({{"class", w.class_names[c]},
                   {"precision", w.per_class[c].precision - wo.per_class[c].precision},
                   {"recall", w.per_class[c].recall - wo.per_class[c].recall},
                   {"f1", w.per_class[c].f1 - wo.per_class[c].f1}});
  }
  return {{"arms", {{"with_coherence", w.to_json()}, {"without_coherence", wo.to_json()}}},
          {"deltas",
           {{"accuracy", w.accuracy - wo.accuracy},
            {"macro_f1", w.macro_f1 - wo.macro_f1},
            {"per_class", per}}},
          {"histories",
           {{"with_coherence", with_coherence.history.to_json()},
            {"without_coherence", without_coherence.history.to_json()}}},
          {"metadata", metadata}};
}

AblationReport ablation_compare(const dataset::Dataset& data, const TrainConfig& cfg) {
  if (data.schema.mode != dataset::FeatureMode::full) {
    throw InvalidArgument("ablation requires records with coherence features (full mode)");
  }
  for (const auto& r : data.records) {
    if (!r.coherence) throw InvalidArgument("record '" + r.id + "' lacks coherence features");
  }
  const auto prepared = prepare(data, cfg);
  check_no_leakage(prepared);
  const auto arch = architecture_for(prepared.schema, prepared.encoder.size(), cfg.layers);

  auto run_arm = [&](bool include) {
    auto arm_cfg = cfg;
    arm_cfg.include_coherence = include;
    const auto train_s = to_samples(prepared.fit_rows, prepared.schema, include);
    const auto val_s = to_samples(prepared.val_rows, prepared.schema, include);
    const auto test_s = to_samples(prepared.test_rows, prepared.schema, include);
    auto loop = train_loop(nn::Model<float>::init(arch, cfg.seed), train_s, val_s, arm_cfg);
    return ArmResult{score(loop.model, test_s, prepared.encoder), std::move(loop.history)};
  };

  AblationReport r;
  r.with_coherence = run_arm(true);
  r.without_coherence = run_arm(false);
  auto cfg_json = cfg.to_json();
  cfg_json.erase("include_coherence");
  r.metadata = {{"created", utc_timestamp()},
                {"schema_fingerprint", prepared.schema.fingerprint()},
                {"n_records", data.records.size()},
                {"n_fit", prepared.fit_records.size()},
                {"n_fit_resampled", prepared.fit_rows.rows.size()},
                {"n_val", prepared.val_records.size()},
                {"n_test", prepared.test_records.size()},
                {"architecture", arch.to_json()},
                {"train_config", cfg_json},
                {"published_reference", {{"with_coherence", 0.964}, {"without_coherence", 0.887}}}};
  return r;
}

}  // namespace neurospect::pipeline
