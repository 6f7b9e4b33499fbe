#include "neurospect/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "neurospect/errors.hpp"

namespace neurospect::preprocess {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> observed(std::span<const double> values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) {
    if (!std::isnan(v)) out.push_back(v);
  }
  return out;
}

SplitIndices allocate_split(std::span<const int> labels, double fraction, std::uint64_t seed,
                            bool singletons_to_train) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie strictly between 0 and 1");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  SplitIndices out;
  std::mt19937_64 rng(seed);
  struct Alloc {
    int label;
    std::vector<std::size_t> members;
    std::size_t n_train;
    double frac;
  };
  std::vector<Alloc> allocs;
  std::size_t pooled = 0;
  for (auto& [label, members] : by_class) {
    if (members.size() < 2) {
      if (!singletons_to_train) {
        throw InvalidArgument("class " + std::to_string(label) +
                              " has a single member; stratified split needs at least 2");
      }
      out.train.push_back(members.front());
      continue;
    }
    std::shuffle(members.begin(), members.end(), rng);
    const double exact = fraction * static_cast<double>(members.size());
    const double fl = std::floor(exact);
    allocs.push_back({label, members, static_cast<std::size_t>(fl), exact - fl});
    pooled += members.size();
  }

  std::size_t floors = 0;
  for (const auto& a : allocs) floors += a.n_train;
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pooled)));
  std::size_t remainder = target > floors ? target - floors : 0;

  std::vector<std::size_t> order(allocs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (allocs[a].frac != allocs[b].frac) return allocs[a].frac > allocs[b].frac;
    return allocs[a].label < allocs[b].label;
  });
  for (std::size_t idx : order) {
    if (remainder == 0) break;
    if (allocs[idx].n_train < allocs[idx].members.size()) {
      ++allocs[idx].n_train;
      --remainder;
    }
  }

  for (const auto& a : allocs) {
    out.train.insert(out.train.end(), a.members.begin(), a.members.begin() + a.n_train);
    out.test.insert(out.test.end(), a.members.begin() + a.n_train, a.members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

}  // namespace

void OutlierPolicy::validate() const {
  if (method == Method::zscore && !(threshold > 0.0)) {
    throw InvalidArgument("z-score threshold must be positive");
  }
  if (method == Method::iqr && !(k > 0.0)) throw InvalidArgument("IQR multiplier must be positive");
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidArgument("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

OutlierFences fit_outlier_fences(std::span<const double> values, const OutlierPolicy& policy) {
  policy.validate();
  const auto obs = observed(values);
  if (obs.empty()) throw DataError("outlier detection on an all-missing column");
  if (obs.size() < 2) throw DataError("outlier detection needs at least 2 observed values");
  if (policy.method == OutlierPolicy::Method::zscore) {
    const double mean = std::accumulate(obs.begin(), obs.end(), 0.0) / static_cast<double>(obs.size());
    double ss = 0.0;
    for (double v : obs) ss += (v - mean) * (v - mean);
    const double sigma = std::sqrt(ss / static_cast<double>(obs.size()));
    return {mean - policy.threshold * sigma, mean + policy.threshold * sigma};
  }
  const double q1 = quantile(obs, 0.25);
  const double q3 = quantile(obs, 0.75);
  const double iqr = q3 - q1;
  return {q1 - policy.k * iqr, q3 + policy.k * iqr};
}

OutlierResult apply_outlier_fences(std::span<const double> values, const OutlierFences& fences,
                                   OutlierPolicy::Action action) {
  OutlierResult out;
  out.fences = fences;
  out.flags.assign(values.size(), false);
  out.treated.assign(values.begin(), values.end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (std::isnan(v)) continue;
    if (v < fences.lo || v > fences.hi) {
      out.flags[i] = true;
      if (action == OutlierPolicy::Action::mark_missing) {
        out.treated[i] = kNaN;
      } else {
        out.treated[i] = v < fences.lo ? fences.lo : fences.hi;
      }
    }
  }
  return out;
}

OutlierResult detect_outliers(std::span<const double> values, const OutlierPolicy& policy) {
  return apply_outlier_fences(values, fit_outlier_fences(values, policy), policy.action);
}

double mean_of_observed(std::span<const double> values) {
  const auto obs = observed(values);
  if (obs.empty()) throw DataError("cannot impute an all-missing column");
  return std::accumulate(obs.begin(), obs.end(), 0.0) / static_cast<double>(obs.size());
}

std::string mode_of_observed(std::span<const std::optional<std::string>> values) {
  std::map<std::string, std::size_t> counts;
  for (const auto& v : values) {
    if (v) ++counts[*v];
  }
  if (counts.empty()) throw DataError("cannot impute an all-missing column");
  // std::map iterates lexicographically, so the first maximum wins ties.
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

std::vector<double> impute_numeric(std::span<const double> values) {
  const double fill = mean_of_observed(values);
  std::vector<double> out(values.begin(), values.end());
  for (double& v : out) {
    if (std::isnan(v)) v = fill;
  }
  return out;
}

std::vector<std::string> impute_categorical(std::span<const std::optional<std::string>> values) {
  const auto fill = mode_of_observed(values);
  std::vector<std::string> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v ? *v : fill);
  return out;
}

EncoderMap EncoderMap::from_domain(std::vector<std::string> domain) {
  std::sort(domain.begin(), domain.end());
  if (std::adjacent_find(domain.begin(), domain.end()) != domain.end()) {
    throw InvalidArgument("encoder domain contains duplicates");
  }
  EncoderMap m;
  m.labels_ = std::move(domain);
  return m;
}

EncoderMap EncoderMap::fit(std::span<const std::string> values) {
  std::vector<std::string> domain(values.begin(), values.end());
  std::sort(domain.begin(), domain.end());
  domain.erase(std::unique(domain.begin(), domain.end()), domain.end());
  return from_domain(std::move(domain));
}

int EncoderMap::encode(const std::string& label) const {
  const auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
  if (it == labels_.end() || *it != label) throw DataError("unseen label '" + label + "'");
  return static_cast<int>(it - labels_.begin());
}

const std::string& EncoderMap::decode(int code) const {
  if (code < 0 || static_cast<std::size_t>(code) >= labels_.size()) {
    throw DataError("label code " + std::to_string(code) + " out of range");
  }
  return labels_[static_cast<std::size_t>(code)];
}

nlohmann::json EncoderMap::to_json() const { return {{"labels", labels_}}; }

EncoderMap EncoderMap::from_json(const nlohmann::json& j) {
  return from_domain(j.at("labels").get<std::vector<std::string>>());
}

EncodedLabels encode_labels(std::span<const std::string> labels, std::vector<std::string> domain) {
  EncodedLabels out;
  out.map = domain.empty() ? EncoderMap::fit(labels) : EncoderMap::from_domain(std::move(domain));
  out.codes.reserve(labels.size());
  for (const auto& l : labels) out.codes.push_back(out.map.encode(l));
  return out;
}

void ScalerParams::fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InvalidArgument("cannot fit a scaler on zero rows");
  const std::size_t width = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != width) throw ShapeError("scaler rows have inconsistent widths");
  }
  offset_.assign(width, 0.0);
  divisor_.assign(width, 0.0);
  constant_.clear();
  const auto n = static_cast<double>(rows.size());
  for (std::size_t f = 0; f < width; ++f) {
    if (mode_ == ScaleMode::minmax) {
      double lo = rows.front()[f];
      double hi = lo;
      for (const auto& r : rows) {
        lo = std::min(lo, r[f]);
        hi = std::max(hi, r[f]);
      }
      offset_[f] = lo;
      divisor_[f] = hi > lo ? hi - lo : 0.0;
    } else {
      double mean = 0.0;
      for (const auto& r : rows) mean += r[f];
      mean /= n;
      double ss = 0.0;
      for (const auto& r : rows) ss += (r[f] - mean) * (r[f] - mean);
      const double sd = rows.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      offset_[f] = mean;
      divisor_[f] = sd > 0.0 ? sd : 0.0;
    }
    if (divisor_[f] == 0.0) constant_.push_back(f);
  }
  fitted_ = true;
}

void ScalerParams::apply_in_place(std::span<double> row) const {
  if (!fitted_) throw StateError("scaler applied before fitting");
  if (row.size() != offset_.size()) throw ShapeError("scaler width mismatch");
  for (std::size_t f = 0; f < row.size(); ++f) {
    row[f] = divisor_[f] == 0.0 ? 0.0 : (row[f] - offset_[f]) / divisor_[f];
  }
}

std::vector<double> ScalerParams::apply(std::span<const double> row) const {
  std::vector<double> out(row.begin(), row.end());
  apply_in_place(out);
  return out;
}

std::vector<std::vector<double>> ScalerParams::apply(
    const std::vector<std::vector<double>>& rows) const {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(apply(std::span<const double>(r)));
  return out;
}

nlohmann::json ScalerParams::to_json() const {
  return {{"mode", mode_ == ScaleMode::minmax ? "minmax" : "zscore"},
          {"fitted", fitted_},
          {"offset", offset_},
          {"divisor", divisor_}};
}

ScalerParams ScalerParams::from_json(const nlohmann::json& j) {
  const auto mode = j.at("mode").get<std::string>();
  if (mode != "minmax" && mode != "zscore") throw DataError("unknown scaler mode '" + mode + "'");
  ScalerParams p(mode == "minmax" ? ScaleMode::minmax : ScaleMode::zscore);
  p.fitted_ = j.at("fitted").get<bool>();
  p.offset_ = j.at("offset").get<std::vector<double>>();
  p.divisor_ = j.at("divisor").get<std::vector<double>>();
  if (p.offset_.size() != p.divisor_.size()) throw DataError("scaler parameter length mismatch");
  for (std::size_t f = 0; f < p.divisor_.size(); ++f) {
    if (p.divisor_[f] == 0.0) p.constant_.push_back(f);
  }
  return p;
}

std::vector<double> smote_point(std::span<const double> a, std::span<const double> b,
                                double lambda) {
  if (a.size() != b.size()) throw ShapeError("SMOTE endpoints differ in width");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + lambda * (b[i] - a[i]);
  return out;
}

LabeledRows resample(const LabeledRows& data, const ResamplePolicy& policy) {
  if (data.rows.size() != data.labels.size()) throw ShapeError("rows and labels differ in length");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.labels.size(); ++i) by_class[data.labels[i]].push_back(i);
  if (policy.method == ResamplePolicy::Method::none) return data;
  if (by_class.size() < 2) throw InvalidArgument("resampling needs at least 2 classes");

  std::mt19937_64 rng(policy.seed);
  if (policy.method == ResamplePolicy::Method::undersample) {
    std::size_t target = data.rows.size();
    for (const auto& [_, m] : by_class) target = std::min(target, m.size());
    std::vector<bool> keep(data.rows.size(), false);
    for (auto& [_, members] : by_class) {
      auto pick = members;
      std::shuffle(pick.begin(), pick.end(), rng);
      for (std::size_t i = 0; i < target; ++i) keep[pick[i]] = true;
    }
    LabeledRows out;
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
      if (keep[i]) {
        out.rows.push_back(data.rows[i]);
        out.labels.push_back(data.labels[i]);
      }
    }
    return out;
  }

  if (policy.k < 1) throw InvalidArgument("SMOTE k must be at least 1");
  const auto k = static_cast<std::size_t>(policy.k);
  std::size_t target = 0;
  for (const auto& [_, m] : by_class) target = std::max(target, m.size());

  LabeledRows out = data;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& [label, members] : by_class) {
    if (members.size() >= target) continue;
    if (members.size() < k + 1) {
      throw InvalidArgument("minority class " + std::to_string(label) + " has " +
                            std::to_string(members.size()) + " members; SMOTE with k=" +
                            std::to_string(k) + " needs at least " + std::to_string(k + 1));
    }
    // k nearest neighbours within the class, ties broken by position.
    std::vector<std::vector<std::size_t>> neighbours(members.size());
    for (std::size_t a = 0; a < members.size(); ++a) {
      std::vector<std::pair<double, std::size_t>> dist;
      for (std::size_t b = 0; b < members.size(); ++b) {
        if (a == b) continue;
        dist.emplace_back(squared_distance(data.rows[members[a]], data.rows[members[b]]), b);
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      for (std::size_t i = 0; i < k; ++i) neighbours[a].push_back(dist[i].second);
    }
    std::uniform_int_distribution<std::size_t> pick_base(0, members.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_nb(0, k - 1);
    for (std::size_t s = members.size(); s < target; ++s) {
      const std::size_t a = pick_base(rng);
      const std::size_t b = neighbours[a][pick_nb(rng)];
      const double lambda = unit(rng);
      out.rows.push_back(smote_point(data.rows[members[a]], data.rows[members[b]], lambda));
      out.labels.push_back(label);
    }
  }
  return out;
}

SplitIndices stratified_split(std::span<const int> labels, const SplitSpec& spec) {
  if (!spec.stratified) {
    // Treat everything as one class; the allocation rule then reduces to a
    // seeded permutation with round(fraction * N) training rows.
    std::vector<int> one(labels.size(), 0);
    return allocate_split(one, spec.train_fraction, spec.seed, false);
  }
  return allocate_split(labels, spec.train_fraction, spec.seed, false);
}

SplitIndices holdout_split(std::span<const int> labels, double train_fraction, std::uint64_t seed) {
  return allocate_split(labels, train_fraction, seed, true);
}

PreprocessConfig PreprocessConfig::from_json(const nlohmann::json& j) {
  PreprocessConfig c;
  if (!j.is_object()) throw InvalidArgument("preprocess config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "outliers" && key != "impute" && key != "scale" && key != "resample" &&
        key != "split") {
      throw InvalidArgument("unknown preprocess config key '" + key + "'");
    }
  }
  if (j.contains("outliers")) {
    const auto& o = j["outliers"];
    const auto method = o.value("method", std::string("zscore"));
    if (method == "zscore") {
      c.outliers.method = OutlierPolicy::Method::zscore;
    } else if (method == "iqr") {
      c.outliers.method = OutlierPolicy::Method::iqr;
    } else {
      throw InvalidArgument("unknown outlier method '" + method + "'");
    }
    c.outliers.threshold = o.value("threshold", 3.0);
    c.outliers.k = o.value("k", 1.5);
    const auto action = o.value("action", std::string("clip_to_fence"));
    if (action == "clip_to_fence") {
      c.outliers.action = OutlierPolicy::Action::clip_to_fence;
    } else if (action == "mark_missing") {
      c.outliers.action = OutlierPolicy::Action::mark_missing;
    } else {
      throw InvalidArgument("unknown outlier action '" + action + "'");
    }
    c.outliers_on_eeg = o.value("apply_to_eeg", false);
    c.outliers.validate();
  }
  if (j.contains("impute")) {
    const auto& im = j["impute"];
    if (im.value("numeric", std::string("mean")) != "mean" ||
        im.value("categorical", std::string("mode")) != "mode") {
      throw InvalidArgument("impute supports numeric=mean and categorical=mode only");
    }
  }
  if (j.contains("scale")) {
    const auto mode = j["scale"].value("mode", std::string("zscore"));
    if (mode == "minmax") {
      c.scale = ScaleMode::minmax;
    } else if (mode == "zscore") {
      c.scale = ScaleMode::zscore;
    } else {
      throw InvalidArgument("unknown scale mode '" + mode + "'");
    }
  }
  if (j.contains("resample")) {
    const auto& r = j["resample"];
    const auto method = r.value("method", std::string("smote"));
    if (method == "smote") {
      c.resample.method = ResamplePolicy::Method::smote;
    } else if (method == "undersample") {
      c.resample.method = ResamplePolicy::Method::undersample;
    } else if (method == "none") {
      c.resample.method = ResamplePolicy::Method::none;
    } else {
      throw InvalidArgument("unknown resample method '" + method + "'");
    }
    c.resample.k = r.value("k", 5);
    c.resample.seed = r.value("seed", std::uint64_t{7});
    if (c.resample.k < 1) throw InvalidArgument("SMOTE k must be at least 1");
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    c.split.train_fraction = s.value("train_fraction", 0.8);
    c.split.stratified = s.value("stratified", true);
    c.split.seed = s.value("seed", std::uint64_t{42});
    if (!(c.split.train_fraction > 0.0 && c.split.train_fraction < 1.0)) {
      throw InvalidArgument("split.train_fraction must lie strictly between 0 and 1");
    }
  }
  return c;
}

nlohmann::json PreprocessConfig::to_json() const {
  const char* method = outliers.method == OutlierPolicy::Method::zscore ? "zscore" : "iqr";
  const char* action =
      outliers.action == OutlierPolicy::Action::clip_to_fence ? "clip_to_fence" : "mark_missing";
  const char* resample_method = resample.method == ResamplePolicy::Method::smote ? "smote"
                                : resample.method == ResamplePolicy::Method::undersample
                                    ? "undersample"
                                    : "none";
  return {
      {"outliers",
       {{"method", method},
        {"threshold", outliers.threshold},
        {"k", outliers.k},
        {"action", action},
        {"apply_to_eeg", outliers_on_eeg}}},
      {"impute", {{"numeric", "mean"}, {"categorical", "mode"}}},
      {"scale", {{"mode", scale == ScaleMode::minmax ? "minmax" : "zscore"}}},
      {"resample", {{"method", resample_method}, {"k", resample.k}, {"seed", resample.seed}}},
      {"split",
       {{"train_fraction", split.train_fraction},
        {"stratified", split.stratified},
        {"seed", split.seed}}},
  };
}

}  // namespace neurospect::preprocess
