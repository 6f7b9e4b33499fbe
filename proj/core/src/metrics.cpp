#include "neurospect/metrics.hpp"

#include "neurospect/errors.hpp"

namespace neurospect::metrics {

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const int> truth,
                                                  std::span<const int> predicted,
                                                  std::size_t n_classes) {
  if (truth.size() != predicted.size()) {
    throw InvalidArgument("truth and prediction lengths differ");
  }
  if (n_classes == 0) throw InvalidArgument("confusion matrix needs at least one class");
  ConfusionMatrix cm;
  cm.n_classes = n_classes;
  cm.counts.assign(n_classes * n_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= n_classes ||
        static_cast<std::size_t>(predicted[i]) >= n_classes) {
      throw InvalidArgument("class code out of range at position " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(truth[i]) * n_classes +
                static_cast<std::size_t>(predicted[i])];
  }
  return cm;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t c = 0; c < n_classes; ++c) t += at(c, c);
  return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::size_t t = 0;
  for (std::size_t p = 0; p < n_classes; ++p) t += at(c, p);
  return t;
}

std::size_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::size_t t = 0;
  for (std::size_t r = 0; r < n_classes; ++r) t += at(r, c);
  return t;
}

nlohmann::json ConfusionMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < n_classes; ++r) {
    rows.push_back(std::vector<std::size_t>(counts.begin() + static_cast<std::ptrdiff_t>(r * n_classes),
                                            counts.begin() + static_cast<std::ptrdiff_t>((r + 1) * n_classes)));
  }
  return rows;
}

ConfusionMatrix ConfusionMatrix::from_json(const nlohmann::json& j) {
  ConfusionMatrix cm;
  cm.n_classes = j.size();
  for (const auto& row : j) {
    if (row.size() != cm.n_classes) throw DataError("confusion matrix is not square");
    for (const auto& v : row) cm.counts.push_back(v.get<std::size_t>());
  }
  return cm;
}

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

EvaluationReport report_from_confusion(const ConfusionMatrix& cm,
                                       std::vector<std::string> class_names) {
  if (class_names.size() != cm.n_classes) {
    throw InvalidArgument("class name count does not match the confusion matrix");
  }
  const std::size_t total = cm.total();
  if (total == 0) throw InvalidArgument("cannot evaluate an empty test set");
  EvaluationReport r;
  r.class_names = std::move(class_names);
  r.confusion = cm;
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  for (std::size_t c = 0; c < cm.n_classes; ++c) {
    ClassMetrics m;
    const auto tp = static_cast<double>(cm.at(c, c));
    m.support = cm.row_sum(c);
    m.precision = safe_ratio(tp, static_cast<double>(cm.col_sum(c)));
    m.recall = safe_ratio(tp, static_cast<double>(m.support));
    m.f1 = safe_ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
    r.per_class.push_back(m);
  }
  const auto k = static_cast<double>(cm.n_classes);
  r.macro_precision /= k;
  r.macro_recall /= k;
  r.macro_f1 /= k;
  return r;
}

EvaluationReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted,
                                      std::vector<std::string> class_names) {
  if (truth.empty()) throw InvalidArgument("cannot evaluate an empty test set");
  auto cm = ConfusionMatrix::from_predictions(truth, predicted, class_names.size());
  return report_from_confusion(std::move(cm), std::move(class_names));
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    per.push_back({{"class", class_names[c]},
                   {"precision", per_class[c].precision},
                   {"recall", per_class[c].recall},
                   {"f1", per_class[c].f1},
                   {"support", per_class[c].support}});
  }
  return {{"classes", class_names},
          {"n", confusion.total()},
          {"accuracy", accuracy},
          {"per_class", per},
          {"macro", {{"precision", macro_precision}, {"recall", macro_recall}, {"f1", macro_f1}}},
          {"confusion_matrix", confusion.to_json()}};
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& j) {
  EvaluationReport r;
  r.class_names = j.at("classes").get<std::vector<std::string>>();
  r.accuracy = j.at("accuracy").get<double>();
  for (const auto& c : j.at("per_class")) {
    r.per_class.push_back({c.at("precision").get<double>(), c.at("recall").get<double>(),
                           c.at("f1").get<double>(), c.at("support").get<std::size_t>()});
  }
  const auto& m = j.at("macro");
  r.macro_precision = m.at("precision").get<double>();
  r.macro_recall = m.at("recall").get<double>();
  r.macro_f1 = m.at("f1").get<double>();
  r.confusion = ConfusionMatrix::from_json(j.at("confusion_matrix"));
  if (r.per_class.size() != r.class_names.size() || r.confusion.n_classes != r.class_names.size()) {
    throw DataError("evaluation report class counts disagree");
  }
  return r;
}

}  // namespace neurospect::metrics
