#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace neurospect::metrics {

/// Rows are the true class, columns the predicted class.
struct ConfusionMatrix {
  std::size_t n_classes = 0;
  std::vector<std::size_t> counts;

  static ConfusionMatrix from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                          std::size_t n_classes);
  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts[truth * n_classes + predicted];
  }
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(std::size_t c) const;
  std::size_t col_sum(std::size_t c) const;

  nlohmann::json to_json() const;
  static ConfusionMatrix from_json(const nlohmann::json& j);
};

/// num / den, or 0 when den is 0.
double safe_ratio(double num, double den);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvaluationReport {
  std::vector<std::string> class_names;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  ConfusionMatrix confusion;

  nlohmann::json to_json() const;
  static EvaluationReport from_json(const nlohmann::json& j);
};

EvaluationReport report_from_confusion(const ConfusionMatrix& cm,
                                       std::vector<std::string> class_names);

/// Throws InvalidArgument for empty or mismatched inputs and out-of-range
/// class codes.
EvaluationReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted,
                                      std::vector<std::string> class_names);

}  // namespace neurospect::metrics
