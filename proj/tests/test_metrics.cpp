#include <gtest/gtest.h>

#include <random>

#include "neurospect/errors.hpp"
#include "neurospect/metrics.hpp"

using namespace neurospect;
using namespace neurospect::metrics;

namespace {

std::vector<std::string> names(std::size_t k) {
  std::vector<std::string> n;
  for (std::size_t c = 0; c < k; ++c) n.push_back("c" + std::to_string(c));
  return n;
}

// Counting straight from the definitions, no confusion matrix.
struct Oracle {
  double accuracy;
  std::vector<double> precision, recall, f1;
};

Oracle brute_force(const std::vector<int>& t, const std::vector<int>& p, int k) {
  Oracle o;
  int correct = 0;
  for (std::size_t i = 0; i < t.size(); ++i) correct += t[i] == p[i];
  o.accuracy = static_cast<double>(correct) / static_cast<double>(t.size());
  for (int c = 0; c < k; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (p[i] == c && t[i] == c) ++tp;
      if (p[i] == c && t[i] != c) ++fp;
      if (p[i] != c && t[i] == c) ++fn;
    }
    const double prec = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double rec = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    o.precision.push_back(prec);
    o.recall.push_back(rec);
    o.f1.push_back(prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0);
  }
  return o;
}

}  // namespace

TEST(Metrics, HandConfusionExample) {
  // Matrix [[1,1],[0,2]].
  const std::vector<int> t = {0, 0, 1, 1};
  const std::vector<int> p = {0, 1, 1, 1};
  const auto r = evaluate_predictions(t, p, names(2));
  EXPECT_EQ(r.confusion.at(0, 0), 1u);
  EXPECT_EQ(r.confusion.at(0, 1), 1u);
  EXPECT_EQ(r.confusion.at(1, 0), 0u);
  EXPECT_EQ(r.confusion.at(1, 1), 2u);
  EXPECT_DOUBLE_EQ(r.per_class[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(r.per_class[0].recall, 0.5);
  EXPECT_NEAR(r.per_class[0].f1, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.per_class[1].precision, 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.per_class[1].recall, 1.0);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
}

TEST(Metrics, PerfectPredictions) {
  const std::vector<int> t = {0, 1, 2, 2, 1};
  const auto r = evaluate_predictions(t, t, names(3));
  EXPECT_EQ(r.accuracy, 1.0);
  for (const auto& c : r.per_class) EXPECT_EQ(c.f1, 1.0);
  EXPECT_EQ(r.macro_f1, 1.0);
}

TEST(Metrics, ZeroDenominatorIsZero) {
  const std::vector<int> t = {0, 1, 2};
  const std::vector<int> p = {0, 0, 0};
  const auto r = evaluate_predictions(t, p, names(4));
  EXPECT_EQ(r.per_class[1].precision, 0.0);  // never predicted
  EXPECT_EQ(r.per_class[3].recall, 0.0);     // no support
  EXPECT_EQ(r.per_class[3].f1, 0.0);
  EXPECT_EQ(safe_ratio(3, 0), 0.0);
}

TEST(MetricsProperty, MatchesBruteForceExactly) {
  std::mt19937_64 rng(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 6);
    const std::size_t n = 1 + rng() % 200;
    std::vector<int> t(n), p(n);
    for (auto& v : t) v = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng() % 3 == 0 ? t[i] : static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    }
    const auto r = evaluate_predictions(t, p, names(static_cast<std::size_t>(k)));
    const auto o = brute_force(t, p, k);
    ASSERT_EQ(r.accuracy, o.accuracy);
    double mp = 0, mr = 0, mf = 0;
    for (int c = 0; c < k; ++c) {
      const auto& m = r.per_class[static_cast<std::size_t>(c)];
      ASSERT_EQ(m.precision, o.precision[static_cast<std::size_t>(c)]);
      ASSERT_EQ(m.recall, o.recall[static_cast<std::size_t>(c)]);
      ASSERT_EQ(m.f1, o.f1[static_cast<std::size_t>(c)]);
      ASSERT_EQ(m.support, r.confusion.row_sum(static_cast<std::size_t>(c)));
      mp += o.precision[static_cast<std::size_t>(c)];
      mr += o.recall[static_cast<std::size_t>(c)];
      mf += o.f1[static_cast<std::size_t>(c)];
    }
    ASSERT_DOUBLE_EQ(r.macro_precision, mp / k);
    ASSERT_DOUBLE_EQ(r.macro_recall, mr / k);
    ASSERT_DOUBLE_EQ(r.macro_f1, mf / k);
    ASSERT_EQ(r.confusion.total(), n);
    ASSERT_EQ(static_cast<double>(r.confusion.trace()) / static_cast<double>(n), r.accuracy);
  }
}

TEST(Metrics, JsonRoundTrip) {
  const std::vector<int> t = {0, 1, 2, 2, 1, 0};
  const std::vector<int> p = {0, 2, 2, 1, 1, 0};
  const auto r = evaluate_predictions(t, p, names(3));
  const auto j = r.to_json();
  for (const char* key : {"classes", "accuracy", "per_class", "macro", "confusion_matrix"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  const auto back = EvaluationReport::from_json(j);
  EXPECT_EQ(back.to_json(), j);
  EXPECT_EQ(back.confusion.counts, r.confusion.counts);
}

TEST(Metrics, InvalidInputsRejected) {
  EXPECT_THROW(evaluate_predictions(std::vector<int>{}, std::vector<int>{}, names(2)), InvalidArgument);
  EXPECT_THROW(evaluate_predictions(std::vector<int>{0}, std::vector<int>{0, 1}, names(2)), InvalidArgument);
  EXPECT_THROW(evaluate_predictions(std::vector<int>{0}, std::vector<int>{5}, names(2)), InvalidArgument);
}
