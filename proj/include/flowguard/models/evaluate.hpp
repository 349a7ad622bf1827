#pragma once

#include <Eigen/Core>

#include <concepts>
#include <cstdint>
#include <stdexcept>

#include "flowguard/capture.hpp"

namespace flowguard {

using ConfusionMatrix = Eigen::Matrix<std::int64_t, kNumClasses, kNumClasses>;

/// Confusion-matrix metrics. Rows are the true class, columns the prediction.
/// Precision/recall/F1 of a class with no support (or no predictions) are 0.
struct EvalReport {
  ConfusionMatrix confusion = ConfusionMatrix::Zero();
  double accuracy = 0;
  Eigen::Vector4d precision = Eigen::Vector4d::Zero();
  Eigen::Vector4d recall = Eigen::Vector4d::Zero();
  Eigen::Vector4d f1 = Eigen::Vector4d::Zero();
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
  std::int64_t correct_predictions = 0;
  std::int64_t wrong_predictions = 0;
  double error_rate = 0;

  std::int64_t total() const { return correct_predictions + wrong_predictions; }

  static EvalReport from_confusion(const ConfusionMatrix& m) {
    EvalReport r;
    r.confusion = m;
    r.correct_predictions = m.trace();
    r.wrong_predictions = m.sum() - r.correct_predictions;
    const auto total = static_cast<double>(r.total());
    r.accuracy = total > 0 ? static_cast<double>(r.correct_predictions) / total : 0.0;
    r.error_rate = total > 0 ? static_cast<double>(r.wrong_predictions) / total : 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      const auto tp = static_cast<double>(m(c, c));
      const auto predicted = static_cast<double>(m.col(c).sum());
      const auto actual = static_cast<double>(m.row(c).sum());
      r.precision[c] = predicted > 0 ? tp / predicted : 0.0;
      r.recall[c] = actual > 0 ? tp / actual : 0.0;
      const double pr = r.precision[c] + r.recall[c];
      r.f1[c] = pr > 0 ? 2 * r.precision[c] * r.recall[c] / pr : 0.0;
    }
    r.macro_precision = r.precision.mean();
    r.macro_recall = r.recall.mean();
    r.macro_f1 = r.f1.mean();
    return r;
  }
};

/// WP / (CP + WP).
inline double error_rate(std::int64_t correct, std::int64_t wrong) {
  const auto total = correct + wrong;
  return total > 0 ? static_cast<double>(wrong) / static_cast<double>(total) : 0.0;
}

/// Evaluates `predict(x) -> Prediction` over a range of (features, TrafficClass) pairs.
template <typename PredictFn, typename Range>
  requires std::invocable<PredictFn&, const Eigen::VectorXd&>
EvalReport evaluate(PredictFn&& predict, const Range& labeled) {
  ConfusionMatrix m = ConfusionMatrix::Zero();
  std::size_t n = 0;
  for (const auto& [x, y] : labeled) {
    const auto p = predict(x);
    ++m(class_index(y), class_index(p.label));
    ++n;
  }
  if (n == 0) throw std::invalid_argument("evaluate: empty test set");
  return EvalReport::from_confusion(m);
}

}  // namespace flowguard
