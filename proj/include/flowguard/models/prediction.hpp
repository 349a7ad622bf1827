#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "flowguard/capture.hpp"

namespace flowguard {

template <typename Scalar>
using ClassVector = Eigen::Matrix<Scalar, kNumClasses, 1>;

template <typename Scalar>
using ClassMatrix = Eigen::Matrix<Scalar, kNumClasses, Eigen::Dynamic>;

/// Normalized class distribution plus its argmax and max.
template <typename Scalar>
struct BasicPrediction {
  TrafficClass label = TrafficClass::IotBenign;
  Scalar confidence = Scalar(1) / kNumClasses;
  ClassVector<Scalar> per_class = ClassVector<Scalar>::Constant(Scalar(1) / kNumClasses);

  static BasicPrediction uniform() { return {}; }

  /// Softmax over log-domain scores. Scores of -inf get probability 0; at
  /// least one score must be finite.
  template <typename Derived>
  static BasicPrediction from_scores(const Eigen::MatrixBase<Derived>& scores) {
    const Scalar top = scores.maxCoeff();
    if (!std::isfinite(static_cast<double>(top))) throw std::domain_error("prediction: no finite class score");
    BasicPrediction p;
    p.per_class = (scores.array() - top).exp().matrix();
    // vectorized exp does not map -inf to exactly 0
    p.per_class = (scores.array() == -std::numeric_limits<Scalar>::infinity()).select(Scalar(0), p.per_class.array()).matrix();
    p.per_class /= p.per_class.sum();
    p.set_argmax();
    return p;
  }

  /// Wraps an already-normalized distribution.
  static BasicPrediction from_probabilities(const ClassVector<Scalar>& probs) {
    BasicPrediction p;
    p.per_class = probs;
    p.set_argmax();
    return p;
  }

 private:
  void set_argmax() {
    // first maximum wins ties
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < kNumClasses; ++c)
      if (per_class[c] > per_class[best]) best = c;
    label = class_from_index(static_cast<int>(best));
    confidence = per_class[best];
  }
};

using Prediction = BasicPrediction<double>;

inline void check_dimension(Eigen::Index expected, Eigen::Index got, const char* who) {
  if (expected != got)
    throw std::invalid_argument(std::string(who) + ": dimension mismatch (model " + std::to_string(expected) +
                                ", input " + std::to_string(got) + ")");
}

}  // namespace flowguard
