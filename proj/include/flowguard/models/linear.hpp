#pragma once

#include "flowguard/models/prediction.hpp"

namespace flowguard {

enum class LinearKind { LogisticSgd, Perceptron };

/// One-vs-rest linear heads: z = W x + b, one row per class.
template <typename Scalar>
struct LinearModel {
  LinearKind kind = LinearKind::LogisticSgd;
  ClassMatrix<Scalar> weights;
  ClassVector<Scalar> bias = ClassVector<Scalar>::Zero();
  Scalar learning_rate = Scalar(0.01);

  static LinearModel zeros(LinearKind kind, Eigen::Index dimension, Scalar learning_rate = Scalar(0.01)) {
    LinearModel m;
    m.kind = kind;
    m.weights = ClassMatrix<Scalar>::Zero(kNumClasses, dimension);
    m.learning_rate = learning_rate;
    return m;
  }

  Eigen::Index dimension() const { return weights.cols(); }

  template <typename Derived>
  ClassVector<Scalar> scores(const Eigen::MatrixBase<Derived>& x) const {
    check_dimension(dimension(), x.size(), "linear model");
    return weights * x + bias;
  }
};

using LinearModeld = LinearModel<double>;

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  // split to avoid exp overflow
  if (z >= 0) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// Softmax over the OvR scores.
template <typename Scalar, typename Derived>
BasicPrediction<Scalar> logistic_predict(const LinearModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  return BasicPrediction<Scalar>::from_scores(m.scores(x));
}

/// One SGD step of the binary log loss on every OvR head (target 1 for the
/// true class, 0 otherwise).
template <typename Scalar, typename Derived>
LinearModel<Scalar> logistic_update(LinearModel<Scalar> m, const Eigen::MatrixBase<Derived>& x, TrafficClass y) {
  const ClassVector<Scalar> z = m.scores(x);
  ClassVector<Scalar> residual;
  for (int c = 0; c < kNumClasses; ++c)
    residual[c] = sigmoid(z[c]) - (c == class_index(y) ? Scalar(1) : Scalar(0));
  m.weights.noalias() -= m.learning_rate * residual * x.transpose();
  m.bias -= m.learning_rate * residual;
  return m;
}

/// Label is the argmax head; confidence is the softmax of the margins.
template <typename Scalar, typename Derived>
BasicPrediction<Scalar> perceptron_predict(const LinearModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  return BasicPrediction<Scalar>::from_scores(m.scores(x));
}

/// Mistake-driven update per head: a head predicts +1 when z >= 0. Heads whose
/// sign disagrees with the OvR target move by +-x and +-1.
template <typename Scalar, typename Derived>
LinearModel<Scalar> perceptron_update(LinearModel<Scalar> m, const Eigen::MatrixBase<Derived>& x, TrafficClass y) {
  const ClassVector<Scalar> z = m.scores(x);
  for (int c = 0; c < kNumClasses; ++c) {
    const bool target = c == class_index(y);
    const bool predicted = z[c] >= Scalar(0);
    if (target == predicted) continue;
    const Scalar sign = target ? Scalar(1) : Scalar(-1);
    m.weights.row(c) += sign * x.transpose();
    m.bias[c] += sign;
  }
  return m;
}

template <typename Scalar, typename Derived>
BasicPrediction<Scalar> predict(const LinearModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  return m.kind == LinearKind::LogisticSgd ? logistic_predict(m, x) : perceptron_predict(m, x);
}

template <typename Scalar, typename Derived>
LinearModel<Scalar> partial_update(const LinearModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x, TrafficClass y) {
  return m.kind == LinearKind::LogisticSgd ? logistic_update(m, x, y) : perceptron_update(m, x, y);
}

}  // namespace flowguard
