#pragma once

#include "flowguard/models/bayes.hpp"
#include "flowguard/models/linear.hpp"

namespace flowguard {

/// alpha * old + (1 - alpha) * updated. alpha is the fraction of the old
/// parameters retained: alpha = 1 keeps `old` unchanged.
template <typename DerivedA, typename DerivedB, typename Scalar>
auto interpolate(const Eigen::MatrixBase<DerivedA>& old, const Eigen::MatrixBase<DerivedB>& updated, Scalar alpha) {
  return (alpha * old.derived() + (Scalar(1) - alpha) * updated.derived()).eval();
}

namespace detail {

template <typename Scalar>
void check_alpha(Scalar alpha) {
  if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("interpolate: alpha must lie in [0, 1]");
}

template <typename A, typename B>
void check_shape(const A& a, const B& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("interpolate: shape mismatch");
}

}  // namespace detail

template <typename Scalar>
LinearModel<Scalar> interpolate(const LinearModel<Scalar>& old, const LinearModel<Scalar>& updated, Scalar alpha) {
  detail::check_alpha(alpha);
  detail::check_shape(old.weights, updated.weights);
  if (old.kind != updated.kind) throw std::invalid_argument("interpolate: model kind mismatch");
  if (alpha == Scalar(1)) return old;
  LinearModel<Scalar> out = old;
  out.weights = interpolate(old.weights, updated.weights, alpha);
  out.bias = interpolate(old.bias, updated.bias, alpha);
  return out;
}

/// Interpolates every sufficient-statistic array the same way as linear weights.
template <typename Scalar>
BayesModel<Scalar> interpolate(const BayesModel<Scalar>& old, const BayesModel<Scalar>& updated, Scalar alpha) {
  detail::check_alpha(alpha);
  detail::check_shape(old.feature_sum, updated.feature_sum);
  detail::check_shape(old.mean, updated.mean);
  if (old.kind != updated.kind) throw std::invalid_argument("interpolate: model kind mismatch");
  if (alpha == Scalar(1)) return old;
  BayesModel<Scalar> out = old;
  out.class_count = interpolate(old.class_count, updated.class_count, alpha);
  out.feature_sum = interpolate(old.feature_sum, updated.feature_sum, alpha);
  out.mean = interpolate(old.mean, updated.mean, alpha);
  out.var = interpolate(old.var, updated.var, alpha);
  return out;
}

}  // namespace flowguard
