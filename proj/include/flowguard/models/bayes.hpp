#pragma once

#include <numbers>

#include "flowguard/models/prediction.hpp"

namespace flowguard {

enum class BayesKind { Multinomial, Bernoulli, Gaussian };

/// Naive Bayes sufficient statistics.
///
/// class_count holds N[c]. feature_sum holds the per-class feature totals
/// (multinomial) or per-class "on" counts of the binarized input (Bernoulli).
/// Gaussian models keep a running mean and population variance per class and
/// dimension; variances are floored at var_floor when scoring.
///
/// A model that has seen no samples predicts the uniform distribution.
/// Classes with N[c] = 0 get prior 0 once any class has data.
template <typename Scalar>
struct BayesModel {
  BayesKind kind = BayesKind::Multinomial;
  ClassVector<Scalar> class_count = ClassVector<Scalar>::Zero();
  ClassMatrix<Scalar> feature_sum;
  ClassMatrix<Scalar> mean;
  ClassMatrix<Scalar> var;
  Scalar smoothing = Scalar(1);
  Scalar var_floor = Scalar(1e-9);

  static BayesModel empty(BayesKind kind, Eigen::Index dimension) {
    BayesModel m;
    m.kind = kind;
    m.feature_sum = ClassMatrix<Scalar>::Zero(kNumClasses, dimension);
    m.mean = ClassMatrix<Scalar>::Zero(kNumClasses, dimension);
    m.var = ClassMatrix<Scalar>::Zero(kNumClasses, dimension);
    return m;
  }

  Eigen::Index dimension() const { return feature_sum.cols(); }
  Scalar samples() const { return class_count.sum(); }

  ClassVector<Scalar> log_prior() const {
    const Scalar total = samples();
    ClassVector<Scalar> lp;
    for (int c = 0; c < kNumClasses; ++c)
      lp[c] = class_count[c] > 0 ? std::log(class_count[c] / total) : -std::numeric_limits<Scalar>::infinity();
    return lp;
  }
};

using BayesModeld = BayesModel<double>;

namespace detail {

template <typename Derived>
void require_non_negative(const Eigen::MatrixBase<Derived>& x, const char* who) {
  if ((x.array() < 0).any()) throw std::invalid_argument(std::string(who) + ": negative feature value");
}

}  // namespace detail

// --- multinomial ------------------------------------------------------------

template <typename Scalar, typename Derived>
BayesModel<Scalar> mnb_update(BayesModel<Scalar> m, const Eigen::MatrixBase<Derived>& x, TrafficClass y) {
  check_dimension(m.dimension(), x.size(), "mnb_update");
  detail::require_non_negative(x, "mnb_update");
  m.feature_sum.row(class_index(y)) += x.transpose();
  m.class_count[class_index(y)] += 1;
  return m;
}

/// Scores log P(C_k) + sum_d x_d log theta_kd with Laplace-smoothed
/// theta_kd = (F_kd + a) / (sum_d F_kd + a D).
template <typename Scalar, typename Derived>
ClassVector<Scalar> mnb_log_scores(const BayesModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  check_dimension(m.dimension(), x.size(), "mnb_predict");
  detail::require_non_negative(x, "mnb_predict");
  const auto d = static_cast<Scalar>(m.dimension());
  ClassVector<Scalar> s = m.log_prior();
  for (int c = 0; c < kNumClasses; ++c) {
    if (m.class_count[c] <= 0) continue;
    const Scalar denom = m.feature_sum.row(c).sum() + m.smoothing * d;
    s[c] += (x.transpose().array() * ((m.feature_sum.row(c).array() + m.smoothing) / denom).log()).sum();
  }
  return s;
}

template <typename Scalar, typename Derived>
BasicPrediction<Scalar> mnb_predict(const BayesModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  if (m.samples() <= 0) {
    check_dimension(m.dimension(), x.size(), "mnb_predict");
    detail::require_non_negative(x, "mnb_predict");
    return BasicPrediction<Scalar>::uniform();
  }
  return BasicPrediction<Scalar>::from_scores(mnb_log_scores(m, x));
}

// --- Bernoulli --------------------------------------------------------------

/// Inputs are binarized: x_d > 0 counts as on.
template <typename Derived>
auto binarize(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return (x.array() > Scalar(0)).template cast<Scalar>();
}

template <typename Scalar, typename Derived>
BayesModel<Scalar> bnb_update(BayesModel<Scalar> m, const Eigen::MatrixBase<Derived>& x, TrafficClass y) {
  check_dimension(m.dimension(), x.size(), "bnb_update");
  m.feature_sum.row(class_index(y)) += binarize(x).matrix().transpose();
  m.class_count[class_index(y)] += 1;
  return m;
}

/// P(on | c) = (on_cd + a) / (N_c + 2a); standard Bernoulli likelihood over
/// all dimensions, including the off ones.
template <typename Scalar, typename Derived>
ClassVector<Scalar> bnb_log_scores(const BayesModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  check_dimension(m.dimension(), x.size(), "bnb_predict");
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> on = binarize(x).transpose();
  ClassVector<Scalar> s = m.log_prior();
  for (int c = 0; c < kNumClasses; ++c) {
    if (m.class_count[c] <= 0) continue;
    const auto p = (m.feature_sum.row(c).array() + m.smoothing) / (m.class_count[c] + 2 * m.smoothing);
    s[c] += (on * p.log() + (1 - on) * (1 - p).log()).sum();
  }
  return s;
}

template <typename Scalar, typename Derived>
BasicPrediction<Scalar> bnb_predict(const BayesModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  if (m.samples() <= 0) {
    check_dimension(m.dimension(), x.size(), "bnb_predict");
    return BasicPrediction<Scalar>::uniform();
  }
  return BasicPrediction<Scalar>::from_scores(bnb_log_scores(m, x));
}

// --- Gaussian ---------------------------------------------------------------

/// Incremental mean and population variance (Welford form). Works with
/// fractional counts left behind by interpolation.
template <typename Scalar, typename Derived>
BayesModel<Scalar> gnb_update(BayesModel<Scalar> m, const Eigen::MatrixBase<Derived>& x, TrafficClass y) {
  check_dimension(m.dimension(), x.size(), "gnb_update");
  const int c = class_index(y);
  const Scalar n_old = m.class_count[c];
  const Scalar n_new = n_old + 1;
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> xr = x.transpose().array();
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> delta = xr - m.mean.row(c).array();
  m.mean.row(c).array() += delta / n_new;
  m.var.row(c).array() = (n_old * m.var.row(c).array() + delta * (xr - m.mean.row(c).array())) / n_new;
  m.class_count[c] = n_new;
  return m;
}

template <typename Scalar, typename Derived>
ClassVector<Scalar> gnb_log_scores(const BayesModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  check_dimension(m.dimension(), x.size(), "gnb_predict");
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> xr = x.transpose().array();
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  ClassVector<Scalar> s = m.log_prior();
  for (int c = 0; c < kNumClasses; ++c) {
    if (m.class_count[c] <= 0) continue;
    const auto v = m.var.row(c).array().max(m.var_floor);
    s[c] += Scalar(-0.5) * ((two_pi * v).log() + (xr - m.mean.row(c).array()).square() / v).sum();
  }
  return s;
}

template <typename Scalar, typename Derived>
BasicPrediction<Scalar> gnb_predict(const BayesModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  if (m.samples() <= 0) {
    check_dimension(m.dimension(), x.size(), "gnb_predict");
    return BasicPrediction<Scalar>::uniform();
  }
  return BasicPrediction<Scalar>::from_scores(gnb_log_scores(m, x));
}

/// Normal density, the per-dimension Gaussian likelihood.
template <typename Scalar>
Scalar gaussian_density(Scalar x, Scalar mean, Scalar variance) {
  return std::exp(-(x - mean) * (x - mean) / (2 * variance)) / std::sqrt(2 * std::numbers::pi_v<Scalar> * variance);
}

// --- dispatch ---------------------------------------------------------------

template <typename Scalar, typename Derived>
BasicPrediction<Scalar> predict(const BayesModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  switch (m.kind) {
    case BayesKind::Multinomial:
      return mnb_predict(m, x);
    case BayesKind::Bernoulli:
      return bnb_predict(m, x);
    case BayesKind::Gaussian:
      return gnb_predict(m, x);
  }
  throw std::logic_error("unknown Bayes kind");
}

template <typename Scalar, typename Derived>
BayesModel<Scalar> partial_update(const BayesModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x, TrafficClass y) {
  switch (m.kind) {
    case BayesKind::Multinomial:
      return mnb_update(m, x, y);
    case BayesKind::Bernoulli:
      return bnb_update(m, x, y);
    case BayesKind::Gaussian:
      return gnb_update(m, x, y);
  }
  throw std::logic_error("unknown Bayes kind");
}

}  // namespace flowguard
