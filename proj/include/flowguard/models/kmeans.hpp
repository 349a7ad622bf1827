#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace flowguard {

struct KMeansOptions {
  int clusters = 8;
  int max_iterations = 100;
  std::uint64_t seed = 42;
};

/// Column-wise z-score; zero-variance columns become 0.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> standardize(
    const Eigen::MatrixBase<Derived>& rows) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto n = static_cast<Scalar>(rows.rows());
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mu = rows.colwise().mean();
  Mat centered = rows.rowwise() - mu;
  Eigen::Array<Scalar, 1, Eigen::Dynamic> sd = (centered.array().square().colwise().sum() / n).sqrt();
  sd = (sd > Scalar(0)).select(sd, Scalar(1));
  centered.array().rowwise() /= sd;
  return centered;
}

struct KMeansResult {
  Eigen::MatrixXd centroids;         // one row per cluster
  std::vector<int> assignment;       // cluster per row
  Eigen::VectorXd distance;          // Euclidean distance to the assigned centroid
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. k is capped at the row count.
template <typename Derived>
KMeansResult kmeans(const Eigen::MatrixBase<Derived>& points, const KMeansOptions& opts) {
  const Eigen::MatrixXd x = points.template cast<double>();
  const Eigen::Index n = x.rows();
  if (n == 0) throw std::invalid_argument("kmeans: no points");
  if (opts.clusters < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  const Eigen::Index k = std::min<Eigen::Index>(opts.clusters, n);

  std::mt19937_64 rng(opts.seed);
  KMeansResult r;
  r.centroids.resize(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  r.centroids.row(0) = x.row(first(rng));
  Eigen::VectorXd d2 = (x.rowwise() - r.centroids.row(0)).rowwise().squaredNorm();
  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        target -= d2[pick];
        if (target < 0) break;
      }
    } else {
      pick = first(rng);
    }
    r.centroids.row(c) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - r.centroids.row(c)).rowwise().squaredNorm());
  }

  r.assignment.assign(static_cast<std::size_t>(n), -1);
  Eigen::VectorXd best(n);
  for (r.iterations = 1; r.iterations <= opts.max_iterations; ++r.iterations) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index arg = 0;
      const double dist = (r.centroids.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&arg);
      best[i] = dist;
      if (r.assignment[static_cast<std::size_t>(i)] != static_cast<int>(arg)) {
        r.assignment[static_cast<std::size_t>(i)] = static_cast<int>(arg);
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(r.assignment[static_cast<std::size_t>(i)]) += x.row(i);
      counts[r.assignment[static_cast<std::size_t>(i)]] += 1;
    }
    for (Eigen::Index c = 0; c < k; ++c)
      if (counts[c] > 0) r.centroids.row(c) = sums.row(c) / counts[c];
  }
  r.iterations = std::min(r.iterations, opts.max_iterations);
  // distances against the final centroids
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index arg = 0;
    best[i] = (r.centroids.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&arg);
    r.assignment[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  r.distance = best.cwiseSqrt();
  return r;
}

/// Core-sample selection for one class: standardize, cluster, and return the
/// row indices of the `keep` samples closest to their centroid (ascending
/// index order). keep >= rows returns every row.
template <typename Derived>
std::vector<std::size_t> kmeans_select(const Eigen::MatrixBase<Derived>& rows, std::size_t keep,
                                       const KMeansOptions& opts = {}) {
  if (rows.rows() == 0) throw std::invalid_argument("kmeans_select: empty class");
  const auto n = static_cast<std::size_t>(rows.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (keep >= n) return order;

  const auto fit = kmeans(standardize(rows), opts);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fit.distance[static_cast<Eigen::Index>(a)] <
                                                              fit.distance[static_cast<Eigen::Index>(b)]; });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace flowguard
