#include "flowguard/training.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace flowguard {

void fit(OnlineModel& model, std::span<const FeatureVector> rows, int epochs, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> scaled;
  scaled.reserve(rows.size());
  for (const auto& r : rows) {
    if (!r.label) throw std::invalid_argument("fit: unlabeled row");
    scaled.push_back(model.scale(r.values));
  }
  const bool linear = model.kind() == ModelKind::Sgd || model.kind() == ModelKind::Perceptron;
  const int passes = linear ? std::max(epochs, 1) : 1;
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (int e = 0; e < passes; ++e) {
    if (linear) std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) model.partial_fit_scaled(scaled[i], *rows[i].label);
  }
}

EvalReport evaluate(const Classifier& model, std::span<const FeatureVector> rows) {
  std::vector<std::pair<Eigen::VectorXd, TrafficClass>> labeled;
  labeled.reserve(rows.size());
  for (const auto& r : rows) {
    if (!r.label) throw std::invalid_argument("evaluate: unlabeled row");
    labeled.emplace_back(r.values, *r.label);
  }
  return evaluate([&](const Eigen::VectorXd& x) { return model.predict(x); }, labeled);
}

TrainResult train_model(std::span<const FeatureVector> rows, const TrainOptions& opts) {
  if (rows.empty()) throw std::invalid_argument("train: no rows");
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!rows[i].label) throw std::invalid_argument("train: row " + std::to_string(i) + " is unlabeled");

  std::vector<std::size_t> selected;
  if (opts.role == ModelRole::M1) {
    for (auto c : kAllClasses) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (*rows[i].label == c) members.push_back(i);
      if (members.empty()) continue;
      Eigen::MatrixXd block(static_cast<Eigen::Index>(members.size()), rows.front().values.size());
      for (std::size_t r = 0; r < members.size(); ++r)
        block.row(static_cast<Eigen::Index>(r)) = rows[members[r]].values.transpose();
      KMeansOptions km = opts.kmeans;
      km.seed = opts.seed + static_cast<std::uint64_t>(class_index(c));
      for (auto local : kmeans_select(block, opts.per_class, km)) selected.push_back(members[local]);
    }
    std::sort(selected.begin(), selected.end());
  } else {
    selected.resize(rows.size());
    std::iota(selected.begin(), selected.end(), std::size_t{0});
  }

  std::mt19937_64 rng(opts.seed);
  std::shuffle(selected.begin(), selected.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(opts.train_fraction * static_cast<double>(selected.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, selected.size());

  std::vector<FeatureVector> train, test;
  for (std::size_t i = 0; i < selected.size(); ++i) (i < n_train ? train : test).push_back(rows[selected[i]]);

  OnlineModel model(opts.kind, fit_scaler(std::span<const FeatureVector>(train)), opts.config_hash, opts.learning_rate);
  fit(model, train, opts.epochs, opts.seed);

  TrainResult result{std::move(model), selected.size(), train.size(), test.size(), {}};
  if (!test.empty()) result.report = evaluate(result.model, test);
  return result;
}

}  // namespace flowguard
