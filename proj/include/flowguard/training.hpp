#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flowguard/models/evaluate.hpp"
#include "flowguard/models/kmeans.hpp"
#include "flowguard/online_model.hpp"

namespace flowguard {

enum class ModelRole { M1, M2 };

struct TrainOptions {
  ModelKind kind = ModelKind::Perceptron;
  ModelRole role = ModelRole::M1;
  // M1 core-sample budget per class (K-Means selection).
  std::size_t per_class = 100000;
  KMeansOptions kmeans;
  double train_fraction = 0.75;
  // Passes over the training split; Bayes models are exact after one pass.
  int epochs = 10;
  double learning_rate = 0.01;
  std::uint64_t seed = 42;
  std::string config_hash;
};

struct TrainResult {
  OnlineModel model;
  std::size_t selected_rows = 0;  // rows surviving M1 selection (all rows for M2)
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  EvalReport report;  // on the held-out split
};

/// M1: K-Means core samples per class, then split. M2: split all rows.
/// The scaler is fitted on the training split only. Throws on unlabeled rows.
TrainResult train_model(std::span<const FeatureVector> rows, const TrainOptions& opts);

/// Fits `model` (already carrying its scaler) on raw rows for `epochs` passes,
/// shuffling with `seed` between passes.
void fit(OnlineModel& model, std::span<const FeatureVector> rows, int epochs, std::uint64_t seed);

EvalReport evaluate(const Classifier& model, std::span<const FeatureVector> rows);

}  // namespace flowguard
