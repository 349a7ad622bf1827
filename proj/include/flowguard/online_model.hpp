#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "flowguard/features.hpp"
#include "flowguard/models/bayes.hpp"
#include "flowguard/models/interpolate.hpp"
#include "flowguard/models/linear.hpp"

namespace flowguard {

/// What the cascade needs from a model: predict on raw (unscaled) features,
/// and produce a retrained copy. Implementations are immutable snapshots.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Prediction predict(const Eigen::VectorXd& features) const = 0;
  /// interpolate(this, partial_update(this, x, label), alpha) as a new snapshot.
  virtual std::shared_ptr<const Classifier> retrained(const Eigen::VectorXd& features, TrafficClass label,
                                                      double alpha) const = 0;
  virtual Eigen::Index input_dimension() const = 0;
};

enum class ModelKind { Sgd, Perceptron, Multinomial, Bernoulli, Gaussian };

std::string_view to_string(ModelKind k);
/// Accepts sgd, perceptron, mnb, bnb, gnb; throws std::invalid_argument.
ModelKind parse_model_kind(std::string_view name);

/// Stable hash of everything that shapes the feature vector.
std::string feature_config_hash(const WindowConfig& cfg);

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A learner plus the min-max scaler fitted on its training rows.
class OnlineModel final : public Classifier {
 public:
  using Params = std::variant<LinearModeld, BayesModeld>;

  OnlineModel(ModelKind kind, ScalerParams scaler, std::string config_hash = {}, double learning_rate = 0.01);
  OnlineModel(ModelKind kind, Params params, ScalerParams scaler, std::string config_hash = {});

  ModelKind kind() const { return kind_; }
  const Params& params() const { return params_; }
  const ScalerParams& scaler() const { return scaler_; }
  const std::string& config_hash() const { return config_hash_; }

  Eigen::VectorXd scale(const Eigen::VectorXd& raw) const { return apply_scaler(scaler_, raw); }

  Prediction predict(const Eigen::VectorXd& raw) const override;
  Prediction predict_scaled(const Eigen::VectorXd& scaled) const;

  /// One incremental step on an already-scaled sample, in place.
  void partial_fit_scaled(const Eigen::VectorXd& scaled, TrafficClass y);

  /// Copy with one partial update applied (raw features).
  OnlineModel updated(const Eigen::VectorXd& raw, TrafficClass y) const;
  OnlineModel interpolated_with(const OnlineModel& updated, double alpha) const;

  std::shared_ptr<const Classifier> retrained(const Eigen::VectorXd& raw, TrafficClass label,
                                              double alpha) const override;
  Eigen::Index input_dimension() const override { return scaler_.dimension(); }

  nlohmann::json to_json() const;
  /// Rejects unknown formats, inconsistent dimensions, a class list that
  /// differs from ours, and (when given) a config hash mismatch.
  static OnlineModel from_json(const nlohmann::json& j, std::optional<std::string> expected_config_hash = {});

  void save(const std::filesystem::path& path) const;
  static OnlineModel load(const std::filesystem::path& path, std::optional<std::string> expected_config_hash = {});

 private:
  ModelKind kind_;
  Params params_;
  ScalerParams scaler_;
  std::string config_hash_;
};

}  // namespace flowguard
