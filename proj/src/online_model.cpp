#include "flowguard/online_model.hpp"

#include <fstream>
#include <sstream>

namespace flowguard {

namespace {

constexpr std::string_view kFormat = "flowguard-model";
constexpr int kVersion = 1;

bool is_linear(ModelKind k) { return k == ModelKind::Sgd || k == ModelKind::Perceptron; }

BayesKind bayes_kind(ModelKind k) {
  switch (k) {
    case ModelKind::Multinomial:
      return BayesKind::Multinomial;
    case ModelKind::Bernoulli:
      return BayesKind::Bernoulli;
    case ModelKind::Gaussian:
      return BayesKind::Gaussian;
    default:
      throw std::logic_error("not a Bayes kind");
  }
}

template <typename Derived>
nlohmann::json matrix_json(const Eigen::MatrixBase<Derived>& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Derived>
nlohmann::json vector_json(const Eigen::MatrixBase<Derived>& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from(const nlohmann::json& j, Eigen::Index expected, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != expected)
    throw ModelFormatError(std::string("model file: '") + what + "' must have " + std::to_string(expected) + " entries");
  Eigen::VectorXd v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

ClassMatrix<double> matrix_from(const nlohmann::json& j, Eigen::Index cols, const char* what) {
  if (!j.is_array() || j.size() != kNumClasses)
    throw ModelFormatError(std::string("model file: '") + what + "' must have " + std::to_string(kNumClasses) + " rows");
  ClassMatrix<double> m(kNumClasses, cols);
  for (int r = 0; r < kNumClasses; ++r) m.row(r) = vector_from(j[static_cast<std::size_t>(r)], cols, what).transpose();
  return m;
}

}  // namespace

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Sgd:
      return "sgd";
    case ModelKind::Perceptron:
      return "perceptron";
    case ModelKind::Multinomial:
      return "mnb";
    case ModelKind::Bernoulli:
      return "bnb";
    case ModelKind::Gaussian:
      return "gnb";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::Sgd, ModelKind::Perceptron, ModelKind::Multinomial, ModelKind::Bernoulli,
                 ModelKind::Gaussian})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "' (sgd, perceptron, mnb, bnb, gnb)");
}

std::string feature_config_hash(const WindowConfig& cfg) {
  std::ostringstream canon;
  canon.precision(17);
  canon << "pi=" << cfg.processing_interval << ";apst=" << cfg.abnormal_size_threshold
        << ";pft=" << cfg.port_frequency_threshold << ";slct=" << cfg.short_lived_threshold
        << ";slflag=" << cfg.short_lived_requires_flag << ";group=" << cfg.group_by_source
        << ";addr=" << (cfg.address_encoding == AddressEncoding::LastOctet ? "last_octet" : "drop")
        << ";dim=" << kFeatureDimension << ";cols=";
  for (auto n : feature_names()) canon << n << ',';
  std::uint64_t h = 1469598103934665603ull;
  for (char c : canon.str()) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

OnlineModel::OnlineModel(ModelKind kind, ScalerParams scaler, std::string config_hash, double learning_rate)
    : kind_(kind), scaler_(std::move(scaler)), config_hash_(std::move(config_hash)) {
  const auto d = scaler_.dimension();
  if (kind == ModelKind::Sgd)
    params_ = LinearModeld::zeros(LinearKind::LogisticSgd, d, learning_rate);
  else if (kind == ModelKind::Perceptron)
    params_ = LinearModeld::zeros(LinearKind::Perceptron, d, learning_rate);
  else
    params_ = BayesModeld::empty(bayes_kind(kind), d);
}

OnlineModel::OnlineModel(ModelKind kind, Params params, ScalerParams scaler, std::string config_hash)
    : kind_(kind), params_(std::move(params)), scaler_(std::move(scaler)), config_hash_(std::move(config_hash)) {
  const auto d = std::visit([](const auto& m) { return m.dimension(); }, params_);
  if (d != scaler_.dimension()) throw std::invalid_argument("OnlineModel: scaler and model dimensions differ");
  if (is_linear(kind) != std::holds_alternative<LinearModeld>(params_))
    throw std::invalid_argument("OnlineModel: parameters do not match kind");
}

Prediction OnlineModel::predict_scaled(const Eigen::VectorXd& x) const {
  return std::visit([&](const auto& m) { return flowguard::predict(m, x); }, params_);
}

Prediction OnlineModel::predict(const Eigen::VectorXd& raw) const { return predict_scaled(scale(raw)); }

void OnlineModel::partial_fit_scaled(const Eigen::VectorXd& x, TrafficClass y) {
  std::visit([&](auto& m) { m = partial_update(m, x, y); }, params_);
}

OnlineModel OnlineModel::updated(const Eigen::VectorXd& raw, TrafficClass y) const {
  OnlineModel out = *this;
  out.partial_fit_scaled(scale(raw), y);
  return out;
}

OnlineModel OnlineModel::interpolated_with(const OnlineModel& upd, double alpha) const {
  OnlineModel out = *this;
  std::visit(
      [&](auto& m) {
        using M = std::decay_t<decltype(m)>;
        m = interpolate(m, std::get<M>(upd.params_), alpha);
      },
      out.params_);
  return out;
}

std::shared_ptr<const Classifier> OnlineModel::retrained(const Eigen::VectorXd& raw, TrafficClass label,
                                                         double alpha) const {
  return std::make_shared<const OnlineModel>(interpolated_with(updated(raw, label), alpha));
}

nlohmann::json OnlineModel::to_json() const {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["kind"] = to_string(kind_);
  j["dimension"] = scaler_.dimension();
  auto classes = nlohmann::json::array();
  for (auto c : kAllClasses) classes.push_back(to_string(c));
  j["classes"] = classes;
  j["config_hash"] = config_hash_;
  j["scaler"] = {{"min", vector_json(scaler_.min)}, {"max", vector_json(scaler_.max)}};
  if (const auto* lin = std::get_if<LinearModeld>(&params_)) {
    j["learning_rate"] = lin->learning_rate;
    j["weights"] = matrix_json(lin->weights);
    j["bias"] = vector_json(lin->bias);
  } else {
    const auto& b = std::get<BayesModeld>(params_);
    j["smoothing"] = b.smoothing;
    j["var_floor"] = b.var_floor;
    j["class_count"] = vector_json(b.class_count);
    j["feature_sum"] = matrix_json(b.feature_sum);
    j["mean"] = matrix_json(b.mean);
    j["var"] = matrix_json(b.var);
  }
  return j;
}

OnlineModel OnlineModel::from_json(const nlohmann::json& j, std::optional<std::string> expected_config_hash) {
  try {
    if (j.value("format", "") != kFormat) throw ModelFormatError("model file: unrecognized format");
    if (j.value("version", 0) != kVersion)
      throw ModelFormatError("model file: unsupported version " + std::to_string(j.value("version", 0)));
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto d = j.at("dimension").get<Eigen::Index>();
    const auto& classes = j.at("classes");
    if (classes.size() != kNumClasses) throw ModelFormatError("model file: class list mismatch");
    for (int c = 0; c < kNumClasses; ++c)
      if (classes[static_cast<std::size_t>(c)].get<std::string>() != to_string(class_from_index(c)))
        throw ModelFormatError("model file: class list mismatch");
    const auto hash = j.value("config_hash", std::string{});
    if (expected_config_hash && hash != *expected_config_hash)
      throw ModelFormatError("model file: feature config hash " + hash + " does not match " + *expected_config_hash);

    ScalerParams scaler{vector_from(j.at("scaler").at("min"), d, "scaler.min"),
                        vector_from(j.at("scaler").at("max"), d, "scaler.max")};
    if ((scaler.min.array() > scaler.max.array()).any()) throw ModelFormatError("model file: scaler min > max");

    Params params;
    if (is_linear(kind)) {
      LinearModeld m;
      m.kind = kind == ModelKind::Sgd ? LinearKind::LogisticSgd : LinearKind::Perceptron;
      m.learning_rate = j.at("learning_rate").get<double>();
      m.weights = matrix_from(j.at("weights"), d, "weights");
      m.bias = vector_from(j.at("bias"), kNumClasses, "bias");
      params = m;
    } else {
      BayesModeld m = BayesModeld::empty(bayes_kind(kind), d);
      m.smoothing = j.at("smoothing").get<double>();
      m.var_floor = j.at("var_floor").get<double>();
      m.class_count = vector_from(j.at("class_count"), kNumClasses, "class_count");
      m.feature_sum = matrix_from(j.at("feature_sum"), d, "feature_sum");
      m.mean = matrix_from(j.at("mean"), d, "mean");
      m.var = matrix_from(j.at("var"), d, "var");
      params = m;
    }
    return OnlineModel(kind, std::move(params), std::move(scaler), hash);
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("model file: ") + e.what());
  }
}

void OnlineModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << to_json().dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

OnlineModel OnlineModel::load(const std::filesystem::path& path, std::optional<std::string> expected_config_hash) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(path.string() + ": " + e.what());
  }
  return from_json(j, std::move(expected_config_hash));
}

}  // namespace flowguard
