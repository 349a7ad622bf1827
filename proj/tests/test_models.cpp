#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "flowguard/models/bayes.hpp"
#include "flowguard/models/evaluate.hpp"
#include "flowguard/models/interpolate.hpp"
#include "flowguard/models/kmeans.hpp"
#include "flowguard/models/linear.hpp"
#include "support/bayes_oracle.hpp"

using namespace flowguard;
using namespace bayes_oracle;

namespace {

constexpr auto A = TrafficClass::IotBenign;
constexpr auto B = TrafficClass::IotMalicious;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

void check_prediction_shape(const Prediction& p) {
  CHECK(p.per_class.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(p.confidence == p.per_class.maxCoeff());
  int first = 0;
  for (int c = 1; c < kNumClasses; ++c)
    if (p.per_class[c] > p.per_class[first]) first = c;
  CHECK(class_index(p.label) == first);
}

}  // namespace

// --- logistic SGD -------------------------------------------------------------

TEST_CASE("logistic: zero model predicts uniform") {
  const auto m = LinearModeld::zeros(LinearKind::LogisticSgd, 3);
  const auto p = logistic_predict(m, vec({0.3, 0.1, 0.9}));
  for (int c = 0; c < kNumClasses; ++c) CHECK(p.per_class[c] == doctest::Approx(0.25));
  CHECK(p.confidence == doctest::Approx(0.25));
  CHECK(p.label == A);
}

TEST_CASE("logistic: a dominant score takes nearly all the mass") {
  auto m = LinearModeld::zeros(LinearKind::LogisticSgd, 1);
  m.bias[2] = 10;
  const auto p = logistic_predict(m, vec({0.0}));
  CHECK(p.label == class_from_index(2));
  // e^10 / (e^10 + 3)
  CHECK(p.per_class[2] == doctest::Approx(std::exp(10.0) / (std::exp(10.0) + 3)));
  CHECK(p.per_class[2] > 0.99);
}

TEST_CASE("logistic: prediction is deterministic") {
  auto m = LinearModeld::zeros(LinearKind::LogisticSgd, 2);
  m.weights << 1, 2, -1, 0, 0.5, 0.5, 3, -2;
  const auto x = vec({0.2, 0.7});
  const auto a = logistic_predict(m, x), b = logistic_predict(m, (1.0 * x).eval());
  CHECK(a.per_class == b.per_class);
}

TEST_CASE("logistic: worked gradient step") {
  auto m = LinearModeld::zeros(LinearKind::LogisticSgd, 1, 0.1);
  const auto u = logistic_update(m, vec({1.0}), B);
  // sigma(0) = 0.5; target head moves +0.05, the rest -0.05
  for (int c = 0; c < kNumClasses; ++c) {
    const double expect = c == class_index(B) ? 0.05 : -0.05;
    CHECK(u.weights(c, 0) == doctest::Approx(expect).epsilon(1e-15));
    CHECK(u.bias[c] == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("logistic: zero input only moves the bias") {
  auto m = LinearModeld::zeros(LinearKind::LogisticSgd, 4, 0.1);
  m.weights.setConstant(0.3);
  const auto u = logistic_update(m, Eigen::VectorXd::Zero(4), A);
  CHECK(u.weights == m.weights);
  CHECK(u.bias != m.bias);
}

TEST_CASE("logistic: repeated updates descend the loss") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = LinearModeld::zeros(LinearKind::LogisticSgd, 5, 0.05);
    for (int i = 0; i < m.weights.size(); ++i) m.weights.data()[i] = u(rng) - 0.5;
    Eigen::VectorXd x(5);
    for (auto& v : x) v = u(rng);
    const auto y = class_from_index(trial % kNumClasses);
    const auto z0 = m.scores(x);
    const auto m1 = logistic_update(m, x, y);
    const auto m2 = logistic_update(m1, x, y);
    const auto z1 = m1.scores(x), z2 = m2.scores(x);
    for (int c = 0; c < kNumClasses; ++c) {
      if (c == class_index(y)) {
        CHECK(z1[c] > z0[c]);
        CHECK(z2[c] > z1[c]);
      } else {
        CHECK(z1[c] < z0[c]);
        CHECK(z2[c] < z1[c]);
      }
    }
  }
}

TEST_CASE("logistic: dimension mismatch throws") {
  const auto m = LinearModeld::zeros(LinearKind::LogisticSgd, 3);
  CHECK_THROWS_AS(logistic_predict(m, vec({1, 2})), std::invalid_argument);
  CHECK_THROWS_AS(logistic_update(m, vec({1, 2}), A), std::invalid_argument);
}

TEST_CASE("scores shifted by a constant give the same distribution") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0, 3);
  for (int i = 0; i < 200; ++i) {
    ClassVector<double> z;
    for (auto& v : z) v = g(rng);
    const double shift = g(rng) * 10;
    const auto a = Prediction::from_scores(z);
    const auto b = Prediction::from_scores((z.array() + shift).matrix());
    CHECK((a.per_class - b.per_class).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.label == b.label);
  }
}

TEST_CASE("ties go to the smallest class index") {
  ClassVector<double> z(0, 1, 1, 0);
  CHECK(class_index(Prediction::from_scores(z).label) == 1);
}

// --- perceptron ---------------------------------------------------------------

TEST_CASE("perceptron: head threshold at zero") {
  auto m = LinearModeld::zeros(LinearKind::Perceptron, 2);
  m.weights.row(0) << 1, -1;
  const auto z = m.scores(vec({2, 1}));
  CHECK(z[0] == 1.0);
  CHECK(z[0] >= 0);
  // only head 0 is positive, so it takes the label
  CHECK(perceptron_predict(m, vec({2, 1})).label == A);
  // the boundary z = 0 counts as positive: no update for a target head there
  auto zero = LinearModeld::zeros(LinearKind::Perceptron, 2);
  const auto u = perceptron_update(zero, vec({1, 1}), A);
  CHECK(u.weights.row(0).isZero());
  CHECK(u.bias[0] == 0);
}

TEST_CASE("perceptron: correct prediction leaves the model untouched") {
  auto m = LinearModeld::zeros(LinearKind::Perceptron, 2);
  m.weights << 1, 0, -1, 0, -1, 0, -1, 0;
  m.bias << 0, -1, -1, -1;
  const auto x = vec({2, 5});
  REQUIRE(perceptron_predict(m, x).label == A);
  const auto u = perceptron_update(m, x, A);
  CHECK(u.weights == m.weights);
  CHECK(u.bias == m.bias);
}

TEST_CASE("perceptron: only disagreeing heads move") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    auto m = LinearModeld::zeros(LinearKind::Perceptron, 3);
    for (int i = 0; i < m.weights.size(); ++i) m.weights.data()[i] = u(rng);
    for (auto& b : m.bias) b = u(rng);
    const auto x = vec({u(rng), u(rng), u(rng)});
    const auto y = class_from_index(trial % kNumClasses);
    const auto z = m.scores(x);
    const auto n = perceptron_update(m, x, y);
    for (int c = 0; c < kNumClasses; ++c) {
      const bool wrong = (z[c] >= 0) != (c == class_index(y));
      if (wrong) {
        const double s = c == class_index(y) ? 1 : -1;
        CHECK((n.weights.row(c) - m.weights.row(c) - s * x.transpose()).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(n.bias[c] - m.bias[c] == doctest::Approx(s));
      } else {
        CHECK(n.weights.row(c) == m.weights.row(c));
        CHECK(n.bias[c] == m.bias[c]);
      }
    }
  }
}

TEST_CASE("perceptron: separable 20-point set converges within 50 epochs") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<std::pair<Eigen::VectorXd, TrafficClass>> data;
  for (int i = 0; i < 10; ++i) data.emplace_back(vec({u(rng), u(rng)}), A);
  for (int i = 0; i < 10; ++i) data.emplace_back(vec({-u(rng), -u(rng)}), B);

  auto m = LinearModeld::zeros(LinearKind::Perceptron, 2);
  int epoch = 0;
  for (; epoch < 50; ++epoch) {
    int mistakes = 0;
    for (const auto& [x, y] : data) {
      const auto n = perceptron_update(m, x, y);
      if (n.weights != m.weights || n.bias != m.bias) ++mistakes;
      m = n;
    }
    if (mistakes == 0) break;
  }
  CHECK(epoch < 50);
  const auto report = evaluate([&](const Eigen::VectorXd& x) { return perceptron_predict(m, x); }, data);
  CHECK(report.accuracy == 1.0);
}

// --- multinomial / Bernoulli -------------------------------------------------

TEST_CASE("mnb: posteriors equal the exact Bayes table") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> val(0, 3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto corpus = random_corpus(rng, 3);
    auto m = BayesModeld::empty(BayesKind::Multinomial, 3);
    for (const auto& s : corpus) m = mnb_update(m, to_vec(s.x), class_from_index(s.y));
    const std::vector<int> q = {val(rng), val(rng), val(rng)};
    const auto table = mnb_table(corpus, q);
    const auto p = mnb_predict(m, to_vec(q));
    for (int c = 0; c < kNumClasses; ++c)
      CHECK(std::abs(p.per_class[c] - table[c].convert_to<double>()) < 1e-12);
    const auto exact = exact_argmax(table);
    // the exact maximum is unique unless the table has ties
    if (std::count(table.begin(), table.end(), table[exact]) == 1) CHECK(class_index(p.label) == exact);
  }
}

TEST_CASE("bnb: posteriors equal the exact Bayes table") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> val(0, 2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto corpus = random_corpus(rng, 4);
    auto m = BayesModeld::empty(BayesKind::Bernoulli, 4);
    for (const auto& s : corpus) m = bnb_update(m, to_vec(s.x), class_from_index(s.y));
    const std::vector<int> q = {val(rng), val(rng), val(rng), val(rng)};
    const auto table = bnb_table(corpus, q);
    const auto p = bnb_predict(m, to_vec(q));
    for (int c = 0; c < kNumClasses; ++c)
      CHECK(std::abs(p.per_class[c] - table[c].convert_to<double>()) < 1e-12);
    const auto exact = exact_argmax(table);
    if (std::count(table.begin(), table.end(), table[exact]) == 1) CHECK(class_index(p.label) == exact);
  }
}

TEST_CASE("bnb: hand table on a 4-sample corpus") {
  // A: [1,0], [1,1]; B: [0,1], [0,0]. Query [1,0].
  // P(on|A) = (3/4, 2/4), P(on|B) = (1/4, 2/4); both priors 1/2.
  // A: 3/4 * 2/4 = 3/8, B: 1/4 * 2/4 = 1/8 -> P(A|q) = 3/4.
  auto m = BayesModeld::empty(BayesKind::Bernoulli, 2);
  m = bnb_update(m, vec({1, 0}), A);
  m = bnb_update(m, vec({1, 1}), A);
  m = bnb_update(m, vec({0, 1}), B);
  m = bnb_update(m, vec({0, 0}), B);
  const auto p = bnb_predict(m, vec({1, 0}));
  CHECK(p.label == A);
  CHECK(p.per_class[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(p.per_class[1] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p.per_class[2] == 0);
  CHECK(p.per_class[3] == 0);
}

TEST_CASE("mnb: two-class hand example") {
  // A: [3,0], B: [0,3]; theta_A = (4/5, 1/5), theta_B = (1/5, 4/5).
  auto m = BayesModeld::empty(BayesKind::Multinomial, 2);
  m = mnb_update(m, vec({3, 0}), A);
  m = mnb_update(m, vec({0, 3}), B);
  const auto p = mnb_predict(m, vec({1, 0}));
  CHECK(p.label == A);
  CHECK(p.per_class[0] == doctest::Approx(0.8).epsilon(1e-14));
}

TEST_CASE("naive Bayes: symmetric corpus gives the uniform posterior") {
  for (auto kind : {BayesKind::Multinomial, BayesKind::Bernoulli, BayesKind::Gaussian}) {
    auto m = BayesModeld::empty(kind, 3);
    for (auto c : kAllClasses) m = partial_update(m, vec({1, 2, 0}), c);
    const auto p = predict(m, vec({2, 0, 1}));
    for (int c = 0; c < kNumClasses; ++c) CHECK(p.per_class[c] == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("naive Bayes: empty model predicts uniform") {
  for (auto kind : {BayesKind::Multinomial, BayesKind::Bernoulli, BayesKind::Gaussian}) {
    const auto m = BayesModeld::empty(kind, 2);
    const auto p = predict(m, vec({0.5, 0.5}));
    CHECK(p.confidence == 0.25);
    CHECK(p.label == A);
  }
}

TEST_CASE("bnb: exact match dominates") {
  auto m = BayesModeld::empty(BayesKind::Bernoulli, 3);
  for (int i = 0; i < 3; ++i) {
    m = bnb_update(m, vec({1, 0, 1}), A);
    m = bnb_update(m, vec({0, 1, 0}), B);
  }
  CHECK(bnb_predict(m, vec({1, 0, 1})).label == A);
  CHECK(bnb_predict(m, vec({0, 1, 0})).label == B);
}

TEST_CASE("mnb: negative features are rejected") {
  auto m = BayesModeld::empty(BayesKind::Multinomial, 2);
  CHECK_THROWS_AS(mnb_update(m, vec({1, -1}), A), std::invalid_argument);
  m = mnb_update(m, vec({1, 1}), A);
  CHECK_THROWS_AS(mnb_predict(m, vec({-0.5, 1})), std::invalid_argument);
}

// --- Gaussian -----------------------------------------------------------------

TEST_CASE("gnb: standard normal density at the mean") {
  CHECK(gaussian_density(0.0, 0.0, 1.0) == doctest::Approx(0.39894).epsilon(1e-5));
  CHECK(gaussian_density(0.0, 0.0, 1.0) == doctest::Approx(1 / std::sqrt(2 * M_PI)).epsilon(1e-15));
}

TEST_CASE("gnb: query at a class mean picks that class") {
  auto m = BayesModeld::empty(BayesKind::Gaussian, 2);
  for (double d : {-1.0, 1.0}) {
    m = gnb_update(m, vec({0 + d, 0 - d}), A);
    m = gnb_update(m, vec({5 + d, 5 - d}), B);
  }
  CHECK(gnb_predict(m, vec({0, 0})).label == A);
  CHECK(gnb_predict(m, vec({5, 5})).label == B);
}

TEST_CASE("gnb: streaming statistics match the two-pass batch in any order") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(1000, 3);
  const int n = 1000, d = 3;
  std::vector<Eigen::VectorXd> xs;
  for (int i = 0; i < n; ++i) xs.push_back(vec({g(rng), g(rng) * 1e-3, g(rng) - 1000}));

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d), var = Eigen::VectorXd::Zero(d);
  for (const auto& x : xs) mean += x;
  mean /= n;
  for (const auto& x : xs) var += (x - mean).cwiseAbs2();
  var /= n;

  for (int perm = 0; perm < 5; ++perm) {
    if (perm > 0) std::shuffle(xs.begin(), xs.end(), rng);
    auto m = BayesModeld::empty(BayesKind::Gaussian, d);
    for (const auto& x : xs) m = gnb_update(m, x, B);
    const int c = class_index(B);
    CHECK(m.class_count[c] == n);
    for (int k = 0; k < d; ++k) {
      CHECK(std::abs(m.mean(c, k) - mean[k]) <= 1e-9 * std::abs(mean[k]) + 1e-12);
      CHECK(std::abs(m.var(c, k) - var[k]) <= 1e-9 * var[k]);
    }
  }
}

TEST_CASE("gnb: zero variance is floored") {
  auto m = BayesModeld::empty(BayesKind::Gaussian, 1);
  m = gnb_update(m, vec({2}), A);
  m = gnb_update(m, vec({2}), A);
  m = gnb_update(m, vec({7}), B);
  const auto p = gnb_predict(m, vec({2}));
  CHECK(p.label == A);
  CHECK(std::isfinite(p.confidence));
}

// --- prediction shape across all learners --------------------------------------

TEST_CASE("every prediction is a normalized distribution") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0, 1);
  auto lin = LinearModeld::zeros(LinearKind::LogisticSgd, 4, 0.5);
  auto per = LinearModeld::zeros(LinearKind::Perceptron, 4);
  std::vector<BayesModeld> bayes = {BayesModeld::empty(BayesKind::Multinomial, 4),
                                    BayesModeld::empty(BayesKind::Bernoulli, 4),
                                    BayesModeld::empty(BayesKind::Gaussian, 4)};
  for (int i = 0; i < 400; ++i) {
    const auto x = vec({u(rng), u(rng), u(rng), u(rng)});
    const auto y = class_from_index(static_cast<int>(u(rng) * 4));
    check_prediction_shape(predict(lin, x));
    check_prediction_shape(predict(per, x));
    for (auto& b : bayes) {
      check_prediction_shape(predict(b, x));
      b = partial_update(b, x, y);
    }
    lin = partial_update(lin, x, y);
    per = partial_update(per, x, y);
  }
}

// --- interpolation ------------------------------------------------------------

TEST_CASE("interpolate: retention weighting") {
  const Eigen::Vector2d old(1, 0), updated(0, 1);
  const Eigen::Vector2d r = interpolate(old, updated, 0.75);
  CHECK(r[0] == doctest::Approx(0.75));
  CHECK(r[1] == doctest::Approx(0.25));
  CHECK(Eigen::Vector2d(interpolate(old, old, 0.3)) == old);
}

TEST_CASE("interpolate: alpha 1 returns old exactly, alpha 0 returns updated") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 5);
  auto a = LinearModeld::zeros(LinearKind::LogisticSgd, 6), b = a;
  for (int i = 0; i < a.weights.size(); ++i) {
    a.weights.data()[i] = u(rng);
    b.weights.data()[i] = u(rng);
  }
  a.bias << u(rng), u(rng), u(rng), u(rng);
  const auto keep = interpolate(a, b, 1.0);
  CHECK(keep.weights == a.weights);
  CHECK(keep.bias == a.bias);
  const auto take = interpolate(a, b, 0.0);
  CHECK(take.weights == b.weights);
  CHECK(take.bias == b.bias);
}

TEST_CASE("interpolate: every parameter lies between old and updated") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5, 5), au(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    auto old = BayesModeld::empty(BayesKind::Gaussian, 3), upd = old;
    for (int k = 0; k < 10; ++k) {
      old = gnb_update(old, vec({u(rng), u(rng), u(rng)}), class_from_index(k % 4));
      upd = gnb_update(upd, vec({u(rng), u(rng), u(rng)}), class_from_index((k + trial) % 4));
    }
    const double alpha = au(rng);
    const auto r = interpolate(old, upd, alpha);
    auto between = [](const auto& lo, const auto& hi, const auto& v) {
      const auto mn = lo.array().min(hi.array()), mx = lo.array().max(hi.array());
      return ((v.array() >= mn - 1e-12) && (v.array() <= mx + 1e-12)).all();
    };
    CHECK(between(old.mean, upd.mean, r.mean));
    CHECK(between(old.var, upd.var, r.var));
    CHECK(between(old.class_count, upd.class_count, r.class_count));
  }
}

TEST_CASE("interpolate: rejects bad alpha, shapes and kinds") {
  const auto a = LinearModeld::zeros(LinearKind::LogisticSgd, 2);
  CHECK_THROWS(interpolate(a, a, 1.5));
  CHECK_THROWS(interpolate(a, a, -0.1));
  CHECK_THROWS(interpolate(a, LinearModeld::zeros(LinearKind::LogisticSgd, 3), 0.5));
  CHECK_THROWS(interpolate(a, LinearModeld::zeros(LinearKind::Perceptron, 2), 0.5));
  CHECK_THROWS(interpolate(BayesModeld::empty(BayesKind::Multinomial, 2), BayesModeld::empty(BayesKind::Gaussian, 2), 0.5));
}

// --- K-Means selection --------------------------------------------------------

TEST_CASE("kmeans_select: single cluster on a line") {
  Eigen::MatrixXd pts(3, 1);
  pts << 0, 1, 5;
  const auto sel = kmeans_select(pts, 1, {1, 100, 42});
  REQUIRE(sel.size() == 1);
  CHECK(sel[0] == 1);
}

TEST_CASE("kmeans_select: keeping the whole class is a no-op") {
  Eigen::MatrixXd pts = Eigen::MatrixXd::Random(17, 3);
  const auto sel = kmeans_select(pts, 17);
  REQUIRE(sel.size() == 17);
  for (std::size_t i = 0; i < 17; ++i) CHECK(sel[i] == i);
  CHECK_THROWS(kmeans_select(Eigen::MatrixXd(0, 3), 1));
}

TEST_CASE("kmeans_select: picks come from the inner half of each blob") {
  const double radius = 1.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    const Eigen::Vector2d centers[2] = {{0, 0}, {10, 10}};
    Eigen::MatrixXd pts(200, 2);
    for (int i = 0; i < 200; ++i) {
      // uniform in the disk
      const double r = radius * std::sqrt(u(rng)), t = 2 * M_PI * u(rng);
      pts.row(i) = (centers[i % 2] + Eigen::Vector2d(r * std::cos(t), r * std::sin(t))).transpose();
    }
    const auto sel = kmeans_select(pts, 10, {2, 100, seed});
    REQUIRE(sel.size() == 10);
    for (auto i : sel) {
      const auto row = static_cast<Eigen::Index>(i);
      CHECK((pts.row(row).transpose() - centers[i % 2]).norm() < radius / 2);
    }
  }
}

TEST_CASE("kmeans: deterministic for a seed, centroids at cluster means") {
  Eigen::MatrixXd pts(6, 1);
  pts << 0, 1, 2, 10, 11, 12;
  const auto a = kmeans(pts, {2, 100, 7}), b = kmeans(pts, {2, 100, 7});
  CHECK(a.assignment == b.assignment);
  CHECK(a.centroids == b.centroids);
  std::vector<double> cs = {a.centroids(0, 0), a.centroids(1, 0)};
  std::sort(cs.begin(), cs.end());
  CHECK(cs[0] == doctest::Approx(1));
  CHECK(cs[1] == doctest::Approx(11));
}

// --- evaluation ---------------------------------------------------------------

TEST_CASE("evaluate: perfect and all-wrong predictions") {
  std::vector<std::pair<Eigen::VectorXd, TrafficClass>> data;
  for (int i = 0; i < 8; ++i) data.emplace_back(vec({double(i % 4)}), class_from_index(i % 4));
  const auto right = evaluate([](const Eigen::VectorXd& x) {
    ClassVector<double> s = ClassVector<double>::Zero();
    s[static_cast<int>(x[0])] = 5;
    return Prediction::from_scores(s);
  }, data);
  CHECK(right.accuracy == 1.0);
  CHECK(right.error_rate == 0.0);
  CHECK(right.macro_f1 == 1.0);
  CHECK(right.total() == 8);

  const auto wrong = evaluate([](const Eigen::VectorXd& x) {
    ClassVector<double> s = ClassVector<double>::Zero();
    s[(static_cast<int>(x[0]) + 1) % 4] = 5;
    return Prediction::from_scores(s);
  }, data);
  CHECK(wrong.accuracy == 0.0);
  CHECK(wrong.error_rate == 1.0);
  CHECK(wrong.correct_predictions + wrong.wrong_predictions == 8);

  const std::vector<std::pair<Eigen::VectorXd, TrafficClass>> none;
  CHECK_THROWS(evaluate([](const Eigen::VectorXd&) { return Prediction::uniform(); }, none));
}

TEST_CASE("evaluate: error rate of a near-perfect table row") {
  const double e = error_rate(10'146'052, 19);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.4f", e);
  CHECK(std::string(buf) == "0.0000");
  CHECK(e == doctest::Approx(19.0 / 10'146'071));
}

TEST_CASE("evaluate: per-class metrics from a confusion matrix") {
  ConfusionMatrix m = ConfusionMatrix::Zero();
  m(0, 0) = 8;
  m(0, 1) = 2;
  m(1, 1) = 5;
  m(2, 0) = 1;
  const auto r = EvalReport::from_confusion(m);
  CHECK(r.precision[0] == doctest::Approx(8.0 / 9));
  CHECK(r.recall[0] == doctest::Approx(0.8));
  CHECK(r.precision[1] == doctest::Approx(5.0 / 7));
  CHECK(r.recall[1] == 1.0);
  CHECK(r.recall[2] == 0.0);
  CHECK(r.f1[3] == 0.0);
  CHECK(r.accuracy == doctest::Approx(13.0 / 16));
  CHECK((r.precision.array() >= 0).all());
  CHECK((r.recall.array() <= 1).all());
}
