#include <doctest.h>

#include <cmath>
#include <random>

#include "perfrank/error.hpp"
#include "perfrank/linear.hpp"
#include "support/temp_dir.hpp"

using namespace perfrank;

namespace {

SparseVector random_sparse(std::mt19937_64& rng, std::size_t dim) {
  SparseVector x;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::uint32_t j = 0; j < dim; ++j) {
    if (rng() % 3 != 0) x.entries.emplace_back(j, u(rng));
  }
  return x;
}

LinearModel random_model(std::mt19937_64& rng, std::size_t k, std::size_t dim) {
  std::vector<Label> classes;
  for (std::size_t c = 0; c < k; ++c) classes.push_back("c" + std::to_string(c));
  LinearModel m(classes, dim);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& w : m.weights()) w = u(rng);
  for (auto& b : m.bias()) b = u(rng);
  return m;
}

// Dense softmax(Wx + b) written independently of the library.
std::vector<double> dense_softmax(const LinearModel& m, const SparseVector& x) {
  std::vector<double> dense(m.n_features(), 0.0);
  for (auto [j, v] : x.entries) dense[j] = v;
  std::vector<long double> z(m.n_classes());
  long double mx = -1e300L;
  for (std::size_t c = 0; c < m.n_classes(); ++c) {
    z[c] = m.bias()[c];
    for (std::size_t j = 0; j < dense.size(); ++j) z[c] += m.weight(c, j) * dense[j];
    mx = std::max(mx, z[c]);
  }
  long double s = 0;
  for (auto& v : z) s += std::exp(v - mx);
  std::vector<double> out;
  for (auto v : z) out.push_back(static_cast<double>(std::exp(v - mx) / s));
  return out;
}

double objective(const LinearModel& m, const std::vector<SparseVector>& X, const std::vector<std::size_t>& y, double l2) {
  double loss = 0;
  for (std::size_t i = 0; i < X.size(); ++i) loss -= std::log(dense_softmax(m, X[i])[y[i]]);
  loss /= static_cast<double>(X.size());
  double sq = 0;
  for (double w : m.weights()) sq += w * w;
  return loss + 0.5 * l2 * sq;
}

}  // namespace

TEST_SUITE("linear") {
  TEST_CASE("predict_proba matches a dense softmax oracle") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
      const auto m = random_model(rng, 2 + t % 3, 7);
      const auto x = random_sparse(rng, 7);
      const auto p = predict_proba(m, x);
      const auto o = dense_softmax(m, x);
      double sum = 0;
      for (std::size_t c = 0; c < p.size(); ++c) {
        CHECK(std::abs(p[c] - o[c]) < 1e-12);
        sum += p[c];
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }

  TEST_CASE("zero model is uniform and large logits saturate") {
    LinearModel m({"a", "b", "c"}, 4);
    SparseVector x{{{0, 1.0}, {3, 2.0}}};
    for (double p : predict_proba(m, x)) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    LinearModel big({"a", "b"}, 1);
    big.weight(0, 0) = 1e4;
    const auto p = predict_proba(big, SparseVector{{{0, 1.0}}});
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(std::isfinite(p[1]));
    SparseVector bad{{{9, 1.0}}};
    CHECK_THROWS_AS(predict_proba(m, bad), Error);
  }

  TEST_CASE("uniform predictions give loss ln K") {
    for (std::size_t k : {2u, 3u, 5u}) {
      std::vector<Label> classes;
      for (std::size_t c = 0; c < k; ++c) classes.push_back(std::to_string(c));
      LinearModel m(classes, 3);
      std::vector<SparseVector> X{{{{0, 1.0}}}, {{{1, 2.0}}}};
      std::vector<std::size_t> y{0, k - 1};
      CHECK(std::abs(loss_and_gradient(m, X, y, 0.0).loss - std::log(static_cast<double>(k))) < 1e-9);
    }
  }

  TEST_CASE("near-perfect predictions give vanishing loss and gradient") {
    LinearModel m({"a", "b"}, 2);
    m.weight(0, 0) = 60;
    m.weight(1, 1) = 60;
    std::vector<SparseVector> X{{{{0, 1.0}}}, {{{1, 1.0}}}};
    std::vector<std::size_t> y{0, 1};
    const auto lg = loss_and_gradient(m, X, y, 0.0);
    CHECK(lg.loss < 1e-20);
    for (double g : lg.weights) CHECK(std::abs(g) < 1e-20);
  }

  TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(3);
    const double l2 = 0.01, eps = 1e-5;
    auto m = random_model(rng, 3, 6);
    std::vector<SparseVector> X;
    std::vector<std::size_t> y;
    for (int i = 0; i < 20; ++i) {
      X.push_back(random_sparse(rng, 6));
      y.push_back(rng() % 3);
    }
    const auto lg = loss_and_gradient(m, X, y, l2);
    CHECK(std::abs(lg.loss - objective(m, X, y, l2)) < 1e-12);
    for (std::size_t idx = 0; idx < m.weights().size(); ++idx) {
      const double orig = m.weights()[idx];
      m.weights()[idx] = orig + eps;
      const double up = objective(m, X, y, l2);
      m.weights()[idx] = orig - eps;
      const double down = objective(m, X, y, l2);
      m.weights()[idx] = orig;
      const double fd = (up - down) / (2 * eps);
      CHECK(std::abs(fd - lg.weights[idx]) / std::max(1e-8, std::abs(fd) + std::abs(lg.weights[idx])) < 1e-4);
    }
    for (std::size_t c = 0; c < 3; ++c) {
      const double orig = m.bias()[c];
      m.bias()[c] = orig + eps;
      const double up = objective(m, X, y, l2);
      m.bias()[c] = orig - eps;
      const double down = objective(m, X, y, l2);
      m.bias()[c] = orig;
      const double fd = (up - down) / (2 * eps);
      CHECK(std::abs(fd - lg.bias[c]) / std::max(1e-8, std::abs(fd) + std::abs(lg.bias[c])) < 1e-4);
    }
  }

  TEST_CASE("train separates two one-hot points") {
    std::vector<SparseVector> X{{{{0, 1.0}}}, {{{1, 1.0}}}};
    std::vector<std::size_t> y{0, 1};
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.learning_rate = 0.5;
    const auto m = train(X, y, {"a", "b"}, 2, cfg);
    CHECK(predict_proba(m, X[0])[0] > 0.5);
    CHECK(predict_proba(m, X[1])[1] > 0.5);
    CHECK(m.loss_history().size() == 200);
  }

  TEST_CASE("huge l2 pushes predictions toward uniform") {
    std::vector<SparseVector> X{{{{0, 1.0}}}, {{{1, 1.0}}}, {{{0, 1.0}}}, {{{1, 1.0}}}};
    std::vector<std::size_t> y{0, 1, 0, 1};
    TrainConfig cfg;
    cfg.l2 = 1e6;
    cfg.learning_rate = 1e-7;
    cfg.epochs = 50;
    const auto m = train(X, y, {"a", "b"}, 2, cfg);
    for (double w : m.weights()) CHECK(std::abs(w) < 1e-3);
    CHECK(std::abs(predict_proba(m, X[0])[0] - 0.5) < 1e-3);
  }

  TEST_CASE("degenerate and malformed training input") {
    std::vector<SparseVector> X{{{{0, 1.0}}}, {{{1, 1.0}}}};
    std::vector<std::size_t> same{0, 0};
    try {
      train(X, same, {"a", "b"}, 2, TrainConfig{});
      FAIL("expected DegenerateLabels");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DegenerateLabels);
    }
    std::vector<std::size_t> short_y{0};
    CHECK_THROWS_AS(train(X, short_y, {"a", "b"}, 2, TrainConfig{}), Error);
    TrainConfig diverge;
    diverge.learning_rate = 1e300;
    diverge.l2 = 1e10;
    try {
      train(X, std::vector<std::size_t>{0, 1}, {"a", "b"}, 2, diverge);
      FAIL("expected NonFinite");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonFinite);
    }
  }

  TEST_CASE("full-batch loss is non-increasing and training is deterministic") {
    std::mt19937_64 rng(8);
    std::vector<SparseVector> X;
    std::vector<std::size_t> y;
    for (int i = 0; i < 40; ++i) {
      X.push_back(random_sparse(rng, 5));
      y.push_back(rng() % 3);
    }
    TrainConfig cfg;
    cfg.batch_size = 40;
    cfg.epochs = 60;
    cfg.learning_rate = 0.2;
    const auto m = train(X, y, {"a", "b", "c"}, 5, cfg);
    const auto& h = m.loss_history();
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] + 1e-9);

    cfg.batch_size = 7;
    const auto a = train(X, y, {"a", "b", "c"}, 5, cfg);
    const auto b = train(X, y, {"a", "b", "c"}, 5, cfg);
    CHECK(a == b);
  }

  TEST_CASE("early stopping honours the tolerance") {
    std::vector<SparseVector> X{{{{0, 1.0}}}, {{{1, 1.0}}}};
    std::vector<std::size_t> y{0, 1};
    TrainConfig cfg;
    cfg.epochs = 1000;
    cfg.tolerance = 1e-3;
    const auto m = train(X, y, {"a", "b"}, 2, cfg);
    CHECK(m.loss_history().size() < 1000);
  }

  TEST_CASE("save and load are bit-identical") {
    testing_support::TempDir dir;
    std::mt19937_64 rng(2);
    auto m = random_model(rng, 3, 9);
    m.save(dir / "m.txt");
    const auto back = LinearModel::load(dir / "m.txt");
    CHECK(back == m);
    const auto x = random_sparse(rng, 9);
    CHECK(predict_proba(back, x) == predict_proba(m, x));
  }

  TEST_CASE("text classifier refuses a foreign vocabulary") {
    const std::vector<std::vector<std::string>> docs{{"a", "b"}, {"c"}};
    FeatureConfig f;
    auto vocab = build_vocabulary(docs, f);
    LinearModel m({"x", "y"}, vocab.size(), "not-the-fingerprint");
    TextClassifier tc{vocab, m};
    try {
      tc.check_binding();
      FAIL("expected FingerprintMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::FingerprintMismatch);
    }
  }
}
