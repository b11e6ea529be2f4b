#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "perfrank/error.hpp"
#include "perfrank/ranking.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace perfrank;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no exception");
  return ErrorKind::Io;
}

using V = std::vector<double>;

}  // namespace

TEST_SUITE("ranking") {
  TEST_CASE("rank_with_ties") {
    CHECK(rank_with_ties(V{10, 20, 20, 30}) == V{1, 2.5, 2.5, 4});
    CHECK(rank_with_ties(V{7, 7, 7}) == V{2, 2, 2});
    CHECK(rank_with_ties(V{1, 2, 3, 4}) == V{1, 2, 3, 4});
    CHECK(rank_with_ties(V{3, 1, 2}) == V{3, 1, 2});
    CHECK(kind_of([] { rank_with_ties(V{1, NAN}); }) == ErrorKind::NonFinite);
  }

  TEST_CASE("spearman examples") {
    CHECK(spearman(V{1, 2, 3}, V{10, 20, 30}) == doctest::Approx(1.0));
    CHECK(spearman(V{1, 2, 3}, V{3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(std::abs(spearman(V{1, 2, 3, 4}, V{1, 3, 2, 4}) - 0.8) < 1e-12);
    CHECK(std::abs(oracle::spearman_closed_form({1, 2, 3, 4}, {1, 3, 2, 4}) - 0.8) < 1e-12);
    CHECK(kind_of([] { spearman(V{1, 2}, V{1, 2, 3}); }) == ErrorKind::LengthMismatch);
    CHECK(kind_of([] { spearman(V{1, 1, 1}, V{1, 2, 3}); }) == ErrorKind::ZeroVariance);
  }

  TEST_CASE("spearman matches independent oracles") {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = 3 + rng() % 8;
      const bool ties = t % 2 == 1;
      const auto x = oracle::random_vector(rng, n, ties);
      const auto y = oracle::random_vector(rng, n, ties);
      const auto rx = oracle::ranks(x), ry = oracle::ranks(y);
      if (std::adjacent_find(rx.begin(), rx.end(), std::not_equal_to<>()) == rx.end()) continue;
      if (std::adjacent_find(ry.begin(), ry.end(), std::not_equal_to<>()) == ry.end()) continue;
      CHECK(rank_with_ties(x) == rx);
      const double rho = spearman(x, y);
      CHECK(std::abs(rho - oracle::spearman_brute(x, y)) < 1e-12);
      if (!ties) CHECK(std::abs(rho - oracle::spearman_closed_form(x, y)) < 1e-12);
    }
  }

  TEST_CASE("spearman is invariant under strictly monotone maps") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
      const auto x = oracle::random_vector(rng, 8, t % 3 == 0);
      const auto y = oracle::random_vector(rng, 8, false);
      auto fx = x, fy = y;
      for (auto& v : fx) v = std::exp(v) * 3 - 7;
      for (auto& v : fy) v = std::atan(v) + v * v * v;
      try {
        CHECK(std::abs(spearman(x, y) - spearman(fx, fy)) < 1e-12);
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ZeroVariance);
      }
      auto sorted = y;
      std::sort(sorted.begin(), sorted.end());
      auto rev = sorted;
      std::reverse(rev.begin(), rev.end());
      CHECK(spearman(sorted, sorted) == doctest::Approx(1.0));
      CHECK(spearman(sorted, rev) == doctest::Approx(-1.0));
    }
  }

  TEST_CASE("pearson errors") {
    CHECK(kind_of([] { pearson(V{1}, V{2}); }) == ErrorKind::TooFew);
    CHECK(pearson(V{1, 2, 3}, V{2, 4, 6}) == doctest::Approx(1.0));
  }

  TEST_CASE("accuracy and macro F1") {
    const auto schema = LabelSchema::custom({"A", "B"});
    const std::vector<Label> gold{"A", "A", "B", "B"}, pred{"A", "B", "B", "B"};
    CHECK(accuracy(gold, pred) == 0.75);
    CHECK(macro_f1(gold, pred, schema) == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0));
    CHECK(std::abs(macro_f1(gold, pred, schema) - 0.7333) < 1e-4);
    CHECK(accuracy(gold, gold) == 1.0);
    CHECK(macro_f1(gold, gold, schema) == 1.0);
    const std::vector<Label> empty;
    CHECK(kind_of([&] { accuracy(empty, empty); }) == ErrorKind::LengthMismatch);
    CHECK(kind_of([&] { accuracy(gold, empty); }) == ErrorKind::LengthMismatch);
    // Class C never appears, so it contributes 0.
    const auto three = LabelSchema::custom({"A", "B", "C"});
    CHECK(macro_f1(gold, gold, three) == doctest::Approx(2.0 / 3.0));
  }

  TEST_CASE("accuracy is one minus the mean error indicator") {
    std::mt19937_64 rng(1);
    const std::vector<Label> labels{"a", "b", "c"};
    for (int t = 0; t < 20; ++t) {
      std::vector<Label> g, p;
      double errs = 0;
      for (int i = 0; i < 25; ++i) {
        g.push_back(labels[rng() % 3]);
        p.push_back(labels[rng() % 3]);
        errs += g.back() != p.back();
      }
      CHECK(accuracy(g, p) == doctest::Approx(1.0 - errs / 25.0).epsilon(1e-15));
    }
  }

  TEST_CASE("summary_stats uses the population SD") {
    auto s = summary_stats(V{0.5, 0.5});
    CHECK(s.mean == 0.5);
    CHECK(s.sd == 0.0);
    s = summary_stats(V{0, 1});
    CHECK(s.sd == doctest::Approx(0.5));
    s = summary_stats(V{1, 2, 3, 4});
    CHECK(s.mean == 2.5);
    CHECK(std::abs(s.sd - 1.118034) < 1e-6);
    CHECK(kind_of([] { summary_stats(V{1}); }) == ErrorKind::TooFew);
  }

  TEST_CASE("ranking report statuses and serialization") {
    std::vector<DomainEstimate> es{{"c", "zero_shot", 0.9, std::nullopt, 0.8, 10},
                                   {"a", "zero_shot", 0.6, std::nullopt, 0.5, 10},
                                   {"b", "zero_shot", 0.7, std::nullopt, 0.6, 10},
                                   {"d", "zero_shot", 0.8, std::nullopt, 0.9, 10}};
    const auto r = build_ranking_report("t", "zero_shot", es);
    REQUIRE(r.rho.has_value());
    CHECK(std::abs(*r.rho - 0.8) < 1e-12);
    CHECK(r.per_domain.front().domain == "a");
    CHECK(r.n_domains == 4);
    CHECK(r.true_accuracy_stats.mean == doctest::Approx(0.7));

    const auto back = ranking_report_from_json(to_json(r));
    CHECK(back.rho == r.rho);
    CHECK(back.per_domain == r.per_domain);

    auto flat = es;
    for (auto& e : flat) e.estimated = 0.5;
    const auto z = build_ranking_report("t", "zero_shot", flat);
    CHECK_FALSE(z.rho.has_value());
    CHECK(z.status == "ZeroVariance");
    const auto one = build_ranking_report("t", "zero_shot", {es[0]});
    CHECK(one.status == "TooFew");

    testing_support::TempDir dir;
    write_reports_json(dir / "r.json", {z, r});
    const auto all = read_reports_json(dir / "r.json");
    REQUIRE(all.size() == 2);
    CHECK((all[0].rho == r.rho || all[1].rho == r.rho));
    const auto table = merge_reports_table({r, build_ranking_report("u", "zero_shot", es)});
    CHECK(table.find("avg") != std::string::npos);
  }
}
