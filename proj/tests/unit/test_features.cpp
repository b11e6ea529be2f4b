#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "perfrank/error.hpp"
#include "perfrank/features.hpp"
#include "support/temp_dir.hpp"

using namespace perfrank;

namespace {

FeatureConfig plain(Weighting w = Weighting::TfIdf, std::size_t min_df = 1) {
  FeatureConfig c;
  c.weighting = w;
  c.min_doc_freq = min_df;
  return c;
}

// JSD computed straight from the definition over an explicit support.
double jsd_oracle(const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
  std::set<std::string> support;
  for (const auto& [k, v] : p) support.insert(k);
  for (const auto& [k, v] : q) support.insert(k);
  double kl_p = 0, kl_q = 0;
  for (const auto& k : support) {
    const double a = p.contains(k) ? p.at(k) : 0.0;
    const double b = q.contains(k) ? q.at(k) : 0.0;
    const double m = 0.5 * (a + b);
    if (a > 0) kl_p += a * std::log2(a / m);
    if (b > 0) kl_q += b * std::log2(b / m);
  }
  return 0.5 * kl_p + 0.5 * kl_q;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("tokenize") {
    CHECK(tokenize("Good, GOOD product!", plain()) == std::vector<std::string>{"good", "good", "product"});
    FeatureConfig stop = plain();
    stop.remove_stopwords = true;
    CHECK(tokenize("the of a", stop).empty());
    CHECK(tokenize("", plain()).empty());
    CHECK(tokenize("Ünïcode ÇAFÉ naïve", plain()) == std::vector<std::string>{"ünïcode", "çafé", "naïve"});
    CHECK(tokenize("don't-stop", plain()) == std::vector<std::string>{"don", "t", "stop"});
    // truncated multi-byte sequence at the end is a separator, not a crash
    CHECK(tokenize(std::string("ok\xC3"), plain()) == std::vector<std::string>{"ok"});
  }

  TEST_CASE("ngrams") {
    const std::vector<std::string> abc{"a", "b", "c"};
    CHECK(ngrams(abc, 2) == std::vector<std::string>{"a b", "b c"});
    CHECK(ngrams(std::vector<std::string>{"a"}, 2).empty());
    CHECK(ngrams(std::vector<std::string>{"a", "b"}, 1) == std::vector<std::string>{"a", "b"});
    CHECK(ngrams(abc, 1) == abc);
  }

  TEST_CASE("build_vocabulary") {
    const std::vector<std::vector<std::string>> docs{{"a", "b"}, {"b"}};
    const auto v = build_vocabulary(docs, plain());
    REQUIRE(v.size() == 2);
    CHECK(v.term(0) == "a");
    CHECK(v.term(1) == "b");
    CHECK(v.doc_freq(0) == 1);
    CHECK(v.doc_freq(1) == 2);
    CHECK(v.n_docs() == 2);
    CHECK_FALSE(v.lookup("zzz").has_value());

    const auto v2 = build_vocabulary(docs, plain(Weighting::TfIdf, 2));
    REQUIRE(v2.size() == 1);
    CHECK(v2.term(0) == "b");

    const std::vector<std::vector<std::string>> one{{"a"}};
    CHECK_THROWS_AS(build_vocabulary(one, plain(Weighting::TfIdf, 2)), Error);

    // order-insensitive
    const std::vector<std::vector<std::string>> rev{{"b"}, {"a", "b"}};
    CHECK(build_vocabulary(rev, plain()).fingerprint() == v.fingerprint());
  }

  TEST_CASE("vectorize count and tfidf") {
    const std::vector<std::vector<std::string>> docs{{"a", "b"}, {"b"}};
    const std::vector<std::string> doc{"b", "b"};
    const auto counts = vectorize(doc, build_vocabulary(docs, plain(Weighting::Count)));
    REQUIRE(counts.entries.size() == 1);
    CHECK(counts.entries[0].first == 1);
    CHECK(counts.entries[0].second == 2.0);

    const auto vocab = build_vocabulary(docs, plain(Weighting::TfIdf));
    // idf(b) = ln(3/3) + 1 = 1; weight 2, normalized to 1
    CHECK(vocab.idf(1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(vocab.idf(0) == doctest::Approx(std::log(3.0 / 2.0) + 1.0).epsilon(1e-15));
    const auto tfidf = vectorize(doc, vocab);
    REQUIRE(tfidf.entries.size() == 1);
    CHECK(tfidf.entries[0].second == doctest::Approx(1.0).epsilon(1e-15));

    const std::vector<std::string> unseen{"q", "r"};
    CHECK(vectorize(unseen, vocab).empty());

    const std::vector<std::string> both{"a", "b", "a"};
    const auto mixed = vectorize(both, vocab);
    const double wa = 2.0 * (std::log(1.5) + 1.0), wb = 1.0;
    const double norm = std::sqrt(wa * wa + wb * wb);
    REQUIRE(mixed.entries.size() == 2);
    CHECK(mixed.entries[0].second == doctest::Approx(wa / norm).epsilon(1e-12));
    CHECK(mixed.entries[1].second == doctest::Approx(wb / norm).epsilon(1e-12));
  }

  TEST_CASE("tfidf vectors have norm 0 or 1") {
    std::mt19937_64 rng(5);
    std::vector<std::vector<std::string>> docs;
    for (int d = 0; d < 30; ++d) {
      std::vector<std::string> doc;
      for (int t = 0; t < 1 + static_cast<int>(rng() % 8); ++t) doc.push_back(std::string(1, 'a' + rng() % 12));
      docs.push_back(doc);
    }
    const auto vocab = build_vocabulary(docs, plain());
    for (int d = 0; d < 50; ++d) {
      std::vector<std::string> doc;
      for (int t = 0; t < static_cast<int>(rng() % 6); ++t) doc.push_back(std::string(1, 'a' + rng() % 20));
      const double n = vectorize(doc, vocab).norm();
      CHECK((n == 0.0 || std::abs(n - 1.0) < 1e-12));
    }
  }

  TEST_CASE("vocabulary round-trips through disk") {
    testing_support::TempDir dir;
    FeatureConfig bigram = plain();
    bigram.ngram_order = 2;
    const std::vector<std::vector<std::string>> docs{{"a", "b", "c"}, {"b", "c"}};
    const auto v = build_vocabulary(docs, bigram);
    v.save(dir / "vocab.jsonl");
    const auto back = Vocabulary::load(dir / "vocab.jsonl");
    CHECK(back.fingerprint() == v.fingerprint());
    CHECK(back.size() == v.size());
    CHECK(back.config() == bigram);
    CHECK(back.term(0) == "a b");
  }

  TEST_CASE("token_distribution") {
    std::vector<Instance> two{{"1", "a b", "x", "d"}, {"2", "a", "x", "d"}};
    const auto dist = token_distribution(two, plain());
    CHECK(dist.probs.at("a") == doctest::Approx(2.0 / 3.0));
    CHECK(dist.probs.at("b") == doctest::Approx(1.0 / 3.0));
    std::vector<Instance> single{{"1", "x", "x", "d"}};
    CHECK(token_distribution(single, plain()).probs.at("x") == 1.0);
    FeatureConfig stop = plain();
    stop.remove_stopwords = true;
    std::vector<Instance> stops{{"1", "the of", "x", "d"}};
    try {
      token_distribution(stops, stop);
      FAIL("expected NoTokens");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NoTokens);
    }
  }

  TEST_CASE("js_divergence worked values") {
    TokenDistribution p{{{"x", 1.0}}};
    TokenDistribution q{{{"x", 0.5}, {"y", 0.5}}};
    CHECK(std::abs(js_divergence(p, q) - 0.311278) <= 1e-6);
    CHECK(std::abs(js_divergence(p, q) - jsd_oracle(p.probs, q.probs)) < 1e-12);
    CHECK(js_divergence(p, p) == 0.0);
    TokenDistribution r{{{"z", 1.0}}};
    CHECK(js_divergence(p, r) == doctest::Approx(1.0).epsilon(1e-15));
  }
}
