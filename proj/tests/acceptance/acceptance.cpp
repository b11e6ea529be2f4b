// Runs every primary acceptance criterion and prints one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "perfrank/error.hpp"
#include "perfrank/estimator.hpp"
#include "perfrank/experiment.hpp"
#include "perfrank/features.hpp"
#include "perfrank/linear.hpp"
#include "perfrank/providers.hpp"
#include "perfrank/ranking.hpp"
#include "perfrank/variation.hpp"
#include "support/mock_chat_server.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace perfrank;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::filesystem::path kToyDir = std::filesystem::path(PERFRANK_SOURCE_DIR) / "data" / "toy";

ExperimentConfig toy_config(const std::string& file, const std::filesystem::path& out) {
  auto doc = json::parse(slurp(kToyDir / file));
  doc.erase("sweep");
  doc["out"] = out.string();
  return ExperimentConfig::from_json(doc, kToyDir);
}

// ---------------------------------------------------------------------------

Outcome spearman_equivalence() {
  Outcome o;
  std::mt19937_64 rng(2024);
  int compared = 0;
  double worst = 0.0;
  while (compared < 200) {
    const std::size_t n = 3 + rng() % 8;
    const bool ties = compared % 2 == 1;
    const auto x = oracle::random_vector(rng, n, ties);
    const auto y = oracle::random_vector(rng, n, ties);
    double rho;
    try {
      rho = spearman(x, y);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ZeroVariance) continue;  // undefined for constant input; draw again
      throw;
    }
    ++compared;
    const double brute = oracle::spearman_brute(x, y);
    worst = std::max(worst, std::abs(rho - brute));
    o.require(std::abs(rho - brute) <= 1e-12, "brute-force oracle differs by " + std::to_string(std::abs(rho - brute)));
    const auto rx = oracle::ranks(x), ry = oracle::ranks(y);
    const bool distinct = std::set<double>(x.begin(), x.end()).size() == n && std::set<double>(y.begin(), y.end()).size() == n;
    if (distinct) {
      const double closed = oracle::spearman_closed_form(x, y);
      worst = std::max(worst, std::abs(rho - closed));
      o.require(std::abs(rho - closed) <= 1e-12, "closed form differs by " + std::to_string(std::abs(rho - closed)));
    }
  }
  if (o.pass) o.detail = "200 pairs, max |diff| " + sci(worst);
  return o;
}

Outcome keystone_identity() {
  Outcome o;
  std::mt19937_64 rng(77);
  const auto schema = LabelSchema::sentiment();
  OracleJudge judge;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    std::vector<Instance> insts;
    std::vector<Prediction> preds;
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "t" + std::to_string(trial) + "-" + std::to_string(i);
      insts.push_back({id, "x", schema.labels[rng() % 3], "d"});
      preds.push_back({id, "m", schema.labels[rng() % 3], std::nullopt, std::nullopt});
      wrong += insts.back().label != preds.back().predicted;
    }
    const double est = estimate_from_errors("d", judge_batch(judge, insts, preds)).estimated;
    const double truth = 1.0 - static_cast<double>(wrong) / static_cast<double>(n);
    o.require(est == truth && est == true_accuracy(insts, preds), "trial " + std::to_string(trial) + " differs");
  }
  testing_support::TempDir dir;
  const auto reports = run_experiment(toy_config("oracle.json", dir / "out"));
  for (const auto& r : reports) {
    if (r.method != method::kErrorModel) continue;
    o.require(r.rho && *r.rho == 1.0, "end-to-end rho " + (r.rho ? fmt(*r.rho, 12) : r.status));
    if (o.pass) o.detail = "100 trials exact; end-to-end rho 1 over " + std::to_string(r.n_domains) + " domains";
  }
  return o;
}

InjectionPlan study_plan(InjectionMode mode) {
  InjectionPlan plan;
  plan.mode = mode;
  plan.n_domains = 15;
  plan.n_per_domain = 500;
  for (std::size_t s = 0; s <= 14; ++s) plan.margin_steps.push_back(s);
  for (std::uint64_t s = 0; s < 20; ++s) plan.seeds.push_back(s);
  plan.threads = std::max(1u, std::thread::hardware_concurrency());
  return plan;
}

SweepCurve g_random_curve;

Outcome variation_trend() {
  Outcome o;
  NoisyJudge judge(0.7, 42);
  g_random_curve = run_sweep(study_plan(InjectionMode::Random), judge);
  std::vector<double> margins, means;
  for (const auto& p : g_random_curve.points) {
    if (!p.rho_mean) continue;
    margins.push_back(p.margin);
    means.push_back(*p.rho_mean);
  }
  o.require(margins.size() == 14, "expected 14 defined points");
  const double last = means.back(), first = means.front();
  const double tau = oracle::kendall_tau(margins, means);
  o.require(margins.back() >= 0.39 && margins.back() <= 0.4, "largest margin " + fmt(margins.back()));
  o.require(last >= 0.8, "rho at largest margin " + fmt(last));
  o.require(first <= 0.4, "rho at smallest margin " + fmt(first));
  o.require(tau > 0.8, "kendall tau " + fmt(tau));
  o.detail = "rho " + fmt(first) + " @ " + fmt(margins.front()) + " -> " + fmt(last) + " @ " + fmt(margins.back()) +
             ", tau " + fmt(tau) + (o.pass ? "" : "; " + o.detail);
  return o;
}

Outcome stability_ordering() {
  Outcome o;
  NoisyJudge judge(0.7, 42);
  const auto informed = run_sweep(study_plan(InjectionMode::ErrorInformed), judge);
  std::string detail;
  int checked = 0;
  for (std::size_t i = 0; i < informed.points.size() && checked < 3; ++i) {
    const auto& a = informed.points[i];
    const auto& b = g_random_curve.points[i];
    if (a.margin_step == 0) continue;
    ++checked;
    int wins = 0, trials = 0;
    for (std::size_t s = 0; s < a.rhos.size(); ++s) {
      const double ra = a.rhos[s].value_or(0.0), rb = b.rhos[s].value_or(0.0);
      if (ra == rb) continue;
      ++trials;
      wins += ra > rb;
    }
    const double p = oracle::sign_test_p(wins, trials);
    const double mean_a = a.rho_mean.value_or(0.0), mean_b = b.rho_mean.value_or(0.0);
    o.require(mean_a >= mean_b, "margin " + fmt(a.margin) + ": informed mean below random");
    o.require(p < 0.05, "margin " + fmt(a.margin) + ": sign test p " + fmt(p));
    detail += (detail.empty() ? "" : "; ") + fmt(a.margin, 3) + ": " + fmt(mean_a, 3) + " vs " + fmt(mean_b, 3) + " (" +
              std::to_string(wins) + "/" + std::to_string(trials) + ", p " + fmt(p, 5) + ")";
  }
  o.detail = detail + (o.pass ? "" : "; " + o.detail);
  return o;
}

Outcome logistic_trainer() {
  Outcome o;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  // Finite differences.
  const std::size_t k = 3, dim = 6;
  LinearModel m({"a", "b", "c"}, dim);
  for (auto& w : m.weights()) w = u(rng);
  for (auto& b : m.bias()) b = u(rng);
  std::vector<SparseVector> X;
  std::vector<std::size_t> y;
  for (int i = 0; i < 20; ++i) {
    SparseVector x;
    for (std::uint32_t j = 0; j < dim; ++j) x.entries.emplace_back(j, u(rng));
    X.push_back(x);
    y.push_back(rng() % k);
  }
  const double l2 = 1e-2, eps = 1e-5;
  const auto grad = loss_and_gradient(m, X, y, l2);
  double worst = 0.0;
  auto check_param = [&](double& param, double analytic) {
    const double orig = param;
    param = orig + eps;
    const double up = loss_and_gradient(m, X, y, l2).loss;
    param = orig - eps;
    const double down = loss_and_gradient(m, X, y, l2).loss;
    param = orig;
    const double fd = (up - down) / (2 * eps);
    const double rel = std::abs(fd - analytic) / std::max(1e-12, std::max(std::abs(fd), std::abs(analytic)));
    worst = std::max(worst, rel);
  };
  for (std::size_t i = 0; i < m.weights().size(); ++i) check_param(m.weights()[i], grad.weights[i]);
  for (std::size_t c = 0; c < k; ++c) check_param(m.bias()[c], grad.bias[c]);
  o.require(worst < 1e-4, "finite-difference relative error " + std::to_string(worst));

  // Linearly separable toy.
  std::vector<double> w_true(dim);
  for (auto& w : w_true) w = u(rng);
  std::vector<SparseVector> Xs;
  std::vector<std::size_t> ys;
  while (Xs.size() < 100) {
    SparseVector x;
    double s = 0.0;
    for (std::uint32_t j = 0; j < dim; ++j) {
      const double v = u(rng);
      x.entries.emplace_back(j, v);
      s += v * w_true[j];
    }
    if (std::abs(s) < 0.1) continue;
    Xs.push_back(x);
    ys.push_back(s > 0 ? 1 : 0);
  }
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 1.0;
  cfg.l2 = 0.0;
  const auto trained = train(Xs, ys, {"neg", "pos"}, dim, cfg);
  std::size_t right = 0;
  for (std::size_t i = 0; i < Xs.size(); ++i) {
    const auto p = predict_proba(trained, Xs[i]);
    right += (p[1] > p[0] ? 1u : 0u) == ys[i];
  }
  o.require(right == Xs.size(), "separable toy train accuracy " + std::to_string(right) + "/100");

  // Uniform predictions.
  double worst_uniform = 0.0;
  for (std::size_t classes : {2u, 3u, 7u}) {
    std::vector<Label> names;
    for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
    LinearModel zero(names, dim);
    std::vector<std::size_t> yy(X.size());
    for (std::size_t i = 0; i < yy.size(); ++i) yy[i] = i % classes;
    worst_uniform = std::max(worst_uniform,
                             std::abs(loss_and_gradient(zero, X, yy, 0.0).loss - std::log(static_cast<double>(classes))));
  }
  o.require(worst_uniform <= 1e-9, "uniform loss differs from ln K by " + std::to_string(worst_uniform));
  if (o.pass) {
    o.detail = "fd rel err " + sci(worst) + ", separable 100/100, |loss - ln K| " + sci(worst_uniform);
  }
  return o;
}

Outcome drift_metrics() {
  Outcome o;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<std::string> alphabet{"a", "b", "c", "d", "e", "f", "g", "h"};
  auto random_dist = [&] {
    TokenDistribution d;
    double total = 0.0;
    for (const auto& t : alphabet) {
      if (rng() % 3 == 0) continue;
      const double w = u(rng);
      d.probs[t] = w;
      total += w;
    }
    if (d.probs.empty()) {
      d.probs["a"] = 1.0;
      total = 1.0;
    }
    for (auto& [t, p] : d.probs) p /= total;
    return d;
  };
  for (int i = 0; i < 500; ++i) {
    const auto p = random_dist();
    const auto q = random_dist();
    const double pq = js_divergence(p, q), qp = js_divergence(q, p);
    o.require(std::abs(pq - qp) <= 1e-12, "asymmetric pair " + std::to_string(i));
    o.require(pq >= 0.0 && pq <= 1.0, "out of [0,1] pair " + std::to_string(i));
    o.require(std::abs(js_divergence(p, p)) <= 1e-12, "JSD(p,p) != 0 at pair " + std::to_string(i));
    const bool equal = p.probs == q.probs;
    o.require(equal || pq > 0.0, "JSD zero for distinct distributions at pair " + std::to_string(i));
  }
  TokenDistribution disjoint_a{{{"x", 1.0}}}, disjoint_b{{{"y", 1.0}}};
  o.require(std::abs(js_divergence(disjoint_a, disjoint_b) - 1.0) <= 1e-12, "disjoint supports should give 1");
  TokenDistribution p{{{"x", 1.0}}}, q{{{"x", 0.5}, {"y", 0.5}}};
  const double worked = js_divergence(p, q);
  o.require(std::abs(worked - 0.311278) <= 1e-6, "worked value " + fmt(worked, 8));
  if (o.pass) o.detail = "500 pairs ok; worked value " + fmt(worked, 6);
  return o;
}

Outcome baseline_estimators() {
  Outcome o;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<Prediction> preds;
    std::vector<double> confs;
    const std::size_t n = 1 + rng() % 50;
    for (std::size_t i = 0; i < n; ++i) {
      confs.push_back(u(rng));
      preds.push_back({"p" + std::to_string(i), "m", "x", confs.back(), std::nullopt});
    }
    const double est = zero_shot_estimate("d", preds).estimated;
    o.require(std::abs(est - oracle::mean(confs)) <= 1e-12, "zero-shot mean differs at trial " + std::to_string(t));
  }
  const std::map<Label, std::vector<double>> labels{{"pos", {1.0, 0.0, 0.0}}, {"neg", {0.0, 1.0, 0.0}}};
  const std::vector<Prediction> one{{"a", "m", "pos", std::nullopt, std::nullopt}};
  const std::vector<Prediction> two{{"a", "m", "pos", std::nullopt, std::nullopt},
                                    {"b", "m", "neg", std::nullopt, std::nullopt}};
  const double identical = semantic_drift_estimate("d", one, {{"a", {1.0, 0.0, 0.0}}}, labels).estimated;
  const double orthogonal = semantic_drift_estimate("d", one, {{"a", {0.0, 0.0, 1.0}}}, labels).estimated;
  const double mixed =
      semantic_drift_estimate("d", two, {{"a", {0.0, 1.0, 0.0}}, {"b", {0.5, 0.0, std::sqrt(0.75)}}}, labels).estimated;
  o.require(std::abs(identical - 1.0) <= 1e-12, "identical case " + fmt(identical, 12));
  o.require(std::abs(orthogonal) <= 1e-12, "orthogonal case " + fmt(orthogonal, 12));
  o.require(std::abs(mixed - 0.75) <= 1e-12, "mean case " + fmt(mixed, 12));
  if (o.pass) o.detail = "zero-shot 100 trials; semantic " + fmt(identical, 3) + "/" + fmt(orthogonal, 3) + "/" + fmt(mixed, 3);
  return o;
}

// A small four-domain corpus whose chat answers are scripted so every domain
// has a different number of base-model mistakes.
struct ChatFixture {
  testing_support::MockChatScript script;
  std::vector<Instance> heldout;
  std::set<std::string> wrong_texts;

  explicit ChatFixture(const std::filesystem::path& corpus_path) {
    std::ofstream out(corpus_path);
    int n = 0;
    auto emit = [&](const std::string& domain, int i, bool wrong) {
      const std::string label = i % 2 ? "offensive" : "not offensive";
      const std::string text = "sample text " + std::to_string(n);
      const std::string id = domain + "-" + std::to_string(n++);
      out << json{{"id", id}, {"text", text}, {"label", label}, {"domain", domain}}.dump() << '\n';
      script.base_labels[text] = wrong == (label == "offensive") ? "not offensive" : "offensive";
      script.base_confidence[text] = 0.5 + 0.05 * (n % 10);
      if (wrong) {
        script.error_labels[text] = "error";
        wrong_texts.insert(text);
      }
      if (domain != "train") heldout.push_back({id, text, label, domain});
    };
    for (int i = 0; i < 12; ++i) emit("train", i, i < 3);
    int wrong = 1;
    for (const char* d : {"east", "north", "south", "west"}) {
      for (int i = 0; i < 8; ++i) emit(d, i, i < wrong);
      wrong += 2;
    }
  }
};

json chat_provider(const testing_support::MockChatServer& server) {
  return json{{"kind", "chat"}, {"endpoint", server.endpoint()}, {"model", "mock"},
              {"transcripts", "transcripts.jsonl"}, {"retry", {{"max_attempts", 2}, {"backoff_ms", 1}}}};
}

Outcome determinism() {
  Outcome o;
  testing_support::TempDir dir;
  ChatFixture fx(dir / "corpus.jsonl");
  testing_support::MockChatServer server(fx.script);
  json doc{{"dataset", {{"path", "corpus.jsonl"}}},
           {"training_domain", "train"},
           {"test_fraction", 0.25},
           {"base", chat_provider(server)},
           {"error", chat_provider(server)},
           {"estimators", {"error_model", "zero_shot"}}};
  doc["out"] = "record";
  run_experiment(ExperimentConfig::from_json(doc, dir.path()), true);
  const int recorded = server.requests();
  doc["out"] = "replay-a";
  run_experiment(ExperimentConfig::from_json(doc, dir.path()), false);
  doc["out"] = "replay-b";
  run_experiment(ExperimentConfig::from_json(doc, dir.path()), false);
  o.require(server.requests() == recorded, "offline replays contacted the server");
  std::size_t files = 0;
  for (const char* f : {"reports/report.json", "reports/report.csv", "reports/table.csv", "estimates.jsonl",
                        "predictions/heldout.jsonl", "judgments/heldout.jsonl"}) {
    o.require(slurp(dir / "replay-a" / f) == slurp(dir / "replay-b" / f), std::string(f) + " differs between replays");
    o.require(slurp(dir / "record" / f) == slurp(dir / "replay-a" / f), std::string(f) + " differs from recording");
    ++files;
  }
  run_experiment(toy_config("linear.json", dir / "toy-a"));
  run_experiment(toy_config("linear.json", dir / "toy-b"));
  for (const char* f : {"reports/report.json", "reports/report.csv", "estimates.jsonl"}) {
    o.require(slurp(dir / "toy-a" / f) == slurp(dir / "toy-b" / f), std::string("toy ") + f + " differs");
    ++files;
  }
  if (o.pass) o.detail = std::to_string(files) + " report files byte-identical (chat replay and linear toy)";
  return o;
}

Outcome mock_integration() {
  Outcome o;
  testing_support::TempDir dir;
  ChatFixture fx(dir / "corpus.jsonl");
  const auto schema = LabelSchema::offensive_language();
  testing_support::MockChatServer server(fx.script);
  ChatProviderConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.model = "mock";
  cfg.retry.max_attempts = 2;
  cfg.retry.backoff = std::chrono::milliseconds(1);
  auto client = std::make_shared<ChatClient>(cfg, nullptr, true);
  const std::vector<BaseExemplar> base_ex{{"have a lovely day", "not offensive"}, {"you absolute clown", "offensive"}};
  const std::vector<ErrorExemplar> err_ex{{"you absolute clown", "not offensive", "error"},
                                          {"have a lovely day", "not offensive", "correct"}};
  ChatPredictor predictor(client, schema, base_ex, "mock");
  ChatJudge judge(client, err_ex, "mock");

  const auto outcome = collect_predictions(predictor, fx.heldout);
  o.require(outcome.failed.empty(), "prediction failures: " + std::to_string(outcome.failed.size()));
  std::size_t label_hits = 0;
  for (const auto& p : outcome.results) {
    const auto& inst = *std::find_if(fx.heldout.begin(), fx.heldout.end(), [&](const Instance& i) { return i.id == p.instance_id; });
    label_hits += p.predicted == fx.script.base_labels.at(inst.text);
    o.require(p.confidence && std::abs(*p.confidence - fx.script.base_confidence.at(inst.text)) < 1e-9,
              "confidence mismatch for " + p.instance_id);
  }
  o.require(label_hits == fx.heldout.size(), "scripted labels reproduced " + std::to_string(label_hits));
  const auto judged = collect_judgments(judge, fx.heldout, outcome.results);
  o.require(judged.failed.empty(), "judgment failures: " + std::to_string(judged.failed.size()));
  std::size_t verdict_hits = 0;
  for (const auto& j : judged.results) {
    const auto& inst = *std::find_if(fx.heldout.begin(), fx.heldout.end(), [&](const Instance& i) { return i.id == j.instance_id; });
    verdict_hits += j.error_prob == (fx.wrong_texts.contains(inst.text) ? 1.0 : 0.0);
  }
  o.require(verdict_hits == fx.heldout.size(), "scripted judgments reproduced " + std::to_string(verdict_hits));
  o.require(server.rejected() == 0, "mock rejected a request: " + server.last_rejection());

  // A scripted drop: one text is answered with HTTP 500 on every attempt.
  auto script = fx.script;
  script.fail_texts.insert(fx.heldout[3].text);
  testing_support::MockChatServer flaky(script);
  cfg.endpoint = flaky.endpoint();
  ChatPredictor flaky_predictor(std::make_shared<ChatClient>(cfg, nullptr, true), schema, base_ex, "mock");
  bool reported = false;
  try {
    predict_batch(flaky_predictor, fx.heldout);
  } catch (const PartialFailure& e) {
    reported = e.failed_ids() == std::vector<std::string>{fx.heldout[3].id};
  }
  o.require(reported, "PartialFailure did not name exactly the dropped id");
  const auto partial = collect_predictions(flaky_predictor, fx.heldout);
  o.require(partial.results.size() + 1 == fx.heldout.size() && partial.failed.size() == 1,
            "dropped id not accounted for exactly once");
  if (o.pass) {
    o.detail = std::to_string(label_hits) + " labels, " + std::to_string(verdict_hits) +
               " judgments, 0 unparseable; PartialFailure names " + fx.heldout[3].id;
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double budget_s;  // 0 = no runtime bound
  };
  const std::vector<Criterion> criteria{
      {"spearman-oracle-equivalence", spearman_equivalence, 1.0},
      {"keystone-identity", keystone_identity, 1.0},
      {"variation-trend", variation_trend, 60.0},
      {"stability-ordering", stability_ordering, 60.0},
      {"logistic-trainer", logistic_trainer, 0.0},
      {"drift-metrics", drift_metrics, 0.0},
      {"baseline-estimators", baseline_estimators, 0.0},
      {"determinism", determinism, 0.0},
      {"mock-provider-integration", mock_integration, 0.0},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += "; took " + fmt(secs, 2) + " s, budget " + fmt(c.budget_s, 0) + " s";
    }
    if (!o.pass) ++failures;
    std::printf("%s %s (%.2f s) %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
