#include "perfrank/variation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>
#include <unordered_map>

#include "perfrank/error.hpp"
#include "perfrank/estimator.hpp"
#include "perfrank/ranking.hpp"
#include "perfrank/util.hpp"

namespace perfrank {

std::string_view to_string(InjectionMode mode) noexcept {
  return mode == InjectionMode::Random ? "random" : "error_informed";
}

InjectionMode injection_mode_from_string(std::string_view name) {
  if (name == "random") return InjectionMode::Random;
  if (name == "error_informed") return InjectionMode::ErrorInformed;
  throw Error(ErrorKind::InvalidConfig, "unknown injection mode '" + std::string(name) + "'");
}

void InjectionPlan::validate() const {
  if (seeds.empty()) throw Error(ErrorKind::InvalidConfig, "injection plan needs at least one seed");
  if (margin_steps.empty()) throw Error(ErrorKind::InvalidConfig, "injection plan needs at least one margin step");
  if (!std::is_sorted(margin_steps.begin(), margin_steps.end()) ||
      std::adjacent_find(margin_steps.begin(), margin_steps.end()) != margin_steps.end()) {
    throw Error(ErrorKind::InvalidConfig, "margin steps must be strictly increasing");
  }
  if (n_domains < 2) throw Error(ErrorKind::InvalidConfig, "injection plan needs at least two domains");
  if (n_per_domain < 1) throw Error(ErrorKind::InvalidConfig, "n_per_domain must be >= 1");
  if (!domain_order.empty()) {
    if (domain_order.size() != n_domains) {
      throw Error(ErrorKind::InvalidConfig, "domain_order lists " + std::to_string(domain_order.size()) +
                                                " domains, n_domains is " + std::to_string(n_domains));
    }
    if (std::set<DomainId>(domain_order.begin(), domain_order.end()).size() != domain_order.size()) {
      throw Error(ErrorKind::InvalidConfig, "domain_order has duplicates");
    }
  }
  if ((n_domains - 1) * margin_steps.back() > n_per_domain) {
    throw Error(ErrorKind::TooManyErrors, "largest margin step needs " +
                                              std::to_string((n_domains - 1) * margin_steps.back()) +
                                              " errors in a domain of " + std::to_string(n_per_domain));
  }
  if (threads < 1) throw Error(ErrorKind::InvalidConfig, "threads must be >= 1");
  schema.validate();
}

std::vector<DomainId> InjectionPlan::resolved_domain_order() const {
  if (!domain_order.empty()) return domain_order;
  std::vector<DomainId> out;
  for (std::size_t i = 0; i < n_domains; ++i) {
    out.push_back((i < 10 ? "domain-0" : "domain-") + std::to_string(i));
  }
  return out;
}

SyntheticSet make_synthetic_set(const InjectionPlan& plan, std::uint64_t seed) {
  Engine engine(derive_seed(seed, "synthetic-labels"));
  SyntheticSet out;
  const auto order = plan.resolved_domain_order();
  const std::string prefix = "s" + std::to_string(seed) + "/";
  for (const auto& domain : order) {
    for (std::size_t i = 0; i < plan.n_per_domain; ++i) {
      Instance inst;
      inst.id = prefix + domain + "/" + std::to_string(i);
      inst.text = "synthetic instance " + inst.id;
      inst.label = plan.schema.labels[uniform_below(engine, plan.schema.labels.size())];
      inst.domain = domain;
      Prediction p;
      p.instance_id = inst.id;
      p.predictor_id = "synthetic";
      p.predicted = inst.label;
      p.confidence = 1.0;
      out.instances.push_back(std::move(inst));
      out.predictions.push_back(std::move(p));
    }
  }
  return out;
}

Label flip_target(const Instance& instance, const LabelSchema& schema, std::uint64_t seed) {
  std::vector<Label> wrong;
  for (const auto& l : schema.labels) {
    if (l != instance.label) wrong.push_back(l);
  }
  if (wrong.empty()) throw Error(ErrorKind::PreconditionViolated, "schema has no wrong label to flip to");
  const auto h = hash64(instance.id, derive_seed(seed, "flip-target"));
  return wrong[h % wrong.size()];
}

namespace {

// Instance indices per domain, in input order.
std::map<DomainId, std::vector<std::size_t>> domain_indices(std::span<const Instance> instances,
                                                            std::span<const Prediction> predictions,
                                                            const std::map<DomainId, std::size_t>& errors) {
  if (instances.size() != predictions.size()) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(instances.size()) + " instances vs " +
                                               std::to_string(predictions.size()) + " predictions");
  }
  std::map<DomainId, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (predictions[i].instance_id != instances[i].id) {
      throw Error(ErrorKind::InvalidRecord, "prediction " + std::to_string(i) + " is not aligned with its instance");
    }
    if (predictions[i].predicted != instances[i].label) {
      throw Error(ErrorKind::PreconditionViolated, "injection expects correct predictions; '" + instances[i].id +
                                                       "' is already wrong");
    }
    out[instances[i].domain].push_back(i);
  }
  for (const auto& [domain, count] : errors) {
    auto it = out.find(domain);
    if (it == out.end()) {
      if (count == 0) continue;
      throw Error(ErrorKind::InvalidConfig, "errors requested for unknown domain '" + domain + "'");
    }
    if (count > it->second.size()) {
      throw Error(ErrorKind::TooManyErrors, "domain '" + domain + "': " + std::to_string(count) + " errors for " +
                                                std::to_string(it->second.size()) + " instances");
    }
  }
  return out;
}

std::size_t requested(const std::map<DomainId, std::size_t>& errors, const DomainId& domain) {
  auto it = errors.find(domain);
  return it == errors.end() ? 0 : it->second;
}

void flip(InjectionResult& result, std::span<const Instance> instances, std::size_t index, const LabelSchema& schema,
          std::uint64_t seed) {
  auto& p = result.predictions[index];
  p.predicted = flip_target(instances[index], schema, seed);
  p.distribution.reset();
}

}  // namespace

InjectionResult inject_random(std::span<const Instance> instances, std::span<const Prediction> predictions,
                              const std::map<DomainId, std::size_t>& errors_per_domain, const LabelSchema& schema,
                              std::uint64_t seed) {
  const auto groups = domain_indices(instances, predictions, errors_per_domain);
  InjectionResult result;
  result.predictions.assign(predictions.begin(), predictions.end());
  for (const auto& [domain, idx] : groups) {
    const auto count = requested(errors_per_domain, domain);
    if (count == 0) continue;
    Engine engine(derive_seed(seed, "inject-random/" + domain));
    for (auto pick : sample_without_replacement(idx.size(), count, engine)) {
      flip(result, instances, idx[pick], schema, seed);
    }
  }
  return result;
}

InjectionResult inject_error_informed(std::span<const Instance> instances, std::span<const Prediction> predictions,
                                      std::span<const ErrorJudgment> judgments,
                                      const std::map<DomainId, std::size_t>& errors_per_domain,
                                      const LabelSchema& schema, std::uint64_t seed) {
  const auto groups = domain_indices(instances, predictions, errors_per_domain);
  std::unordered_map<std::string, double> error_prob;
  for (const auto& j : judgments) error_prob.emplace(j.instance_id, j.error_prob);

  InjectionResult result;
  result.predictions.assign(predictions.begin(), predictions.end());
  for (const auto& [domain, idx] : groups) {
    std::vector<std::size_t> flagged, rest;
    for (auto i : idx) {
      auto it = error_prob.find(instances[i].id);
      if (it == error_prob.end()) throw Error(ErrorKind::PreconditionViolated, "no judgment for '" + instances[i].id + "'");
      (it->second > 0.5 ? flagged : rest).push_back(i);
    }
    const auto count = requested(errors_per_domain, domain);
    result.spill[domain] = 0;
    if (count == 0) continue;
    Engine engine(derive_seed(seed, "inject-informed/" + domain));
    if (count <= flagged.size()) {
      for (auto pick : sample_without_replacement(flagged.size(), count, engine)) {
        flip(result, instances, flagged[pick], schema, seed);
      }
    } else {
      const auto spill = count - flagged.size();
      for (auto i : flagged) flip(result, instances, i, schema, seed);
      for (auto pick : sample_without_replacement(rest.size(), spill, engine)) {
        flip(result, instances, rest[pick], schema, seed);
      }
      result.spill[domain] = spill;
      result.spill_total += spill;
    }
  }
  return result;
}

NoisyJudge::NoisyJudge(double accuracy, std::uint64_t seed, std::string id)
    : accuracy_(accuracy), seed_(seed), id_(std::move(id)) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw Error(ErrorKind::OutOfRange, "judge accuracy must lie in [0, 1]");
}

BatchOutcome<ErrorJudgment> NoisyJudge::run(std::span<const Instance> instances,
                                            std::span<const Prediction> predictions) {
  BatchOutcome<ErrorJudgment> out;
  out.results.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const bool wrong = predictions[i].predicted != instances[i].label;
    const auto h = hash64(instances[i].id + '\x1f' + predictions[i].predicted, seed_);
    const bool judge_right = static_cast<double>(h >> 11) * 0x1.0p-53 < accuracy_;
    out.results.push_back({instances[i].id, id_, (judge_right == wrong) ? 1.0 : 0.0});
  }
  return out;
}

namespace {

struct SeedOutcome {
  std::optional<double> rho;
  std::size_t spill = 0;
};

SeedOutcome run_one(const InjectionPlan& plan, ErrorJudge& judge, std::size_t step, std::uint64_t seed) {
  const auto data = make_synthetic_set(plan, seed);
  const auto order = plan.resolved_domain_order();
  std::map<DomainId, std::size_t> errors;
  for (std::size_t i = 0; i < order.size(); ++i) errors[order[i]] = i * step;

  InjectionResult injected;
  if (plan.mode == InjectionMode::Random) {
    injected = inject_random(data.instances, data.predictions, errors, plan.schema, seed);
  } else {
    auto counterfactual = data.predictions;
    for (std::size_t i = 0; i < counterfactual.size(); ++i) {
      counterfactual[i].predicted = flip_target(data.instances[i], plan.schema, seed);
    }
    const auto flagged = judge_batch(judge, data.instances, counterfactual);
    injected = inject_error_informed(data.instances, data.predictions, flagged, errors, plan.schema, seed);
  }

  const auto judgments = judge_batch(judge, data.instances, injected.predictions);
  std::unordered_map<std::string, const ErrorJudgment*> by_id;
  for (const auto& j : judgments) by_id.emplace(j.instance_id, &j);

  std::vector<double> estimated, truth;
  std::size_t offset = 0;
  for (const auto& domain : order) {
    std::span<const Instance> insts(data.instances.data() + offset, plan.n_per_domain);
    std::span<const Prediction> preds(injected.predictions.data() + offset, plan.n_per_domain);
    std::vector<ErrorJudgment> dj;
    dj.reserve(plan.n_per_domain);
    for (const auto& inst : insts) dj.push_back(*by_id.at(inst.id));
    estimated.push_back(estimate_from_errors(domain, dj).estimated);
    truth.push_back(true_accuracy(insts, preds));
    offset += plan.n_per_domain;
  }
  SeedOutcome out;
  out.spill = injected.spill_total;
  try {
    out.rho = spearman(estimated, truth);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ZeroVariance) throw;
  }
  return out;
}

}  // namespace

SweepCurve run_sweep(const InjectionPlan& plan, ErrorJudge& judge) {
  plan.validate();
  SweepCurve curve;
  curve.mode = plan.mode;
  for (const auto step : plan.margin_steps) {
    std::vector<SeedOutcome> outcomes(plan.seeds.size());
    std::vector<std::exception_ptr> failures(plan.seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t s = next++; s < plan.seeds.size(); s = next++) {
        try {
          outcomes[s] = run_one(plan, judge, step, plan.seeds[s]);
        } catch (...) {
          failures[s] = std::current_exception();
        }
      }
    };
    const auto n_threads = std::min(plan.threads, plan.seeds.size());
    if (n_threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }

    SweepPoint point;
    point.margin_step = step;
    point.margin = static_cast<double>((plan.n_domains - 1) * step) / static_cast<double>(plan.n_per_domain);
    std::vector<double> defined;
    for (const auto& o : outcomes) {
      point.rhos.push_back(o.rho);
      point.spill_total += o.spill;
      if (o.rho) defined.push_back(*o.rho);
    }
    point.n_seeds = defined.size();
    if (defined.empty()) {
      point.status = "ZeroVariance";
    } else {
      point.rho_mean = std::accumulate(defined.begin(), defined.end(), 0.0) / static_cast<double>(defined.size());
      double ss = 0.0;
      for (double r : defined) ss += (r - *point.rho_mean) * (r - *point.rho_mean);
      point.rho_sd = std::sqrt(ss / static_cast<double>(defined.size()));
    }
    curve.points.push_back(std::move(point));
  }
  return curve;
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepCurve> curves) {
  std::string out = "margin,mode,rho_mean,rho_sd,n_seeds,spill_total\n";
  for (const auto& curve : curves) {
    for (const auto& p : curve.points) {
      out += format_double(p.margin) + "," + std::string(to_string(curve.mode)) + "," +
             (p.rho_mean ? format_double(*p.rho_mean) : "") + "," + (p.rho_mean ? format_double(p.rho_sd) : "") + "," +
             std::to_string(p.n_seeds) + "," + std::to_string(p.spill_total) + "\n";
    }
  }
  write_text_file(path, out);
}

void write_sweep_plot_json(const std::filesystem::path& path, std::span<const SweepCurve> curves) {
  json series = json::array();
  for (const auto& curve : curves) {
    json points = json::array();
    for (const auto& p : curve.points) {
      json rhos = json::array();
      for (const auto& r : p.rhos) rhos.push_back(r ? json(*r) : json(nullptr));
      points.push_back(json{{"margin", p.margin},
                            {"margin_step", p.margin_step},
                            {"rho_mean", p.rho_mean ? json(*p.rho_mean) : json(nullptr)},
                            {"rho_sd", p.rho_mean ? json(p.rho_sd) : json(nullptr)},
                            {"n_seeds", p.n_seeds},
                            {"spill_total", p.spill_total},
                            {"status", p.status},
                            {"rhos", std::move(rhos)}});
    }
    series.push_back(json{{"mode", to_string(curve.mode)}, {"points", std::move(points)}});
  }
  write_text_file(path, dump_json(json{{"x", "margin"}, {"y", "rho_mean"}, {"series", std::move(series)}}, 2) + "\n");
}

}  // namespace perfrank
