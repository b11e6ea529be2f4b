#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "perfrank/corpus.hpp"
#include "perfrank/providers.hpp"
#include "perfrank/records.hpp"

namespace perfrank {

enum class InjectionMode { Random, ErrorInformed };
std::string_view to_string(InjectionMode mode) noexcept;
InjectionMode injection_mode_from_string(std::string_view name);

struct InjectionPlan {
  InjectionMode mode = InjectionMode::Random;
  /// The i-th domain (0-based) receives i * margin_step errors. Generated as
  /// domain-00, domain-01, ... when empty.
  std::vector<DomainId> domain_order;
  /// One sweep point per entry; must be strictly increasing.
  std::vector<std::size_t> margin_steps;
  std::vector<std::uint64_t> seeds;
  std::size_t n_domains = 15;
  std::size_t n_per_domain = 500;
  LabelSchema schema = LabelSchema::offensive_language();
  /// Seeds evaluated concurrently; results do not depend on this value.
  std::size_t threads = 1;

  void validate() const;
  std::vector<DomainId> resolved_domain_order() const;
};

/// All-correct synthetic data: instances grouped by domain in plan order,
/// gold labels drawn uniformly from the schema, ids unique per seed.
struct SyntheticSet {
  std::vector<Instance> instances;
  std::vector<Prediction> predictions;  // aligned with instances
};
SyntheticSet make_synthetic_set(const InjectionPlan& plan, std::uint64_t seed);

/// Wrong label an injected error switches to: uniform over the labels other
/// than gold, fixed per (instance id, seed).
Label flip_target(const Instance& instance, const LabelSchema& schema, std::uint64_t seed);

struct InjectionResult {
  std::vector<Prediction> predictions;
  std::map<DomainId, std::size_t> spill;  // error-informed only
  std::size_t spill_total = 0;
};

/// Flips exactly errors_per_domain[k] uniformly chosen predictions in domain
/// k. `predictions` must be aligned with `instances` and all correct.
InjectionResult inject_random(std::span<const Instance> instances, std::span<const Prediction> predictions,
                              const std::map<DomainId, std::size_t>& errors_per_domain, const LabelSchema& schema,
                              std::uint64_t seed);

/// As inject_random, but draws flips from instances whose judgment has
/// error_prob > 0.5 first and spills any shortfall into the rest.
InjectionResult inject_error_informed(std::span<const Instance> instances, std::span<const Prediction> predictions,
                                      std::span<const ErrorJudgment> judgments,
                                      const std::map<DomainId, std::size_t>& errors_per_domain,
                                      const LabelSchema& schema, std::uint64_t seed);

/// Judge that is right with probability `accuracy`. Whether it is right on a
/// given (instance, predicted label) pair is a fixed function of the seed, so
/// repeated queries agree.
class NoisyJudge : public ErrorJudge {
 public:
  NoisyJudge(double accuracy, std::uint64_t seed, std::string id = "noisy");
  std::string id() const override { return id_; }
  BatchOutcome<ErrorJudgment> run(std::span<const Instance> instances,
                                  std::span<const Prediction> predictions) override;

 private:
  double accuracy_;
  std::uint64_t seed_;
  std::string id_;
};

struct SweepPoint {
  std::size_t margin_step = 0;
  double margin = 0.0;  // max minus min true accuracy across domains
  std::vector<std::optional<double>> rhos;  // per seed, in plan order
  std::optional<double> rho_mean;  // over defined rhos
  double rho_sd = 0.0;             // population SD over defined rhos
  std::size_t n_seeds = 0;         // defined rhos
  std::size_t spill_total = 0;
  std::string status = "ok";
};

struct SweepCurve {
  InjectionMode mode = InjectionMode::Random;
  std::vector<SweepPoint> points;
};

/// For each margin step and seed: synthesize, inject, judge, estimate with
/// estimate_from_errors and correlate with the true accuracies. In
/// error-informed mode the flagged set is where `judge` reports an error on
/// the prediction an injection would produce. `judge` must tolerate
/// concurrent calls when plan.threads > 1.
SweepCurve run_sweep(const InjectionPlan& plan, ErrorJudge& judge);

/// `margin,mode,rho_mean,rho_sd,n_seeds,spill_total`; undefined rho_mean is empty.
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepCurve> curves);
void write_sweep_plot_json(const std::filesystem::path& path, std::span<const SweepCurve> curves);

}  // namespace perfrank
