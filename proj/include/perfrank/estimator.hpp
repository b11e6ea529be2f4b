#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "perfrank/corpus.hpp"
#include "perfrank/features.hpp"
#include "perfrank/records.hpp"

namespace perfrank {

namespace method {
inline constexpr std::string_view kErrorModel = "error_model";
inline constexpr std::string_view kZeroShot = "zero_shot";
inline constexpr std::string_view kSemanticDrift = "semantic_drift";
inline constexpr std::string_view kCovariateDrift = "covariate_drift";
}  // namespace method

/// True when `name` is one of the four estimator names above.
bool is_known_method(std::string_view name) noexcept;

struct DomainEstimate {
  DomainId domain;
  std::string method;
  double estimated = 0.0;  // in [0, 1]
  /// Unclamped score when it can leave [0, 1] (semantic drift). Ranking uses
  /// this value when present.
  std::optional<double> raw;
  std::optional<double> true_accuracy;
  std::size_t n = 0;

  double ranking_score() const noexcept { return raw.value_or(estimated); }

  friend bool operator==(const DomainEstimate&, const DomainEstimate&) = default;
};

/// 1 - #{error_prob > threshold} / n.
DomainEstimate estimate_from_errors(const DomainId& domain, std::span<const ErrorJudgment> judgments,
                                    double threshold = 0.5);

/// Mean confidence.
DomainEstimate zero_shot_estimate(const DomainId& domain, std::span<const Prediction> predictions);

double cosine(std::span<const double> u, std::span<const double> v);

/// Mean over instances of max_c cos(query_i, candidate_c). `queries` maps
/// instance id to its query vector; which text was embedded for the query is
/// the caller's choice.
DomainEstimate semantic_drift_estimate(const DomainId& domain, std::span<const Prediction> predictions,
                                       const std::map<std::string, std::vector<double>>& queries,
                                       const std::map<Label, std::vector<double>>& label_embeddings);

/// 1 - JSD_2(train, target).
DomainEstimate covariate_drift_estimate(const DomainId& domain, const TokenDistribution& train_dist,
                                        const TokenDistribution& target_dist, std::size_t n);

/// Fraction of predictions matching the gold label of the instance with the
/// same id. Throws MissingPrediction when an instance has no prediction.
double true_accuracy(std::span<const Instance> instances, std::span<const Prediction> predictions);

std::vector<DomainEstimate> read_estimates(const std::filesystem::path& path);
void write_estimates(const std::filesystem::path& path, std::span<const DomainEstimate> estimates);

}  // namespace perfrank
