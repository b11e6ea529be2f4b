#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "perfrank/corpus.hpp"
#include "perfrank/estimator.hpp"
#include "perfrank/util.hpp"

namespace perfrank {

/// Ascending 1-based ranks; tied values share the mean of their positions.
std::vector<double> rank_with_ties(std::span<const double> values);

double pearson(std::span<const double> xs, std::span<const double> ys);
/// Pearson correlation of the tie-averaged ranks.
double spearman(std::span<const double> xs, std::span<const double> ys);

double accuracy(std::span<const Label> gold, std::span<const Label> pred);
/// Unweighted mean of per-class F1 over the schema; empty classes score 0.
double macro_f1(std::span<const Label> gold, std::span<const Label> pred, const LabelSchema& schema);

struct SummaryStats {
  double mean = 0.0;
  double sd = 0.0;  // population (divide by n)
};
SummaryStats summary_stats(std::span<const double> values);

struct RankingReport {
  DomainId training_domain;
  std::string method;
  /// nullopt when the correlation is undefined; `status` then names the reason.
  std::optional<double> rho;
  std::string status = "ok";
  std::size_t n_domains = 0;
  std::vector<DomainEstimate> per_domain;  // sorted by domain
  SummaryStats true_accuracy_stats;
};

/// Spearman of ranking_score() against true_accuracy over `estimates`, which
/// must all carry a true accuracy and share `method`. Fewer than two domains
/// or constant inputs yield rho = nullopt with a status instead of throwing.
RankingReport build_ranking_report(const DomainId& training_domain, const std::string& method,
                                   std::vector<DomainEstimate> estimates);

json to_json(const RankingReport& report);
RankingReport ranking_report_from_json(const json& doc);

/// One JSON document holding every report, ordered by (training_domain, method).
void write_reports_json(const std::filesystem::path& path, std::vector<RankingReport> reports);
std::vector<RankingReport> read_reports_json(const std::filesystem::path& path);
/// `training_domain,method,rho`, empty rho when undefined.
void write_reports_csv(const std::filesystem::path& path, std::vector<RankingReport> reports);

/// Wide table: one row per training domain, one column per method, plus a
/// final `avg` row of the defined values in each column.
std::string merge_reports_table(std::vector<RankingReport> reports);

}  // namespace perfrank
