#include "perfrank/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "perfrank/error.hpp"
#include "perfrank/util.hpp"

namespace perfrank {

bool is_known_method(std::string_view name) noexcept {
  return name == method::kErrorModel || name == method::kZeroShot || name == method::kSemanticDrift ||
         name == method::kCovariateDrift;
}

DomainEstimate estimate_from_errors(const DomainId& domain, std::span<const ErrorJudgment> judgments,
                                    double threshold) {
  if (judgments.empty()) throw Error(ErrorKind::EmptyDomain, "no judgments for domain '" + domain + "'");
  std::size_t flagged = 0;
  for (const auto& j : judgments) {
    if (!std::isfinite(j.error_prob)) throw Error(ErrorKind::NonFinite, "error_prob for '" + j.instance_id + "'");
    if (j.error_prob > threshold) ++flagged;
  }
  const auto n = judgments.size();
  DomainEstimate out;
  out.domain = domain;
  out.method = std::string(method::kErrorModel);
  out.estimated = 1.0 - static_cast<double>(flagged) / static_cast<double>(n);
  out.n = n;
  return out;
}

DomainEstimate zero_shot_estimate(const DomainId& domain, std::span<const Prediction> predictions) {
  if (predictions.empty()) throw Error(ErrorKind::EmptyDomain, "no predictions for domain '" + domain + "'");
  double sum = 0.0;
  for (const auto& p : predictions) {
    if (!p.confidence) throw Error(ErrorKind::MissingConfidence, p.instance_id);
    sum += *p.confidence;
  }
  DomainEstimate out;
  out.domain = domain;
  out.method = std::string(method::kZeroShot);
  out.estimated = std::clamp(sum / static_cast<double>(predictions.size()), 0.0, 1.0);
  out.n = predictions.size();
  return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "cosine of vectors with " + std::to_string(u.size()) + " and " + std::to_string(v.size()) + " entries");
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw Error(ErrorKind::ZeroVector, "cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

DomainEstimate semantic_drift_estimate(const DomainId& domain, std::span<const Prediction> predictions,
                                       const std::map<std::string, std::vector<double>>& queries,
                                       const std::map<Label, std::vector<double>>& label_embeddings) {
  if (predictions.empty()) throw Error(ErrorKind::EmptyDomain, "no predictions for domain '" + domain + "'");
  if (label_embeddings.empty()) throw Error(ErrorKind::MissingEmbedding, "no candidate label embeddings");
  double sum = 0.0;
  for (const auto& p : predictions) {
    auto q = queries.find(p.instance_id);
    if (q == queries.end()) throw Error(ErrorKind::MissingEmbedding, "query for '" + p.instance_id + "'");
    double best = -1.0;
    for (const auto& [label, vec] : label_embeddings) best = std::max(best, cosine(q->second, vec));
    sum += best;
  }
  const double mean = sum / static_cast<double>(predictions.size());
  DomainEstimate out;
  out.domain = domain;
  out.method = std::string(method::kSemanticDrift);
  out.estimated = std::clamp(mean, 0.0, 1.0);
  out.raw = mean;
  out.n = predictions.size();
  return out;
}

DomainEstimate covariate_drift_estimate(const DomainId& domain, const TokenDistribution& train_dist,
                                        const TokenDistribution& target_dist, std::size_t n) {
  DomainEstimate out;
  out.domain = domain;
  out.method = std::string(method::kCovariateDrift);
  out.estimated = std::clamp(1.0 - js_divergence(train_dist, target_dist), 0.0, 1.0);
  out.n = n;
  return out;
}

double true_accuracy(std::span<const Instance> instances, std::span<const Prediction> predictions) {
  if (instances.empty()) throw Error(ErrorKind::EmptyDomain, "no instances");
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.instance_id, &p);
  std::size_t wrong = 0;
  for (const auto& inst : instances) {
    auto it = by_id.find(inst.id);
    if (it == by_id.end()) throw Error(ErrorKind::MissingPrediction, inst.id);
    if (it->second->predicted != inst.label) ++wrong;
  }
  // Same arithmetic as estimate_from_errors, so an oracle judge matches bit for bit.
  return 1.0 - static_cast<double>(wrong) / static_cast<double>(instances.size());
}

namespace {

double unit_field(const json& r, const char* key, const std::string& where) {
  const double v = r.at(key).get<double>();
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw Error(ErrorKind::OutOfRange, where + ": " + key + " must lie in [0, 1]");
  }
  return v;
}

}  // namespace

std::vector<DomainEstimate> read_estimates(const std::filesystem::path& path) {
  std::vector<DomainEstimate> out;
  for_each_jsonl(path, [&](std::size_t line, const json& r) {
    const std::string where = path.string() + ":" + std::to_string(line);
    try {
      DomainEstimate e;
      e.domain = r.at("domain").get<std::string>();
      e.method = r.at("method").get<std::string>();
      e.estimated = unit_field(r, "estimated", where);
      if (r.contains("raw") && !r["raw"].is_null()) e.raw = r["raw"].get<double>();
      if (r.contains("true_accuracy") && !r["true_accuracy"].is_null()) {
        e.true_accuracy = unit_field(r, "true_accuracy", where);
      }
      const auto n = r.at("n").get<long long>();
      if (n < 1) throw Error(ErrorKind::OutOfRange, where + ": n must be >= 1");
      e.n = static_cast<std::size_t>(n);
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw Error(ErrorKind::MissingField, where + ": " + ex.what());
    }
  });
  return out;
}

void write_estimates(const std::filesystem::path& path, std::span<const DomainEstimate> estimates) {
  std::vector<json> lines;
  lines.reserve(estimates.size());
  for (const auto& e : estimates) {
    json r{{"domain", e.domain}, {"method", e.method}, {"estimated", e.estimated}};
    if (e.raw) r["raw"] = *e.raw;
    if (e.true_accuracy) r["true_accuracy"] = *e.true_accuracy;
    r["n"] = e.n;
    lines.push_back(std::move(r));
  }
  write_jsonl(path, lines);
}

}  // namespace perfrank
