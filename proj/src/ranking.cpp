#include "perfrank/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "perfrank/error.hpp"

namespace perfrank {

std::vector<double> rank_with_ties(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::TooFew, "cannot rank an empty list");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "cannot rank a non-finite value");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(xs.size()) + " vs " + std::to_string(ys.size()) + " values");
  }
  if (xs.size() < 2) throw Error(ErrorKind::TooFew, "correlation needs at least two points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::ZeroVariance, "correlation of a constant sequence");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(xs.size()) + " vs " + std::to_string(ys.size()) + " values");
  }
  if (xs.size() < 2) throw Error(ErrorKind::TooFew, "correlation needs at least two points");
  const auto rx = rank_with_ties(xs);
  const auto ry = rank_with_ties(ys);
  return pearson(rx, ry);
}

double accuracy(std::span<const Label> gold, std::span<const Label> pred) {
  if (gold.size() != pred.size() || gold.empty()) {
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(gold.size()) + " gold vs " + std::to_string(pred.size()) + " predicted labels");
  }
  std::size_t misses = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) misses += gold[i] != pred[i] ? 1 : 0;
  return 1.0 - static_cast<double>(misses) / static_cast<double>(gold.size());
}

double macro_f1(std::span<const Label> gold, std::span<const Label> pred, const LabelSchema& schema) {
  if (gold.size() != pred.size() || gold.empty()) {
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(gold.size()) + " gold vs " + std::to_string(pred.size()) + " predicted labels");
  }
  double total = 0.0;
  for (const auto& label : schema.labels) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool g = gold[i] == label;
      const bool p = pred[i] == label;
      tp += g && p;
      fp += !g && p;
      fn += g && !p;
    }
    const std::size_t denom = 2 * tp + fp + fn;
    total += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return total / static_cast<double>(schema.labels.size());
}

SummaryStats summary_stats(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorKind::TooFew, "summary statistics need at least two values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

RankingReport build_ranking_report(const DomainId& training_domain, const std::string& method,
                                   std::vector<DomainEstimate> estimates) {
  std::sort(estimates.begin(), estimates.end(),
            [](const DomainEstimate& a, const DomainEstimate& b) { return a.domain < b.domain; });
  std::set<DomainId> seen;
  std::vector<double> scores, truths;
  for (const auto& e : estimates) {
    if (e.method != method) {
      throw Error(ErrorKind::InvalidRecord, "estimate for '" + e.domain + "' has method '" + e.method + "', expected '" +
                                                method + "'");
    }
    if (!seen.insert(e.domain).second) throw Error(ErrorKind::DuplicateId, "domain '" + e.domain + "' estimated twice");
    if (!e.true_accuracy) throw Error(ErrorKind::MissingField, "true_accuracy for domain '" + e.domain + "'");
    scores.push_back(e.ranking_score());
    truths.push_back(*e.true_accuracy);
  }
  RankingReport report;
  report.training_domain = training_domain;
  report.method = method;
  report.n_domains = estimates.size();
  if (truths.size() >= 2) report.true_accuracy_stats = summary_stats(truths);
  if (truths.size() < 2) {
    report.status = "TooFew";
  } else {
    try {
      report.rho = spearman(truths, scores);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ZeroVariance) throw;
      report.status = "ZeroVariance";
    }
  }
  report.per_domain = std::move(estimates);
  return report;
}

namespace {

json estimate_json(const DomainEstimate& e) {
  json r{{"domain", e.domain}, {"method", e.method}, {"estimated", e.estimated}, {"n", e.n}};
  if (e.raw) r["raw"] = *e.raw;
  if (e.true_accuracy) r["true_accuracy"] = *e.true_accuracy;
  return r;
}

DomainEstimate estimate_from_json(const json& r) {
  DomainEstimate e;
  e.domain = r.at("domain").get<std::string>();
  e.method = r.at("method").get<std::string>();
  e.estimated = r.at("estimated").get<double>();
  e.n = r.at("n").get<std::size_t>();
  if (r.contains("raw")) e.raw = r["raw"].get<double>();
  if (r.contains("true_accuracy")) e.true_accuracy = r["true_accuracy"].get<double>();
  return e;
}

void sort_reports(std::vector<RankingReport>& reports) {
  std::sort(reports.begin(), reports.end(), [](const RankingReport& a, const RankingReport& b) {
    return std::tie(a.training_domain, a.method) < std::tie(b.training_domain, b.method);
  });
}

std::string csv_cell(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

json to_json(const RankingReport& report) {
  json per_domain = json::array();
  for (const auto& e : report.per_domain) per_domain.push_back(estimate_json(e));
  return json{{"training_domain", report.training_domain},
              {"method", report.method},
              {"rho", report.rho ? json(*report.rho) : json(nullptr)},
              {"status", report.status},
              {"n_domains", report.n_domains},
              {"per_domain", std::move(per_domain)},
              {"distribution_stats", {{"mean", report.true_accuracy_stats.mean}, {"sd", report.true_accuracy_stats.sd}}}};
}

RankingReport ranking_report_from_json(const json& doc) {
  try {
    RankingReport r;
    r.training_domain = doc.at("training_domain").get<std::string>();
    r.method = doc.at("method").get<std::string>();
    if (!doc.at("rho").is_null()) r.rho = doc["rho"].get<double>();
    r.status = doc.value("status", std::string("ok"));
    r.n_domains = doc.at("n_domains").get<std::size_t>();
    for (const auto& e : doc.at("per_domain")) r.per_domain.push_back(estimate_from_json(e));
    r.true_accuracy_stats.mean = doc.at("distribution_stats").at("mean").get<double>();
    r.true_accuracy_stats.sd = doc.at("distribution_stats").at("sd").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed ranking report: ") + e.what());
  }
}

void write_reports_json(const std::filesystem::path& path, std::vector<RankingReport> reports) {
  sort_reports(reports);
  json doc = json::array();
  for (const auto& r : reports) doc.push_back(to_json(r));
  write_text_file(path, dump_json(doc, 2) + "\n");
}

std::vector<RankingReport> read_reports_json(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  std::vector<RankingReport> out;
  if (doc.is_object()) {
    out.push_back(ranking_report_from_json(doc));
  } else if (doc.is_array()) {
    for (const auto& r : doc) out.push_back(ranking_report_from_json(r));
  } else {
    throw Error(ErrorKind::Format, path.string() + ": expected a report object or array");
  }
  return out;
}

void write_reports_csv(const std::filesystem::path& path, std::vector<RankingReport> reports) {
  sort_reports(reports);
  std::string out = "training_domain,method,rho\n";
  for (const auto& r : reports) {
    out += csv_cell(r.training_domain) + "," + csv_cell(r.method) + "," + (r.rho ? format_double(*r.rho) : "") + "\n";
  }
  write_text_file(path, out);
}

std::string merge_reports_table(std::vector<RankingReport> reports) {
  sort_reports(reports);
  std::vector<std::string> methods;
  std::map<DomainId, std::map<std::string, std::optional<double>>> rows;
  for (const auto& r : reports) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    if (!rows[r.training_domain].emplace(r.method, r.rho).second) {
      throw Error(ErrorKind::DuplicateId, "two reports for (" + r.training_domain + ", " + r.method + ")");
    }
  }
  std::sort(methods.begin(), methods.end());
  std::string out = "training_domain";
  for (const auto& m : methods) out += "," + csv_cell(m);
  out += "\n";
  std::map<std::string, std::vector<double>> columns;
  for (const auto& [domain, cells] : rows) {
    out += csv_cell(domain);
    for (const auto& m : methods) {
      out += ",";
      auto it = cells.find(m);
      if (it != cells.end() && it->second) {
        out += format_double(*it->second);
        columns[m].push_back(*it->second);
      }
    }
    out += "\n";
  }
  out += "avg";
  for (const auto& m : methods) {
    out += ",";
    const auto& col = columns[m];
    if (!col.empty()) out += format_double(std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size()));
  }
  out += "\n";
  return out;
}

}  // namespace perfrank
