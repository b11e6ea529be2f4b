#include "perfrank/records.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "perfrank/error.hpp"
#include "perfrank/util.hpp"

namespace perfrank {

void validate_prediction(const Prediction& p, const LabelSchema& schema) {
  if (p.instance_id.empty()) throw Error(ErrorKind::InvalidRecord, "prediction without instance id");
  if (!schema.contains(p.predicted)) {
    throw Error(ErrorKind::UnknownLabel, "predicted '" + p.predicted + "' for '" + p.instance_id + "'");
  }
  if (p.confidence && !(*p.confidence >= 0.0 && *p.confidence <= 1.0)) {
    throw Error(ErrorKind::InvalidRecord, "confidence outside [0,1] for '" + p.instance_id + "'");
  }
  if (p.distribution) {
    double mass = 0.0;
    double best = -1.0;
    for (const auto& [label, prob] : *p.distribution) {
      if (!schema.contains(label)) {
        throw Error(ErrorKind::UnknownLabel, "distribution label '" + label + "' for '" + p.instance_id + "'");
      }
      if (!(prob >= 0.0 && prob <= 1.0)) {
        throw Error(ErrorKind::InvalidRecord, "distribution entry outside [0,1] for '" + p.instance_id + "'");
      }
      mass += prob;
      best = std::max(best, prob);
    }
    if (std::abs(mass - 1.0) > 1e-6) {
      throw Error(ErrorKind::InvalidRecord, "distribution for '" + p.instance_id + "' sums to " + format_double(mass));
    }
    auto it = p.distribution->find(p.predicted);
    if (it == p.distribution->end() || it->second < best) {
      throw Error(ErrorKind::InvalidRecord, "predicted label is not the distribution argmax for '" + p.instance_id + "'");
    }
  }
}

void validate_judgment(const ErrorJudgment& j) {
  if (j.instance_id.empty()) throw Error(ErrorKind::InvalidRecord, "judgment without instance id");
  if (!(j.error_prob >= 0.0 && j.error_prob <= 1.0)) {
    throw Error(ErrorKind::InvalidRecord, "error_prob outside [0,1] for '" + j.instance_id + "'");
  }
}

void sort_by_instance(std::vector<Prediction>& predictions) {
  std::sort(predictions.begin(), predictions.end(),
            [](const Prediction& a, const Prediction& b) { return a.instance_id < b.instance_id; });
}

void sort_by_instance(std::vector<ErrorJudgment>& judgments) {
  std::sort(judgments.begin(), judgments.end(),
            [](const ErrorJudgment& a, const ErrorJudgment& b) { return a.instance_id < b.instance_id; });
}

namespace {

std::string at(const std::filesystem::path& path, std::size_t line) {
  return " at " + path.string() + ":" + std::to_string(line);
}

template <typename T>
T field(const json& record, const char* name, const std::filesystem::path& path, std::size_t line) {
  auto it = record.find(name);
  if (it == record.end() || it->is_null()) throw Error(ErrorKind::MissingField, std::string("'") + name + "'" + at(path, line));
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::InvalidRecord, std::string("'") + name + "' has the wrong type" + at(path, line));
  }
}

}  // namespace

std::vector<Prediction> read_predictions(const std::filesystem::path& path, const LabelSchema& schema) {
  std::vector<Prediction> out;
  std::unordered_set<std::string> seen;
  for_each_jsonl(path, [&](std::size_t line, const json& r) {
    Prediction p;
    p.instance_id = field<std::string>(r, "id", path, line);
    p.predictor_id = field<std::string>(r, "predictor_id", path, line);
    p.predicted = field<std::string>(r, "predicted", path, line);
    if (auto it = r.find("confidence"); it != r.end() && !it->is_null()) {
      p.confidence = field<double>(r, "confidence", path, line);
    }
    if (auto it = r.find("distribution"); it != r.end() && !it->is_null()) {
      p.distribution = field<std::map<Label, double>>(r, "distribution", path, line);
    }
    try {
      validate_prediction(p, schema);
    } catch (const Error& e) {
      throw Error(e.kind(), e.detail() + at(path, line));
    }
    if (!seen.insert(p.instance_id).second) throw Error(ErrorKind::DuplicateId, p.instance_id + at(path, line));
    out.push_back(std::move(p));
  });
  return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions) {
  std::vector<json> records;
  records.reserve(predictions.size());
  for (const auto& p : predictions) {
    json r{{"id", p.instance_id}, {"predictor_id", p.predictor_id}, {"predicted", p.predicted}};
    if (p.confidence) r["confidence"] = *p.confidence;
    if (p.distribution) r["distribution"] = *p.distribution;
    records.push_back(std::move(r));
  }
  write_jsonl(path, records);
}

std::vector<ErrorJudgment> read_judgments(const std::filesystem::path& path) {
  std::vector<ErrorJudgment> out;
  std::unordered_set<std::string> seen;
  for_each_jsonl(path, [&](std::size_t line, const json& r) {
    ErrorJudgment j;
    j.instance_id = field<std::string>(r, "id", path, line);
    j.judge_id = field<std::string>(r, "judge_id", path, line);
    j.error_prob = field<double>(r, "error_prob", path, line);
    try {
      validate_judgment(j);
    } catch (const Error& e) {
      throw Error(e.kind(), e.detail() + at(path, line));
    }
    if (!seen.insert(j.instance_id).second) throw Error(ErrorKind::DuplicateId, j.instance_id + at(path, line));
    out.push_back(std::move(j));
  });
  return out;
}

void write_judgments(const std::filesystem::path& path, std::span<const ErrorJudgment> judgments) {
  std::vector<json> records;
  records.reserve(judgments.size());
  for (const auto& j : judgments) {
    records.push_back(json{{"id", j.instance_id}, {"judge_id", j.judge_id}, {"error_prob", j.error_prob}});
  }
  write_jsonl(path, records);
}

}  // namespace perfrank
