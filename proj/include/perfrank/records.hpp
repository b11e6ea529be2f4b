#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "perfrank/corpus.hpp"

namespace perfrank {

/// A base model's output for one instance.
struct Prediction {
  std::string instance_id;
  std::string predictor_id;
  Label predicted;
  std::optional<double> confidence;
  std::optional<std::map<Label, double>> distribution;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// An error model's belief that the prediction on an instance is wrong.
struct ErrorJudgment {
  std::string instance_id;
  std::string judge_id;
  double error_prob = 0.0;

  friend bool operator==(const ErrorJudgment&, const ErrorJudgment&) = default;
};

/// Checks label membership, confidence range, distribution mass (1 +- 1e-6)
/// and argmax agreement. Throws UnknownLabel / InvalidRecord.
void validate_prediction(const Prediction& prediction, const LabelSchema& schema);
void validate_judgment(const ErrorJudgment& judgment);

/// Orders by instance id; used for every result list the library emits.
void sort_by_instance(std::vector<Prediction>& predictions);
void sort_by_instance(std::vector<ErrorJudgment>& judgments);

std::vector<Prediction> read_predictions(const std::filesystem::path& path, const LabelSchema& schema);
void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions);

std::vector<ErrorJudgment> read_judgments(const std::filesystem::path& path);
void write_judgments(const std::filesystem::path& path, std::span<const ErrorJudgment> judgments);

}  // namespace perfrank
