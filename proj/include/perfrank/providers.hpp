#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "perfrank/chat_client.hpp"
#include "perfrank/corpus.hpp"
#include "perfrank/linear.hpp"
#include "perfrank/prompts.hpp"
#include "perfrank/records.hpp"

namespace perfrank {

struct FailedItem {
  std::string id;
  std::string reason;
};

/// Results plus the ids that could not be produced. Every requested id
/// appears in exactly one of the two lists.
template <typename T>
struct BatchOutcome {
  std::vector<T> results;
  std::vector<FailedItem> failed;
};

/// Base-model provider (Step 1).
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string id() const = 0;
  virtual BatchOutcome<Prediction> run(std::span<const Instance> instances) = 0;
  /// True when confidences are placeholders rather than model probabilities.
  virtual bool confidence_degraded() const { return false; }
};

/// Error-model provider (Step 2). predictions[i] belongs to instances[i].
class ErrorJudge {
 public:
  virtual ~ErrorJudge() = default;
  virtual std::string id() const = 0;
  virtual BatchOutcome<ErrorJudgment> run(std::span<const Instance> instances,
                                          std::span<const Prediction> predictions) = 0;
};

/// Runs a predictor and checks coverage; results sorted by instance id.
BatchOutcome<Prediction> collect_predictions(Predictor& predictor, std::span<const Instance> instances);
/// As collect_predictions, but throws PartialFailure when anything failed.
std::vector<Prediction> predict_batch(Predictor& predictor, std::span<const Instance> instances);

/// Pairs each instance with its prediction by id (MissingPrediction when
/// absent), runs the judge and checks coverage; results sorted by id.
BatchOutcome<ErrorJudgment> collect_judgments(ErrorJudge& judge, std::span<const Instance> instances,
                                              std::span<const Prediction> predictions);
std::vector<ErrorJudgment> judge_batch(ErrorJudge& judge, std::span<const Instance> instances,
                                       std::span<const Prediction> predictions);

// ---- in-process linear models ------------------------------------------

TextClassifier train_text_classifier(std::span<const Instance> instances, const LabelSchema& schema,
                                     const FeatureConfig& features, const TrainConfig& train_config);

/// Trains P(error | text) on e_i = 1[predicted != gold]. With
/// `append_confidence`, the prediction's confidence is one extra feature.
TextClassifier train_error_model(std::span<const Instance> instances, std::span<const Prediction> predictions,
                                 const FeatureConfig& features, const TrainConfig& train_config,
                                 bool append_confidence = false);

class LinearPredictor : public Predictor {
 public:
  explicit LinearPredictor(TextClassifier classifier, std::string id = "linear");
  std::string id() const override { return id_; }
  BatchOutcome<Prediction> run(std::span<const Instance> instances) override;

 private:
  TextClassifier classifier_;
  std::string id_;
};

class LinearJudge : public ErrorJudge {
 public:
  explicit LinearJudge(TextClassifier classifier, std::string id = "linear");
  std::string id() const override { return id_; }
  BatchOutcome<ErrorJudgment> run(std::span<const Instance> instances,
                                  std::span<const Prediction> predictions) override;

 private:
  TextClassifier classifier_;
  std::string id_;
  std::size_t error_class_;
  bool uses_confidence_;
};

// ---- file-backed providers ---------------------------------------------

class FilePredictor : public Predictor {
 public:
  FilePredictor(std::vector<Prediction> predictions, std::string id = "file");
  static FilePredictor from_file(const std::filesystem::path& path, const LabelSchema& schema);
  std::string id() const override { return id_; }
  BatchOutcome<Prediction> run(std::span<const Instance> instances) override;

 private:
  std::map<std::string, Prediction> by_id_;
  std::string id_;
};

class FileJudge : public ErrorJudge {
 public:
  FileJudge(std::vector<ErrorJudgment> judgments, std::string id = "file");
  static FileJudge from_file(const std::filesystem::path& path);
  std::string id() const override { return id_; }
  BatchOutcome<ErrorJudgment> run(std::span<const Instance> instances,
                                  std::span<const Prediction> predictions) override;

 private:
  std::map<std::string, ErrorJudgment> by_id_;
  std::string id_;
};

/// error_prob = 1[predicted != gold]; reads the gold label off the instance.
class OracleJudge : public ErrorJudge {
 public:
  explicit OracleJudge(std::string id = "oracle") : id_(std::move(id)) {}
  std::string id() const override { return id_; }
  BatchOutcome<ErrorJudgment> run(std::span<const Instance> instances,
                                  std::span<const Prediction> predictions) override;

 private:
  std::string id_;
};

// ---- remote chat models --------------------------------------------------

/// exp(logprob) of the first reply token that begins the parsed label, skipping
/// a leading "Label:" echo. nullopt when the reply carries no usable logprobs.
std::optional<double> label_confidence(const ChatReply& reply, std::string_view label);

/// Few-shot prompted base model. Confidence comes from token logprobs when the
/// endpoint returns them, otherwise it is 1.0 and confidence_degraded() is set.
class ChatPredictor : public Predictor {
 public:
  ChatPredictor(std::shared_ptr<ChatClient> client, LabelSchema schema, std::vector<BaseExemplar> exemplars,
                std::string id);
  std::string id() const override { return id_; }
  BatchOutcome<Prediction> run(std::span<const Instance> instances) override;
  bool confidence_degraded() const override { return degraded_; }

 private:
  std::shared_ptr<ChatClient> client_;
  LabelSchema schema_;
  PromptTemplate template_;
  std::vector<BaseExemplar> exemplars_;
  std::string id_;
  bool degraded_ = false;
};

/// Few-shot prompted correctness judge: "error" -> 1.0, "correct" -> 0.0.
class ChatJudge : public ErrorJudge {
 public:
  ChatJudge(std::shared_ptr<ChatClient> client, std::vector<ErrorExemplar> exemplars, std::string id);
  std::string id() const override { return id_; }
  BatchOutcome<ErrorJudgment> run(std::span<const Instance> instances,
                                  std::span<const Prediction> predictions) override;

 private:
  std::shared_ptr<ChatClient> client_;
  PromptTemplate template_;
  std::vector<ErrorExemplar> exemplars_;
  std::string id_;
};

}  // namespace perfrank
