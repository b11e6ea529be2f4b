#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "perfrank/chat_client.hpp"
#include "perfrank/corpus.hpp"
#include "perfrank/embeddings.hpp"
#include "perfrank/features.hpp"
#include "perfrank/linear.hpp"
#include "perfrank/ranking.hpp"
#include "perfrank/variation.hpp"

namespace perfrank {

/// One base-model or error-model provider. `kind` selects which of the other
/// fields apply: linear (features, train, append_confidence), file (file),
/// chat (chat, transcripts, exemplars_per_label), oracle (error side only).
struct ProviderSpec {
  std::string kind;
  FeatureConfig features;
  TrainConfig train;
  bool append_confidence = false;
  std::filesystem::path file;
  ChatProviderConfig chat;
  std::filesystem::path transcripts;
  std::size_t exemplars_per_label = 2;
};

struct SemanticDriftConfig {
  /// "predicted_label" embeds the predicted label text, "input_text" the instance text.
  std::string query = "predicted_label";
  EmbeddingConfig embeddings;
};

struct SweepConfig {
  std::vector<InjectionMode> modes{InjectionMode::Random, InjectionMode::ErrorInformed};
  InjectionPlan plan;
  std::string judge = "noisy";  // noisy | oracle
  double judge_accuracy = 0.7;
  std::uint64_t judge_seed = 42;
};

struct ExperimentConfig {
  std::filesystem::path dataset;
  LabelSchema schema = LabelSchema::offensive_language();
  RatingThresholds rating_thresholds;
  std::size_t per_label = 0;  // 0 keeps the whole dataset
  DomainId training_domain;
  double test_fraction = 0.1;
  std::uint64_t seed = 42;
  std::filesystem::path out;
  ProviderSpec base;
  ProviderSpec error;
  std::vector<std::string> estimators{"error_model"};
  double threshold = 0.5;
  SemanticDriftConfig semantic_drift;
  std::optional<SweepConfig> sweep;
  /// Hash of the config document, recorded in the manifest.
  std::string config_sha256;

  /// Parses a config document. Relative paths resolve against `base_dir`.
  static ExperimentConfig from_json(const json& doc, const std::filesystem::path& base_dir);
  void validate() const;
  /// Replaces the top-level seed and the seeds of both linear trainers.
  void override_seed(std::uint64_t new_seed);
  bool uses(std::string_view estimator) const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

enum class Stage { Ingest, TrainBase, Predict, Judge, Estimate, Evaluate, Report, Sweep };
std::string_view to_string(Stage stage) noexcept;
Stage stage_from_string(std::string_view name);
/// Stages `run` executes, in order. Sweep is separate.
const std::vector<Stage>& pipeline_stages();

/// Runs pipeline stages against files under config.out. Each stage reads only
/// the files earlier stages wrote, so any stage can be rerun on its own or fed
/// hand-made files. The manifest (`manifest.json`) is rewritten after every
/// stage with content hashes of inputs and outputs.
class Experiment {
 public:
  Experiment(ExperimentConfig config, bool online);

  const ExperimentConfig& config() const noexcept { return config_; }
  std::filesystem::path path(std::string_view relative) const { return config_.out / relative; }

  void run_stage(Stage stage);
  /// Runs `from` and every later pipeline stage; returns the ranking reports.
  std::vector<RankingReport> run(Stage from = Stage::Ingest);

 private:
  void ingest();
  void train_base();
  void predict();
  void judge();
  void estimate();
  void evaluate();
  void report();
  void sweep();

  Corpus load_corpus() const;
  std::vector<Instance> read_split(std::string_view name) const;
  std::shared_ptr<ChatClient> chat_client(const ProviderSpec& spec) const;
  void write_manifest(const std::string& status, std::optional<Stage> failed, const std::string& error);
  [[noreturn]] void fail_partial(Stage stage, const std::vector<FailedItem>& failed);

  ExperimentConfig config_;
  bool online_;
  std::vector<std::string> completed_;
  std::vector<std::string> warnings_;
};

/// Equivalent to Experiment(config, online).run().
std::vector<RankingReport> run_experiment(const ExperimentConfig& config, bool online = false);

std::vector<Instance> read_instances(const std::filesystem::path& path, const LabelSchema& schema);

}  // namespace perfrank
