#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "perfrank/corpus.hpp"
#include "perfrank/features.hpp"

namespace perfrank {

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 100;
  double l2 = 1e-4;
  std::size_t batch_size = 64;
  std::uint64_t seed = 42;
  /// Stop once |loss_t - loss_{t-1}| < tolerance; 0 disables early stopping.
  double tolerance = 0.0;

  void validate() const;
};

/// Multinomial logistic regression: softmax(W x + b), W is n_classes x n_features.
class LinearModel {
 public:
  LinearModel(std::vector<Label> classes, std::size_t n_features, std::string vocab_fingerprint = {});

  const std::vector<Label>& classes() const noexcept { return classes_; }
  std::size_t n_classes() const noexcept { return classes_.size(); }
  std::size_t n_features() const noexcept { return n_features_; }
  const std::string& vocab_fingerprint() const noexcept { return vocab_fingerprint_; }

  double weight(std::size_t cls, std::size_t feature) const { return weights_[cls * n_features_ + feature]; }
  double& weight(std::size_t cls, std::size_t feature) { return weights_[cls * n_features_ + feature]; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> weights() noexcept { return weights_; }
  std::span<const double> bias() const noexcept { return bias_; }
  std::span<double> bias() noexcept { return bias_; }

  /// Throws DimensionMismatch when x has an index >= n_features().
  std::vector<double> logits(const SparseVector& x) const;

  /// Mean training loss per epoch; empty for models that were not trained here.
  const std::vector<double>& loss_history() const noexcept { return loss_history_; }
  std::optional<double> final_loss() const noexcept {
    return loss_history_.empty() ? std::nullopt : std::optional<double>(loss_history_.back());
  }

  void save(const std::filesystem::path& path) const;
  static LinearModel load(const std::filesystem::path& path);

  friend bool operator==(const LinearModel&, const LinearModel&) = default;

 private:
  friend LinearModel train(std::span<const SparseVector>, std::span<const std::size_t>, std::vector<Label>,
                           std::size_t, const TrainConfig&, std::string);

  std::vector<Label> classes_;
  std::size_t n_features_;
  std::string vocab_fingerprint_;
  std::vector<double> weights_;
  std::vector<double> bias_;
  std::vector<double> loss_history_;
};

/// softmax(W x + b).
std::vector<double> predict_proba(const LinearModel& model, const SparseVector& x);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> weights;  // same layout as LinearModel::weights()
  std::vector<double> bias;
};

/// Mean cross-entropy + (l2 / 2) * ||W||^2 and its analytic gradient. The
/// bias is not regularized.
LossGradient loss_and_gradient(const LinearModel& model, std::span<const SparseVector> X,
                               std::span<const std::size_t> y, double l2);

/// Mini-batch gradient descent with a fixed learning rate. Bit-for-bit
/// deterministic given config.seed.
LinearModel train(std::span<const SparseVector> X, std::span<const std::size_t> y, std::vector<Label> classes,
                  std::size_t n_features, const TrainConfig& config, std::string vocab_fingerprint = {});

/// A vocabulary plus the model trained on its features.
struct TextClassifier {
  Vocabulary vocab;
  LinearModel model;

  /// Throws FingerprintMismatch when the model was trained on another vocabulary.
  void check_binding() const;
  void save(const std::filesystem::path& dir) const;
  static TextClassifier load(const std::filesystem::path& dir);
};

}  // namespace perfrank
