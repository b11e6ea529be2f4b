#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace perfrank {

using Label = std::string;
using DomainId = std::string;

enum class Task { OffensiveLanguage, Sentiment, Custom };

std::string_view to_string(Task task) noexcept;
Task task_from_string(std::string_view name);

/// Ordered label set of a classification task. Order is significant: it fixes
/// the class index used by the linear models.
struct LabelSchema {
  Task task = Task::Custom;
  std::vector<Label> labels;

  static LabelSchema offensive_language();
  static LabelSchema sentiment();
  static LabelSchema custom(std::vector<Label> labels);
  /// Resolves a task name; `labels` is only consulted for the custom task.
  static LabelSchema for_task(std::string_view task_name, std::vector<Label> labels = {});

  bool contains(std::string_view label) const noexcept;
  /// Throws UnknownLabel.
  std::size_t index_of(std::string_view label) const;
  void validate() const;

  friend bool operator==(const LabelSchema&, const LabelSchema&) = default;
};

struct Instance {
  std::string id;
  std::string text;
  Label label;
  DomainId domain;

  friend bool operator==(const Instance&, const Instance&) = default;
};

/// Star-rating cut points: ratings <= negative_max are negative, ratings
/// <= neutral_max are neutral, the rest positive.
struct RatingThresholds {
  int negative_max = 2;
  int neutral_max = 3;
};

Label map_rating_to_label(int rating, const RatingThresholds& thresholds = {});

/// A validated, immutable collection of domain-tagged instances.
class Corpus {
 public:
  /// Throws DuplicateId, UnknownLabel or InvalidRecord.
  Corpus(LabelSchema schema, std::vector<Instance> instances);

  const LabelSchema& schema() const noexcept { return schema_; }
  const std::vector<Instance>& instances() const noexcept { return instances_; }
  std::size_t size() const noexcept { return instances_.size(); }
  /// Sorted, distinct domain tags present in the corpus.
  const std::vector<DomainId>& domains() const noexcept { return domains_; }
  bool has_domain(std::string_view domain) const noexcept;

  std::vector<Instance> in_domain(std::string_view domain) const;
  std::map<DomainId, std::vector<Instance>> partition_by_domain() const;

 private:
  LabelSchema schema_;
  std::vector<Instance> instances_;
  std::vector<DomainId> domains_;
};

/// Reads line-delimited `{"id","text","label","domain"}` records. Under the
/// sentiment schema a record may carry an integer `rating` instead of (or in
/// agreement with) `label`.
Corpus load_dataset(const std::filesystem::path& path, const LabelSchema& schema,
                    const RatingThresholds& thresholds = {});

void write_instances(const std::filesystem::path& path, std::span<const Instance> instances);

/// Exactly `per_label` instances for every (domain, label) cell.
Corpus sample_balanced(const Corpus& corpus, std::size_t per_label, std::uint64_t seed);

struct TrainTestSplit {
  std::vector<Instance> train;
  std::vector<Instance> test;
};

/// |test| = round(test_fraction * n), clamped to [1, n - 1]. Both halves keep
/// the input order.
TrainTestSplit split_train_test(std::span<const Instance> instances, double test_fraction,
                                std::uint64_t seed);

}  // namespace perfrank
