#include "perfrank/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "perfrank/error.hpp"
#include "perfrank/util.hpp"

namespace perfrank {

std::string_view to_string(Task task) noexcept {
  switch (task) {
    case Task::OffensiveLanguage: return "offensive-language";
    case Task::Sentiment: return "sentiment";
    case Task::Custom: return "custom";
  }
  return "custom";
}

Task task_from_string(std::string_view name) {
  if (name == "offensive-language") return Task::OffensiveLanguage;
  if (name == "sentiment") return Task::Sentiment;
  if (name == "custom") return Task::Custom;
  throw Error(ErrorKind::InvalidConfig, "unknown task '" + std::string(name) + "'");
}

LabelSchema LabelSchema::offensive_language() {
  return {Task::OffensiveLanguage, {"offensive", "not offensive"}};
}

LabelSchema LabelSchema::sentiment() {
  return {Task::Sentiment, {"positive", "neutral", "negative"}};
}

LabelSchema LabelSchema::custom(std::vector<Label> labels) {
  LabelSchema schema{Task::Custom, std::move(labels)};
  schema.validate();
  return schema;
}

LabelSchema LabelSchema::for_task(std::string_view task_name, std::vector<Label> labels) {
  switch (task_from_string(task_name)) {
    case Task::OffensiveLanguage: return offensive_language();
    case Task::Sentiment: return sentiment();
    case Task::Custom: return custom(std::move(labels));
  }
  throw Error(ErrorKind::InvalidConfig, "unreachable task");
}

bool LabelSchema::contains(std::string_view label) const noexcept {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

std::size_t LabelSchema::index_of(std::string_view label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) {
    throw Error(ErrorKind::UnknownLabel, "'" + std::string(label) + "' is not in the label schema");
  }
  return static_cast<std::size_t>(it - labels.begin());
}

void LabelSchema::validate() const {
  if (labels.size() < 2) throw Error(ErrorKind::InvalidConfig, "a label schema needs >= 2 labels");
  std::set<Label> seen(labels.begin(), labels.end());
  if (seen.size() != labels.size()) {
    throw Error(ErrorKind::InvalidConfig, "label schema contains duplicate labels");
  }
  if (std::any_of(labels.begin(), labels.end(), [](const Label& l) { return l.empty(); })) {
    throw Error(ErrorKind::InvalidConfig, "label schema contains an empty label");
  }
  if (task == Task::OffensiveLanguage && seen != std::set<Label>{"offensive", "not offensive"}) {
    throw Error(ErrorKind::InvalidConfig,
                "offensive-language schema must be exactly {offensive, not offensive}");
  }
  if (task == Task::Sentiment && seen != std::set<Label>{"positive", "neutral", "negative"}) {
    throw Error(ErrorKind::InvalidConfig,
                "sentiment schema must be exactly {positive, neutral, negative}");
  }
}

Label map_rating_to_label(int rating, const RatingThresholds& thresholds) {
  if (rating < 1 || rating > 5) {
    throw Error(ErrorKind::OutOfRange, "rating " + std::to_string(rating) + " is outside 1..5");
  }
  if (rating <= thresholds.negative_max) return "negative";
  if (rating <= thresholds.neutral_max) return "neutral";
  return "positive";
}

Corpus::Corpus(LabelSchema schema, std::vector<Instance> instances)
    : schema_(std::move(schema)), instances_(std::move(instances)) {
  schema_.validate();
  std::unordered_set<std::string> ids;
  std::set<DomainId> domains;
  for (const auto& inst : instances_) {
    if (inst.id.empty()) throw Error(ErrorKind::InvalidRecord, "instance with empty id");
    if (!ids.insert(inst.id).second) throw Error(ErrorKind::DuplicateId, inst.id);
    if (inst.text.empty()) throw Error(ErrorKind::InvalidRecord, "instance '" + inst.id + "' has empty text");
    if (!schema_.contains(inst.label)) {
      throw Error(ErrorKind::UnknownLabel, "'" + inst.label + "' on instance '" + inst.id + "'");
    }
    domains.insert(inst.domain);
  }
  domains_.assign(domains.begin(), domains.end());
}

bool Corpus::has_domain(std::string_view domain) const noexcept {
  return std::binary_search(domains_.begin(), domains_.end(), domain);
}

std::vector<Instance> Corpus::in_domain(std::string_view domain) const {
  std::vector<Instance> out;
  for (const auto& inst : instances_) {
    if (inst.domain == domain) out.push_back(inst);
  }
  return out;
}

std::map<DomainId, std::vector<Instance>> Corpus::partition_by_domain() const {
  std::map<DomainId, std::vector<Instance>> parts;
  for (const auto& inst : instances_) parts[inst.domain].push_back(inst);
  return parts;
}

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

std::string required_string(const json& record, const char* field,
                            const std::filesystem::path& path, std::size_t line) {
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) {
    throw Error(ErrorKind::MissingField, std::string("'") + field + "' at " + where(path, line));
  }
  if (!it->is_string()) {
    throw Error(ErrorKind::InvalidRecord,
                std::string("'") + field + "' must be a string at " + where(path, line));
  }
  return it->get<std::string>();
}

}  // namespace

Corpus load_dataset(const std::filesystem::path& path, const LabelSchema& schema,
                    const RatingThresholds& thresholds) {
  schema.validate();
  std::vector<Instance> instances;
  std::unordered_set<std::string> ids;
  for_each_jsonl(path, [&](std::size_t line, const json& record) {
    Instance inst;
    inst.id = required_string(record, "id", path, line);
    inst.text = required_string(record, "text", path, line);
    inst.domain = required_string(record, "domain", path, line);

    std::optional<Label> from_rating;
    if (auto it = record.find("rating"); it != record.end() && !it->is_null()) {
      if (schema.task != Task::Sentiment) {
        throw Error(ErrorKind::InvalidRecord,
                    "'rating' is only accepted under the sentiment schema at " + where(path, line));
      }
      if (!it->is_number_integer()) {
        throw Error(ErrorKind::InvalidRecord, "'rating' must be an integer at " + where(path, line));
      }
      from_rating = map_rating_to_label(it->get<int>(), thresholds);
    }
    if (auto it = record.find("label"); it != record.end() && !it->is_null()) {
      inst.label = required_string(record, "label", path, line);
      if (from_rating && *from_rating != inst.label) {
        throw Error(ErrorKind::InvalidRecord, "label '" + inst.label + "' disagrees with rating-derived '" +
                                                  *from_rating + "' at " + where(path, line));
      }
    } else if (from_rating) {
      inst.label = *from_rating;
    } else {
      throw Error(ErrorKind::MissingField, "'label' at " + where(path, line));
    }

    if (inst.id.empty()) throw Error(ErrorKind::InvalidRecord, "empty id at " + where(path, line));
    if (inst.text.empty()) throw Error(ErrorKind::InvalidRecord, "empty text at " + where(path, line));
    if (!schema.contains(inst.label)) {
      throw Error(ErrorKind::UnknownLabel, "'" + inst.label + "' at " + where(path, line));
    }
    if (!ids.insert(inst.id).second) {
      throw Error(ErrorKind::DuplicateId, inst.id + " at " + where(path, line));
    }
    instances.push_back(std::move(inst));
  });
  return Corpus(schema, std::move(instances));
}

void write_instances(const std::filesystem::path& path, std::span<const Instance> instances) {
  std::vector<json> records;
  records.reserve(instances.size());
  for (const auto& inst : instances) {
    records.push_back(json{{"id", inst.id}, {"text", inst.text}, {"label", inst.label}, {"domain", inst.domain}});
  }
  write_jsonl(path, records);
}

Corpus sample_balanced(const Corpus& corpus, std::size_t per_label, std::uint64_t seed) {
  if (per_label == 0) throw Error(ErrorKind::OutOfRange, "per_label must be >= 1");
  const auto& instances = corpus.instances();
  std::vector<bool> keep(instances.size(), false);
  Engine engine(seed);
  for (const auto& domain : corpus.domains()) {
    for (const auto& label : corpus.schema().labels) {
      std::vector<std::size_t> cell;
      for (std::size_t i = 0; i < instances.size(); ++i) {
        if (instances[i].domain == domain && instances[i].label == label) cell.push_back(i);
      }
      if (cell.size() < per_label) {
        throw Error(ErrorKind::InsufficientInstances,
                    "domain '" + domain + "', label '" + label + "': have " + std::to_string(cell.size()) +
                        ", need " + std::to_string(per_label));
      }
      for (auto pick : sample_without_replacement(cell.size(), per_label, engine)) keep[cell[pick]] = true;
    }
  }
  std::vector<Instance> selected;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (keep[i]) selected.push_back(instances[i]);
  }
  return Corpus(corpus.schema(), std::move(selected));
}

TrainTestSplit split_train_test(std::span<const Instance> instances, double test_fraction,
                                std::uint64_t seed) {
  const std::size_t n = instances.size();
  if (n < 2) throw Error(ErrorKind::TooFewInstances, "need >= 2 instances to split, have " + std::to_string(n));
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::OutOfRange, "test_fraction must lie in (0, 1)");
  }
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  Engine engine(seed);
  std::vector<bool> is_test(n, false);
  for (auto idx : sample_without_replacement(n, n_test, engine)) is_test[idx] = true;

  TrainTestSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    (is_test[i] ? split.test : split.train).push_back(instances[i]);
  }
  return split;
}

}  // namespace perfrank
