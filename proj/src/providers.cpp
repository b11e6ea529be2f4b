#include "perfrank/providers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "perfrank/error.hpp"

namespace perfrank {

namespace {

template <typename T>
const std::string& item_id(const T& item) {
  return item.instance_id;
}

// Enforces "every requested id exactly once across results and failures";
// ids the provider silently skipped become failures.
template <typename T>
void reconcile(BatchOutcome<T>& outcome, std::span<const Instance> instances) {
  std::unordered_set<std::string> requested;
  for (const auto& inst : instances) requested.insert(inst.id);
  std::unordered_set<std::string> seen;
  for (const auto& r : outcome.results) {
    if (!requested.contains(item_id(r))) {
      throw Error(ErrorKind::InvalidRecord, "provider returned unrequested id '" + item_id(r) + "'");
    }
    if (!seen.insert(item_id(r)).second) {
      throw Error(ErrorKind::DuplicateId, "provider returned '" + item_id(r) + "' twice");
    }
  }
  for (const auto& f : outcome.failed) {
    if (!requested.contains(f.id) || !seen.insert(f.id).second) {
      throw Error(ErrorKind::InvalidRecord, "inconsistent failure report for '" + f.id + "'");
    }
  }
  for (const auto& inst : instances) {
    if (!seen.contains(inst.id)) outcome.failed.push_back({inst.id, "not produced by provider"});
  }
  std::sort(outcome.results.begin(), outcome.results.end(),
            [](const T& a, const T& b) { return item_id(a) < item_id(b); });
  std::sort(outcome.failed.begin(), outcome.failed.end(),
            [](const FailedItem& a, const FailedItem& b) { return a.id < b.id; });
}

template <typename T>
std::vector<T> or_throw(BatchOutcome<T> outcome) {
  if (!outcome.failed.empty()) {
    std::vector<std::string> ids;
    for (const auto& f : outcome.failed) ids.push_back(f.id);
    throw PartialFailure(std::move(ids), outcome.failed.front().reason);
  }
  return std::move(outcome.results);
}

void check_unique_ids(std::span<const Instance> instances) {
  if (instances.empty()) throw Error(ErrorKind::TooFewInstances, "empty batch");
  std::unordered_set<std::string> ids;
  for (const auto& inst : instances) {
    if (!ids.insert(inst.id).second) throw Error(ErrorKind::DuplicateId, inst.id);
  }
}

std::size_t argmax(const std::vector<double>& values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace

BatchOutcome<Prediction> collect_predictions(Predictor& predictor, std::span<const Instance> instances) {
  check_unique_ids(instances);
  auto outcome = predictor.run(instances);
  reconcile(outcome, instances);
  return outcome;
}

std::vector<Prediction> predict_batch(Predictor& predictor, std::span<const Instance> instances) {
  return or_throw(collect_predictions(predictor, instances));
}

BatchOutcome<ErrorJudgment> collect_judgments(ErrorJudge& judge, std::span<const Instance> instances,
                                              std::span<const Prediction> predictions) {
  check_unique_ids(instances);
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.instance_id, &p);
  std::vector<Prediction> aligned;
  aligned.reserve(instances.size());
  for (const auto& inst : instances) {
    auto it = by_id.find(inst.id);
    if (it == by_id.end()) throw Error(ErrorKind::MissingPrediction, inst.id);
    aligned.push_back(*it->second);
  }
  auto outcome = judge.run(instances, aligned);
  reconcile(outcome, instances);
  return outcome;
}

std::vector<ErrorJudgment> judge_batch(ErrorJudge& judge, std::span<const Instance> instances,
                                       std::span<const Prediction> predictions) {
  return or_throw(collect_judgments(judge, instances, predictions));
}

// ---- linear ---------------------------------------------------------------

TextClassifier train_text_classifier(std::span<const Instance> instances, const LabelSchema& schema,
                                     const FeatureConfig& features, const TrainConfig& train_config) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(instances.size());
  for (const auto& inst : instances) docs.push_back(tokenize(inst.text, features));
  auto vocab = build_vocabulary(docs, features);
  std::vector<SparseVector> X;
  std::vector<std::size_t> y;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    X.push_back(vectorize(docs[i], vocab));
    y.push_back(schema.index_of(instances[i].label));
  }
  auto model = train(X, y, schema.labels, vocab.size(), train_config, vocab.fingerprint());
  return TextClassifier{std::move(vocab), std::move(model)};
}

TextClassifier train_error_model(std::span<const Instance> instances, std::span<const Prediction> predictions,
                                 const FeatureConfig& features, const TrainConfig& train_config,
                                 bool append_confidence) {
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.instance_id, &p);
  std::vector<std::vector<std::string>> docs;
  std::vector<const Prediction*> preds;
  for (const auto& inst : instances) {
    auto it = by_id.find(inst.id);
    if (it == by_id.end()) throw Error(ErrorKind::MissingPrediction, inst.id);
    if (append_confidence && !it->second->confidence) throw Error(ErrorKind::MissingConfidence, inst.id);
    docs.push_back(tokenize(inst.text, features));
    preds.push_back(it->second);
  }
  auto vocab = build_vocabulary(docs, features);
  const auto schema = error_label_schema();
  std::vector<SparseVector> X;
  std::vector<std::size_t> y;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto x = vectorize(docs[i], vocab);
    if (append_confidence && *preds[i]->confidence != 0.0) {
      x.entries.emplace_back(static_cast<std::uint32_t>(vocab.size()), *preds[i]->confidence);
    }
    X.push_back(std::move(x));
    const bool wrong = preds[i]->predicted != instances[i].label;
    y.push_back(schema.index_of(wrong ? kErrorLabel : kCorrectLabel));
  }
  const std::size_t n_features = vocab.size() + (append_confidence ? 1 : 0);
  auto model = train(X, y, schema.labels, n_features, train_config, vocab.fingerprint());
  return TextClassifier{std::move(vocab), std::move(model)};
}

LinearPredictor::LinearPredictor(TextClassifier classifier, std::string id)
    : classifier_(std::move(classifier)), id_(std::move(id)) {
  classifier_.check_binding();
}

BatchOutcome<Prediction> LinearPredictor::run(std::span<const Instance> instances) {
  BatchOutcome<Prediction> out;
  const auto& classes = classifier_.model.classes();
  for (const auto& inst : instances) {
    const auto probs = predict_proba(classifier_.model, featurize(inst.text, classifier_.vocab));
    const auto best = argmax(probs);
    Prediction p;
    p.instance_id = inst.id;
    p.predictor_id = id_;
    p.predicted = classes[best];
    p.confidence = probs[best];
    std::map<Label, double> dist;
    for (std::size_t c = 0; c < classes.size(); ++c) dist.emplace(classes[c], probs[c]);
    p.distribution = std::move(dist);
    out.results.push_back(std::move(p));
  }
  return out;
}

LinearJudge::LinearJudge(TextClassifier classifier, std::string id)
    : classifier_(std::move(classifier)), id_(std::move(id)) {
  classifier_.check_binding();
  const auto& classes = classifier_.model.classes();
  auto it = std::find(classes.begin(), classes.end(), kErrorLabel);
  if (it == classes.end()) throw Error(ErrorKind::InvalidConfig, "error model has no 'error' class");
  error_class_ = static_cast<std::size_t>(it - classes.begin());
  uses_confidence_ = classifier_.model.n_features() == classifier_.vocab.size() + 1;
}

BatchOutcome<ErrorJudgment> LinearJudge::run(std::span<const Instance> instances,
                                             std::span<const Prediction> predictions) {
  BatchOutcome<ErrorJudgment> out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto x = featurize(instances[i].text, classifier_.vocab);
    if (uses_confidence_) {
      if (!predictions[i].confidence) {
        out.failed.push_back({instances[i].id, "MissingConfidence"});
        continue;
      }
      if (*predictions[i].confidence != 0.0) {
        x.entries.emplace_back(static_cast<std::uint32_t>(classifier_.vocab.size()), *predictions[i].confidence);
      }
    }
    const auto probs = predict_proba(classifier_.model, x);
    out.results.push_back({instances[i].id, id_, probs[error_class_]});
  }
  return out;
}

// ---- files ------------------------------------------------------------------

FilePredictor::FilePredictor(std::vector<Prediction> predictions, std::string id) : id_(std::move(id)) {
  for (auto& p : predictions) {
    auto key = p.instance_id;
    if (!by_id_.emplace(std::move(key), std::move(p)).second) throw Error(ErrorKind::DuplicateId, key);
  }
}

FilePredictor FilePredictor::from_file(const std::filesystem::path& path, const LabelSchema& schema) {
  auto preds = read_predictions(path, schema);
  std::string id = preds.empty() ? std::string("file") : preds.front().predictor_id;
  return FilePredictor(std::move(preds), std::move(id));
}

BatchOutcome<Prediction> FilePredictor::run(std::span<const Instance> instances) {
  BatchOutcome<Prediction> out;
  for (const auto& inst : instances) {
    auto it = by_id_.find(inst.id);
    if (it == by_id_.end()) {
      out.failed.push_back({inst.id, "no prediction in file"});
    } else {
      out.results.push_back(it->second);
    }
  }
  return out;
}

FileJudge::FileJudge(std::vector<ErrorJudgment> judgments, std::string id) : id_(std::move(id)) {
  for (auto& j : judgments) {
    auto key = j.instance_id;
    if (!by_id_.emplace(std::move(key), std::move(j)).second) throw Error(ErrorKind::DuplicateId, key);
  }
}

FileJudge FileJudge::from_file(const std::filesystem::path& path) {
  auto judgments = read_judgments(path);
  std::string id = judgments.empty() ? std::string("file") : judgments.front().judge_id;
  return FileJudge(std::move(judgments), std::move(id));
}

BatchOutcome<ErrorJudgment> FileJudge::run(std::span<const Instance> instances, std::span<const Prediction>) {
  BatchOutcome<ErrorJudgment> out;
  for (const auto& inst : instances) {
    auto it = by_id_.find(inst.id);
    if (it == by_id_.end()) {
      out.failed.push_back({inst.id, "no judgment in file"});
    } else {
      out.results.push_back(it->second);
    }
  }
  return out;
}

BatchOutcome<ErrorJudgment> OracleJudge::run(std::span<const Instance> instances,
                                             std::span<const Prediction> predictions) {
  BatchOutcome<ErrorJudgment> out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out.results.push_back({instances[i].id, id_, predictions[i].predicted != instances[i].label ? 1.0 : 0.0});
  }
  return out;
}

// ---- chat -------------------------------------------------------------------

namespace {

std::string alnum_lower(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c >= 0x80) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

void check_reachable(const std::vector<ChatResult>& results) {
  if (!results.empty() && std::all_of(results.begin(), results.end(), [](const ChatResult& r) { return r.unreachable; })) {
    throw Error(ErrorKind::ProviderUnavailable, "endpoint unreachable for every request: " + results.front().error);
  }
}

}  // namespace

std::optional<double> label_confidence(const ChatReply& reply, std::string_view label) {
  const std::string target = alnum_lower(label);
  bool skipped_prefix = false;
  for (const auto& tok : reply.logprobs) {
    const std::string norm = alnum_lower(tok.token);
    if (norm.empty()) continue;
    if (!skipped_prefix && norm == "label" && !target.starts_with("label")) {
      skipped_prefix = true;
      continue;
    }
    if (target.starts_with(norm)) return std::exp(tok.logprob);
    return std::nullopt;
  }
  return std::nullopt;
}

ChatPredictor::ChatPredictor(std::shared_ptr<ChatClient> client, LabelSchema schema,
                             std::vector<BaseExemplar> exemplars, std::string id)
    : client_(std::move(client)),
      schema_(std::move(schema)),
      template_(base_prompt_template(schema_)),
      exemplars_(std::move(exemplars)),
      id_(std::move(id)) {
  for (const auto& ex : exemplars_) {
    if (!schema_.contains(ex.label)) throw Error(ErrorKind::UnknownLabel, "exemplar label '" + ex.label + "'");
  }
}

BatchOutcome<Prediction> ChatPredictor::run(std::span<const Instance> instances) {
  std::vector<std::vector<ChatMessage>> conversations;
  conversations.reserve(instances.size());
  for (const auto& inst : instances) conversations.push_back(render_base_prompt(template_, exemplars_, inst.text));
  const auto results = client_->complete_all(conversations);
  check_reachable(results);

  BatchOutcome<Prediction> out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (!results[i].reply) {
      out.failed.push_back({instances[i].id, results[i].error});
      continue;
    }
    try {
      Prediction p;
      p.instance_id = instances[i].id;
      p.predictor_id = id_;
      p.predicted = parse_llm_label(results[i].reply->content, schema_.labels);
      p.confidence = label_confidence(*results[i].reply, p.predicted);
      if (!p.confidence) {
        p.confidence = 1.0;
        degraded_ = true;
      }
      out.results.push_back(std::move(p));
    } catch (const Error& e) {
      out.failed.push_back({instances[i].id, e.what()});
    }
  }
  return out;
}

ChatJudge::ChatJudge(std::shared_ptr<ChatClient> client, std::vector<ErrorExemplar> exemplars, std::string id)
    : client_(std::move(client)), template_(error_prompt_template()), exemplars_(std::move(exemplars)), id_(std::move(id)) {}

BatchOutcome<ErrorJudgment> ChatJudge::run(std::span<const Instance> instances,
                                           std::span<const Prediction> predictions) {
  std::vector<std::vector<ChatMessage>> conversations;
  conversations.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    conversations.push_back(render_error_prompt(template_, exemplars_, instances[i].text, predictions[i].predicted));
  }
  const auto results = client_->complete_all(conversations);
  check_reachable(results);

  const std::vector<Label> labels{std::string(kCorrectLabel), std::string(kErrorLabel)};
  BatchOutcome<ErrorJudgment> out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (!results[i].reply) {
      out.failed.push_back({instances[i].id, results[i].error});
      continue;
    }
    try {
      const auto verdict = parse_llm_label(results[i].reply->content, labels);
      out.results.push_back({instances[i].id, id_, verdict == kErrorLabel ? 1.0 : 0.0});
    } catch (const Error& e) {
      out.failed.push_back({instances[i].id, e.what()});
    }
  }
  return out;
}

}  // namespace perfrank
