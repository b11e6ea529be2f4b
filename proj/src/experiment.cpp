#include "perfrank/experiment.hpp"

#include <algorithm>
#include <set>

#include "perfrank/error.hpp"
#include "perfrank/estimator.hpp"
#include "perfrank/providers.hpp"
#include "perfrank/util.hpp"

namespace perfrank {

namespace {

const json& object_or_empty(const json& doc, const char* key) {
  static const json empty = json::object();
  auto it = doc.find(key);
  if (it == doc.end()) return empty;
  if (!it->is_object()) throw Error(ErrorKind::InvalidConfig, std::string("'") + key + "' must be an object");
  return *it;
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorKind::InvalidConfig, "unknown key '" + key + "' in " + where);
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base_dir / path).lexically_normal();
}

FeatureConfig parse_features(const json& j, FeatureConfig cfg) {
  check_keys(j, {"ngram_order", "remove_stopwords", "weighting", "min_doc_freq", "lowercase"}, "features");
  cfg.ngram_order = j.value("ngram_order", cfg.ngram_order);
  cfg.remove_stopwords = j.value("remove_stopwords", cfg.remove_stopwords);
  if (j.contains("weighting")) cfg.weighting = weighting_from_string(j["weighting"].get<std::string>());
  cfg.min_doc_freq = j.value("min_doc_freq", cfg.min_doc_freq);
  cfg.lowercase = j.value("lowercase", cfg.lowercase);
  return cfg;
}

TrainConfig parse_train(const json& j, std::uint64_t seed) {
  check_keys(j, {"learning_rate", "epochs", "l2", "batch_size", "seed", "tolerance"}, "train");
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.l2 = j.value("l2", cfg.l2);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.tolerance = j.value("tolerance", cfg.tolerance);
  return cfg;
}

ProviderSpec parse_provider(const json& j, const std::string& role, FeatureConfig default_features, std::uint64_t seed,
                            const std::filesystem::path& base_dir) {
  if (!j.contains("kind")) throw Error(ErrorKind::InvalidConfig, role + " provider needs a 'kind'");
  ProviderSpec spec;
  spec.kind = j["kind"].get<std::string>();
  const std::string where = role + " provider";
  if (spec.kind == "linear") {
    check_keys(j, {"kind", "features", "train", "append_confidence"}, where);
    spec.features = parse_features(object_or_empty(j, "features"), default_features);
    spec.train = parse_train(object_or_empty(j, "train"), seed);
    spec.append_confidence = j.value("append_confidence", false);
  } else if (spec.kind == "file") {
    check_keys(j, {"kind", "path"}, where);
    spec.file = resolve(base_dir, j.at("path").get<std::string>());
  } else if (spec.kind == "oracle") {
    check_keys(j, {"kind"}, where);
  } else if (spec.kind == "chat") {
    check_keys(j, {"kind", "endpoint", "model", "api_key_env", "max_in_flight", "temperature", "logprobs", "timeout_ms",
                   "retry", "transcripts", "exemplars_per_label"},
               where);
    auto& c = spec.chat;
    c.endpoint = j.value("endpoint", std::string());
    c.model = j.value("model", std::string());
    c.api_key_env = j.value("api_key_env", std::string());
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.temperature = j.value("temperature", c.temperature);
    c.request_logprobs = j.value("logprobs", c.request_logprobs);
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<long long>(c.timeout.count())));
    const auto& retry = object_or_empty(j, "retry");
    check_keys(retry, {"max_attempts", "backoff_ms"}, where + " retry");
    c.retry.max_attempts = retry.value("max_attempts", c.retry.max_attempts);
    c.retry.backoff = std::chrono::milliseconds(retry.value("backoff_ms", static_cast<long long>(c.retry.backoff.count())));
    spec.transcripts = resolve(base_dir, j.value("transcripts", std::string()));
    spec.exemplars_per_label = j.value("exemplars_per_label", spec.exemplars_per_label);
  } else {
    throw Error(ErrorKind::InvalidConfig, "unknown " + role + " provider kind '" + spec.kind + "'");
  }
  return spec;
}

SweepConfig parse_sweep(const json& j, std::uint64_t seed) {
  check_keys(j, {"modes", "margin_steps", "seeds", "n_domains", "n_per_domain", "domain_order", "task", "labels",
                 "judge", "judge_accuracy", "judge_seed", "threads"},
             "sweep");
  SweepConfig s;
  s.judge_seed = seed;
  if (j.contains("modes")) {
    s.modes.clear();
    for (const auto& m : j["modes"]) s.modes.push_back(injection_mode_from_string(m.get<std::string>()));
  }
  auto& p = s.plan;
  p.margin_steps = j.value("margin_steps", std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14});
  if (j.contains("seeds")) {
    p.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  } else {
    for (std::uint64_t i = 0; i < 20; ++i) p.seeds.push_back(i);
  }
  p.n_domains = j.value("n_domains", p.n_domains);
  p.n_per_domain = j.value("n_per_domain", p.n_per_domain);
  p.domain_order = j.value("domain_order", std::vector<std::string>{});
  if (j.contains("task")) {
    p.schema = LabelSchema::for_task(j["task"].get<std::string>(), j.value("labels", std::vector<std::string>{}));
  }
  p.threads = j.value("threads", p.threads);
  s.judge = j.value("judge", s.judge);
  s.judge_accuracy = j.value("judge_accuracy", s.judge_accuracy);
  s.judge_seed = j.value("judge_seed", s.judge_seed);
  return s;
}

// Exemplar files let a chat stage be replayed with the exact prompts it used.
void write_base_exemplars(const std::filesystem::path& path, const std::vector<BaseExemplar>& exemplars) {
  std::vector<json> lines;
  for (const auto& e : exemplars) lines.push_back(json{{"text", e.text}, {"label", e.label}});
  write_jsonl(path, lines);
}

std::vector<BaseExemplar> read_base_exemplars(const std::filesystem::path& path) {
  std::vector<BaseExemplar> out;
  for_each_jsonl(path, [&](std::size_t, const json& r) {
    out.push_back({r.at("text").get<std::string>(), r.at("label").get<std::string>()});
  });
  return out;
}

void write_error_exemplars(const std::filesystem::path& path, const std::vector<ErrorExemplar>& exemplars) {
  std::vector<json> lines;
  for (const auto& e : exemplars) {
    lines.push_back(json{{"text", e.text}, {"predicted", e.predicted}, {"error_label", e.error_label}});
  }
  write_jsonl(path, lines);
}

template <typename T>
std::vector<T> filter_domain(const std::vector<T>& items, const std::set<std::string>& ids) {
  std::vector<T> out;
  for (const auto& item : items) {
    if (ids.contains(item.instance_id)) out.push_back(item);
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw Error(ErrorKind::InvalidConfig, "config must be a JSON object");
  try {
    check_keys(doc, {"dataset", "training_domain", "test_fraction", "seed", "out", "base", "error", "estimators",
                     "threshold", "semantic_drift", "sweep"},
               "config");
    ExperimentConfig cfg;
    cfg.config_sha256 = sha256_hex(dump_json(doc));
    cfg.seed = doc.value("seed", cfg.seed);

    const auto& ds = object_or_empty(doc, "dataset");
    check_keys(ds, {"path", "task", "labels", "rating_thresholds", "per_label"}, "dataset");
    cfg.dataset = resolve(base_dir, ds.value("path", std::string()));
    cfg.schema = LabelSchema::for_task(ds.value("task", std::string("offensive-language")),
                                       ds.value("labels", std::vector<std::string>{}));
    const auto& rt = object_or_empty(ds, "rating_thresholds");
    check_keys(rt, {"negative_max", "neutral_max"}, "rating_thresholds");
    cfg.rating_thresholds.negative_max = rt.value("negative_max", cfg.rating_thresholds.negative_max);
    cfg.rating_thresholds.neutral_max = rt.value("neutral_max", cfg.rating_thresholds.neutral_max);
    cfg.per_label = ds.value("per_label", cfg.per_label);

    cfg.training_domain = doc.value("training_domain", std::string());
    cfg.test_fraction = doc.value("test_fraction", cfg.test_fraction);
    cfg.out = resolve(base_dir, doc.value("out", std::string("out")));
    cfg.estimators = doc.value("estimators", cfg.estimators);
    cfg.threshold = doc.value("threshold", cfg.threshold);

    cfg.base = parse_provider(object_or_empty(doc, "base"), "base", base_feature_config(), cfg.seed, base_dir);
    if (doc.contains("error")) {
      cfg.error = parse_provider(doc["error"], "error", error_feature_config(), cfg.seed, base_dir);
    }

    const auto& sd = object_or_empty(doc, "semantic_drift");
    check_keys(sd, {"query", "embeddings"}, "semantic_drift");
    cfg.semantic_drift.query = sd.value("query", cfg.semantic_drift.query);
    const auto& emb = object_or_empty(sd, "embeddings");
    check_keys(emb, {"cache", "endpoint", "model", "api_key_env", "timeout_ms"}, "embeddings");
    cfg.semantic_drift.embeddings.cache_path = resolve(base_dir, emb.value("cache", std::string()));
    cfg.semantic_drift.embeddings.endpoint = emb.value("endpoint", std::string());
    cfg.semantic_drift.embeddings.model = emb.value("model", std::string());
    cfg.semantic_drift.embeddings.api_key_env = emb.value("api_key_env", std::string());
    cfg.semantic_drift.embeddings.timeout = std::chrono::milliseconds(emb.value("timeout_ms", 60000LL));

    if (doc.contains("sweep")) cfg.sweep = parse_sweep(object_or_empty(doc, "sweep"), cfg.seed);
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("malformed config: ") + e.what());
  }
}

void ExperimentConfig::validate() const {
  if (dataset.empty()) throw Error(ErrorKind::InvalidConfig, "dataset.path is required");
  if (training_domain.empty()) throw Error(ErrorKind::InvalidConfig, "training_domain is required");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "test_fraction must lie strictly between 0 and 1");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorKind::InvalidConfig, "threshold must lie in [0, 1]");
  if (estimators.empty()) throw Error(ErrorKind::InvalidConfig, "estimators list is empty");
  std::set<std::string> seen;
  for (const auto& e : estimators) {
    if (!is_known_method(e)) throw Error(ErrorKind::InvalidConfig, "unknown estimator '" + e + "'");
    if (!seen.insert(e).second) throw Error(ErrorKind::InvalidConfig, "estimator '" + e + "' listed twice");
  }
  schema.validate();

  auto check_provider = [](const ProviderSpec& spec, const std::string& role) {
    if (spec.kind == "linear") {
      spec.features.validate();
      spec.train.validate();
    } else if (spec.kind == "file") {
      if (spec.file.empty()) throw Error(ErrorKind::InvalidConfig, role + " file provider needs a path");
    } else if (spec.kind == "chat") {
      spec.chat.validate();
      if (spec.exemplars_per_label < 1) throw Error(ErrorKind::InvalidConfig, role + " exemplars_per_label must be >= 1");
    }
  };
  if (base.kind == "oracle") throw Error(ErrorKind::InvalidConfig, "the oracle provider is only valid as an error model");
  check_provider(base, "base");
  if (uses(method::kErrorModel)) {
    if (error.kind.empty()) throw Error(ErrorKind::InvalidConfig, "estimator error_model needs an 'error' provider");
    check_provider(error, "error");
    if (error.kind == "linear" && error.append_confidence && base.kind == "chat" && !base.chat.request_logprobs) {
      throw Error(ErrorKind::InvalidConfig, "append_confidence needs base confidences; enable logprobs");
    }
  }
  if (uses(method::kSemanticDrift)) {
    if (semantic_drift.query != "predicted_label" && semantic_drift.query != "input_text") {
      throw Error(ErrorKind::InvalidConfig, "semantic_drift.query must be predicted_label or input_text");
    }
    if (semantic_drift.embeddings.cache_path.empty() && semantic_drift.embeddings.endpoint.empty()) {
      throw Error(ErrorKind::InvalidConfig, "semantic_drift needs an embeddings cache or endpoint");
    }
  }
  if (sweep) {
    sweep->plan.validate();
    if (sweep->modes.empty()) throw Error(ErrorKind::InvalidConfig, "sweep.modes is empty");
    if (sweep->judge != "noisy" && sweep->judge != "oracle") {
      throw Error(ErrorKind::InvalidConfig, "sweep.judge must be noisy or oracle");
    }
  }
}

void ExperimentConfig::override_seed(std::uint64_t new_seed) {
  seed = new_seed;
  base.train.seed = new_seed;
  error.train.seed = new_seed;
}

bool ExperimentConfig::uses(std::string_view estimator) const {
  return std::find(estimators.begin(), estimators.end(), estimator) != estimators.end();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  auto base_dir = std::filesystem::absolute(path).parent_path();
  return ExperimentConfig::from_json(doc, base_dir);
}

std::string_view to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::Ingest: return "ingest";
    case Stage::TrainBase: return "train-base";
    case Stage::Predict: return "predict";
    case Stage::Judge: return "judge";
    case Stage::Estimate: return "estimate";
    case Stage::Evaluate: return "evaluate";
    case Stage::Report: return "report";
    case Stage::Sweep: return "sweep";
  }
  return "unknown";
}

Stage stage_from_string(std::string_view name) {
  for (auto s : {Stage::Ingest, Stage::TrainBase, Stage::Predict, Stage::Judge, Stage::Estimate, Stage::Evaluate,
                 Stage::Report, Stage::Sweep}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown stage '" + std::string(name) + "'");
}

const std::vector<Stage>& pipeline_stages() {
  static const std::vector<Stage> stages{Stage::Ingest,   Stage::TrainBase, Stage::Predict, Stage::Judge,
                                         Stage::Estimate, Stage::Evaluate,  Stage::Report};
  return stages;
}

std::vector<Instance> read_instances(const std::filesystem::path& path, const LabelSchema& schema) {
  return load_dataset(path, schema).instances();
}

Experiment::Experiment(ExperimentConfig config, bool online) : config_(std::move(config)), online_(online) {
  config_.validate();
  const auto manifest = path("manifest.json");
  if (std::filesystem::exists(manifest)) {
    try {
      const auto doc = json::parse(read_text_file(manifest));
      if (doc.value("config_sha256", std::string()) == config_.config_sha256) {
        completed_ = doc.value("completed", std::vector<std::string>{});
      }
    } catch (const json::exception&) {
      // an unreadable manifest is rebuilt from scratch
    }
  }
}

Corpus Experiment::load_corpus() const { return load_dataset(path("corpus.jsonl"), config_.schema); }

std::vector<Instance> Experiment::read_split(std::string_view name) const {
  return read_instances(path(name), config_.schema);
}

std::shared_ptr<ChatClient> Experiment::chat_client(const ProviderSpec& spec) const {
  std::shared_ptr<TranscriptCache> cache;
  if (!spec.transcripts.empty()) cache = std::make_shared<TranscriptCache>(spec.transcripts);
  return std::make_shared<ChatClient>(spec.chat, std::move(cache), online_);
}

void Experiment::ingest() {
  auto corpus = load_dataset(config_.dataset, config_.schema, config_.rating_thresholds);
  if (!corpus.has_domain(config_.training_domain)) {
    std::string known;
    for (const auto& d : corpus.domains()) known += (known.empty() ? "" : ", ") + d;
    throw Error(ErrorKind::InvalidConfig,
                "training_domain '" + config_.training_domain + "' is not in the dataset (domains: " + known + ")");
  }
  if (config_.per_label > 0) corpus = sample_balanced(corpus, config_.per_label, config_.seed);
  if (corpus.domains().size() < 2) throw Error(ErrorKind::InvalidConfig, "dataset needs at least one held-out domain");

  std::vector<Instance> heldout;
  for (const auto& inst : corpus.instances()) {
    if (inst.domain != config_.training_domain) heldout.push_back(inst);
  }
  const auto split = split_train_test(corpus.in_domain(config_.training_domain), config_.test_fraction, config_.seed);
  write_instances(path("corpus.jsonl"), corpus.instances());
  write_instances(path("split/train.jsonl"), split.train);
  write_instances(path("split/test.jsonl"), split.test);
  write_instances(path("heldout.jsonl"), heldout);
}

void Experiment::train_base() {
  const auto& spec = config_.base;
  const auto dir = path("base");
  std::filesystem::remove_all(dir);
  if (spec.kind == "linear") {
    const auto train = read_split("split/train.jsonl");
    train_text_classifier(train, config_.schema, spec.features, spec.train).save(dir);
  } else if (spec.kind == "chat") {
    const auto train = read_split("split/train.jsonl");
    write_base_exemplars(dir / "exemplars.jsonl",
                         select_base_exemplars(train, config_.schema, spec.exemplars_per_label, config_.seed));
  } else {
    std::filesystem::create_directories(dir);
  }
}

void Experiment::predict() {
  const auto& spec = config_.base;
  std::unique_ptr<Predictor> predictor;
  if (spec.kind == "linear") {
    predictor = std::make_unique<LinearPredictor>(TextClassifier::load(path("base")));
  } else if (spec.kind == "file") {
    predictor = std::make_unique<FilePredictor>(FilePredictor::from_file(spec.file, config_.schema));
  } else {
    predictor = std::make_unique<ChatPredictor>(chat_client(spec), config_.schema,
                                                read_base_exemplars(path("base/exemplars.jsonl")), spec.chat.model);
  }
  const auto test = read_split("split/test.jsonl");
  const auto heldout = read_split("heldout.jsonl");
  auto on_test = collect_predictions(*predictor, test);
  auto on_heldout = collect_predictions(*predictor, heldout);
  std::vector<FailedItem> failed = on_test.failed;
  failed.insert(failed.end(), on_heldout.failed.begin(), on_heldout.failed.end());
  if (!failed.empty()) fail_partial(Stage::Predict, failed);
  if (predictor->confidence_degraded()) {
    warnings_.push_back("base provider returned no logprobs; confidences are placeholders");
  }
  for (const auto& p : on_test.results) validate_prediction(p, config_.schema);
  for (const auto& p : on_heldout.results) validate_prediction(p, config_.schema);
  write_predictions(path("predictions/train_test.jsonl"), on_test.results);
  write_predictions(path("predictions/heldout.jsonl"), on_heldout.results);
}

void Experiment::judge() {
  if (!config_.uses(method::kErrorModel)) return;
  const auto& spec = config_.error;
  const auto dir = path("error");
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto test = read_split("split/test.jsonl");
  const auto test_preds = read_predictions(path("predictions/train_test.jsonl"), config_.schema);

  std::unique_ptr<ErrorJudge> judge;
  if (spec.kind == "linear") {
    auto model = train_error_model(test, test_preds, spec.features, spec.train, spec.append_confidence);
    model.save(dir);
    judge = std::make_unique<LinearJudge>(std::move(model));
  } else if (spec.kind == "oracle") {
    judge = std::make_unique<OracleJudge>();
  } else if (spec.kind == "file") {
    judge = std::make_unique<FileJudge>(FileJudge::from_file(spec.file));
  } else {
    auto exemplars = select_error_exemplars(test, test_preds, spec.exemplars_per_label, config_.seed);
    write_error_exemplars(dir / "exemplars.jsonl", exemplars);
    judge = std::make_unique<ChatJudge>(chat_client(spec), std::move(exemplars), spec.chat.model);
  }
  const auto heldout = read_split("heldout.jsonl");
  const auto preds = read_predictions(path("predictions/heldout.jsonl"), config_.schema);
  auto outcome = collect_judgments(*judge, heldout, preds);
  if (!outcome.failed.empty()) fail_partial(Stage::Judge, outcome.failed);
  for (const auto& j : outcome.results) validate_judgment(j);
  write_judgments(path("judgments/heldout.jsonl"), outcome.results);
}

void Experiment::estimate() {
  const auto heldout = read_split("heldout.jsonl");
  const auto preds = read_predictions(path("predictions/heldout.jsonl"), config_.schema);
  std::vector<ErrorJudgment> judgments;
  if (config_.uses(method::kErrorModel)) judgments = read_judgments(path("judgments/heldout.jsonl"));

  std::map<DomainId, std::vector<Instance>> by_domain;
  for (const auto& inst : heldout) by_domain[inst.domain].push_back(inst);

  std::optional<TokenDistribution> train_dist;
  FeatureConfig drift_features;
  drift_features.remove_stopwords = true;
  if (config_.uses(method::kCovariateDrift)) {
    train_dist = token_distribution(read_split("split/train.jsonl"), drift_features);
  }
  std::unique_ptr<EmbeddingProvider> embeddings;
  std::map<Label, std::vector<double>> label_vectors;
  if (config_.uses(method::kSemanticDrift)) {
    embeddings = std::make_unique<EmbeddingProvider>(config_.semantic_drift.embeddings, online_);
    for (const auto& label : config_.schema.labels) label_vectors[label] = embeddings->embed("label:" + label, label);
  }

  std::vector<DomainEstimate> out;
  for (const auto& [domain, insts] : by_domain) {
    std::set<std::string> ids;
    for (const auto& inst : insts) ids.insert(inst.id);
    const auto domain_preds = filter_domain(preds, ids);
    const double truth = true_accuracy(insts, domain_preds);
    for (const auto& name : config_.estimators) {
      DomainEstimate e;
      if (name == method::kErrorModel) {
        e = estimate_from_errors(domain, filter_domain(judgments, ids), config_.threshold);
        if (e.n != insts.size()) throw Error(ErrorKind::MissingPrediction, "judgments missing in domain '" + domain + "'");
      } else if (name == method::kZeroShot) {
        e = zero_shot_estimate(domain, domain_preds);
      } else if (name == method::kCovariateDrift) {
        e = covariate_drift_estimate(domain, *train_dist, token_distribution(insts, drift_features), insts.size());
      } else {
        std::map<std::string, std::vector<double>> queries;
        std::map<std::string, const Instance*> inst_by_id;
        for (const auto& inst : insts) inst_by_id[inst.id] = &inst;
        for (const auto& p : domain_preds) {
          if (config_.semantic_drift.query == "input_text") {
            queries[p.instance_id] = embeddings->embed("text:" + p.instance_id, inst_by_id.at(p.instance_id)->text);
          } else {
            queries[p.instance_id] = embeddings->embed("predicted:" + p.predicted, p.predicted);
          }
        }
        e = semantic_drift_estimate(domain, domain_preds, queries, label_vectors);
      }
      e.true_accuracy = truth;
      out.push_back(std::move(e));
    }
  }
  write_estimates(path("estimates.jsonl"), out);
}

void Experiment::evaluate() {
  const auto estimates = read_estimates(path("estimates.jsonl"));
  std::vector<RankingReport> reports;
  for (const auto& name : config_.estimators) {
    std::vector<DomainEstimate> subset;
    for (const auto& e : estimates) {
      if (e.method == name) subset.push_back(e);
    }
    reports.push_back(build_ranking_report(config_.training_domain, name, std::move(subset)));
  }
  write_reports_json(path("reports/report.json"), reports);
  write_reports_csv(path("reports/report.csv"), reports);
}

void Experiment::report() {
  write_text_file(path("reports/table.csv"), merge_reports_table(read_reports_json(path("reports/report.json"))));
}

void Experiment::sweep() {
  if (!config_.sweep) throw Error(ErrorKind::InvalidConfig, "config has no 'sweep' section");
  const auto& s = *config_.sweep;
  std::unique_ptr<ErrorJudge> judge;
  if (s.judge == "oracle") {
    judge = std::make_unique<OracleJudge>();
  } else {
    judge = std::make_unique<NoisyJudge>(s.judge_accuracy, s.judge_seed);
  }
  std::vector<SweepCurve> curves;
  for (auto mode : s.modes) {
    auto plan = s.plan;
    plan.mode = mode;
    curves.push_back(run_sweep(plan, *judge));
  }
  write_sweep_csv(path("sweep/sweep.csv"), curves);
  write_sweep_plot_json(path("sweep/plot.json"), curves);
}

void Experiment::write_manifest(const std::string& status, std::optional<Stage> failed, const std::string& error) {
  json inputs = json::object();
  auto add_input = [&](const std::string& name, const std::filesystem::path& p) {
    if (!p.empty() && std::filesystem::is_regular_file(p)) inputs[name] = sha256_file(p);
  };
  add_input("dataset", config_.dataset);
  if (config_.base.kind == "file") add_input("base_predictions", config_.base.file);
  if (config_.base.kind == "chat") add_input("base_transcripts", config_.base.transcripts);
  if (config_.error.kind == "file") add_input("error_judgments", config_.error.file);
  if (config_.error.kind == "chat") add_input("error_transcripts", config_.error.transcripts);
  if (config_.uses(method::kSemanticDrift)) add_input("embeddings", config_.semantic_drift.embeddings.cache_path);

  json outputs = json::object();
  if (std::filesystem::exists(config_.out)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(config_.out)) {
      if (!entry.is_regular_file()) continue;
      const auto rel = std::filesystem::relative(entry.path(), config_.out);
      if (rel == "manifest.json") continue;
      files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    for (const auto& rel : files) outputs[rel.generic_string()] = sha256_file(config_.out / rel);
  }

  json doc{{"config_sha256", config_.config_sha256},
           {"training_domain", config_.training_domain},
           {"seed", config_.seed},
           {"status", status},
           {"completed", completed_},
           {"inputs", std::move(inputs)},
           {"outputs", std::move(outputs)},
           {"warnings", warnings_}};
  if (failed) {
    doc["failed_stage"] = to_string(*failed);
    doc["error"] = error;
  }
  write_text_file(path("manifest.json"), dump_json(doc, 2) + "\n");
}

void Experiment::fail_partial(Stage stage, const std::vector<FailedItem>& failed) {
  json items = json::array();
  std::vector<std::string> ids;
  for (const auto& f : failed) {
    items.push_back(json{{"id", f.id}, {"reason", f.reason}});
    ids.push_back(f.id);
  }
  write_text_file(path("failures.json"), dump_json(json{{"stage", to_string(stage)}, {"failed", std::move(items)}}, 2) + "\n");
  throw PartialFailure(std::move(ids), std::string(to_string(stage)) + " stage: " + failed.front().reason);
}

void Experiment::run_stage(Stage stage) {
  const std::string name(to_string(stage));
  std::erase(completed_, name);
  try {
    switch (stage) {
      case Stage::Ingest: ingest(); break;
      case Stage::TrainBase: train_base(); break;
      case Stage::Predict: predict(); break;
      case Stage::Judge: judge(); break;
      case Stage::Estimate: estimate(); break;
      case Stage::Evaluate: evaluate(); break;
      case Stage::Report: report(); break;
      case Stage::Sweep: sweep(); break;
    }
  } catch (const std::exception& e) {
    write_manifest("failed", stage, e.what());
    throw;
  }
  if (std::filesystem::exists(path("failures.json"))) std::filesystem::remove(path("failures.json"));
  completed_.push_back(name);
  const auto& all = pipeline_stages();
  const bool done = std::all_of(all.begin(), all.end(), [&](Stage s) {
    return std::find(completed_.begin(), completed_.end(), to_string(s)) != completed_.end();
  });
  write_manifest(done ? "complete" : "partial", std::nullopt, {});
}

std::vector<RankingReport> Experiment::run(Stage from) {
  const auto& stages = pipeline_stages();
  auto it = std::find(stages.begin(), stages.end(), from);
  if (it == stages.end()) throw Error(ErrorKind::InvalidConfig, "stage '" + std::string(to_string(from)) + "' is not part of run");
  for (; it != stages.end(); ++it) run_stage(*it);
  return read_reports_json(path("reports/report.json"));
}

std::vector<RankingReport> run_experiment(const ExperimentConfig& config, bool online) {
  return Experiment(config, online).run();
}

}  // namespace perfrank
