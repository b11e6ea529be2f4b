#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "perfrank/error.hpp"
#include "perfrank/estimator.hpp"
#include "perfrank/experiment.hpp"
#include "perfrank/features.hpp"
#include "perfrank/providers.hpp"
#include "perfrank/ranking.hpp"
#include "perfrank/variation.hpp"

namespace py = pybind11;
using namespace perfrank;

namespace {

FeatureConfig make_features(int ngram_order, bool remove_stopwords, const std::string& weighting) {
  FeatureConfig cfg;
  cfg.ngram_order = ngram_order;
  cfg.remove_stopwords = remove_stopwords;
  cfg.weighting = weighting_from_string(weighting);
  cfg.validate();
  return cfg;
}

std::vector<Instance> as_instances(const std::vector<std::string>& texts, const std::vector<std::string>& labels) {
  if (!labels.empty() && labels.size() != texts.size()) {
    throw Error(ErrorKind::LengthMismatch, "texts and labels differ in length");
  }
  std::vector<Instance> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back({std::to_string(i), texts[i], labels.empty() ? std::string() : labels[i], "py"});
  }
  return out;
}

TokenDistribution dist_from_dict(const std::map<std::string, double>& probs) { return TokenDistribution{probs}; }

py::dict report_dict(const RankingReport& r) {
  py::list per_domain;
  for (const auto& e : r.per_domain) {
    py::dict d;
    d["domain"] = e.domain;
    d["method"] = e.method;
    d["estimated"] = e.estimated;
    d["raw"] = e.raw ? py::cast(*e.raw) : py::none();
    d["true_accuracy"] = e.true_accuracy ? py::cast(*e.true_accuracy) : py::none();
    d["n"] = e.n;
    per_domain.append(d);
  }
  py::dict out;
  out["training_domain"] = r.training_domain;
  out["method"] = r.method;
  out["rho"] = r.rho ? py::cast(*r.rho) : py::none();
  out["status"] = r.status;
  out["n_domains"] = r.n_domains;
  out["per_domain"] = per_domain;
  out["mean_accuracy"] = r.true_accuracy_stats.mean;
  out["sd_accuracy"] = r.true_accuracy_stats.sd;
  return out;
}

class PyLinearTextClassifier {
 public:
  explicit PyLinearTextClassifier(TextClassifier inner) : inner_(std::move(inner)), predictor_(inner_) {}

  static PyLinearTextClassifier fit(const std::vector<std::string>& texts, const std::vector<std::string>& labels,
                                    int ngram_order, bool remove_stopwords, int epochs, double learning_rate,
                                    std::uint64_t seed) {
    std::vector<Label> classes;
    for (const auto& l : labels) {
      if (std::find(classes.begin(), classes.end(), l) == classes.end()) classes.push_back(l);
    }
    std::sort(classes.begin(), classes.end());
    TrainConfig train;
    train.epochs = epochs;
    train.learning_rate = learning_rate;
    train.seed = seed;
    auto instances = as_instances(texts, labels);
    return PyLinearTextClassifier(train_text_classifier(instances, LabelSchema::custom(classes),
                                                        make_features(ngram_order, remove_stopwords, "tfidf"), train));
  }

  std::vector<std::pair<std::string, double>> predict(const std::vector<std::string>& texts) {
    auto instances = as_instances(texts, {});
    std::vector<std::pair<std::string, double>> out;
    for (const auto& p : predictor_.run(instances).results) out.emplace_back(p.predicted, p.confidence.value_or(0.0));
    return out;
  }

  std::vector<std::string> classes() const { return inner_.model.classes(); }
  std::vector<double> loss_history() const { return inner_.model.loss_history(); }
  void save(const std::filesystem::path& dir) const { inner_.save(dir); }
  static PyLinearTextClassifier load(const std::filesystem::path& dir) {
    return PyLinearTextClassifier(TextClassifier::load(dir));
  }

 private:
  TextClassifier inner_;
  LinearPredictor predictor_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of perfrank: estimators, rank correlation, drift metrics and the experiment pipeline.";

  py::register_exception<Error>(m, "PerfrankError", PyExc_ValueError);

  m.def("rank_with_ties", [](const std::vector<double>& v) { return rank_with_ties(v); }, py::arg("values"));
  m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); },
        py::arg("xs"), py::arg("ys"));
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); },
        py::arg("xs"), py::arg("ys"), "Pearson correlation of tie-averaged ranks.");
  m.def("accuracy", [](const std::vector<std::string>& g, const std::vector<std::string>& p) { return accuracy(g, p); },
        py::arg("gold"), py::arg("pred"));
  m.def(
      "macro_f1",
      [](const std::vector<std::string>& g, const std::vector<std::string>& p, const std::vector<std::string>& labels) {
        return macro_f1(g, p, LabelSchema::custom(labels));
      },
      py::arg("gold"), py::arg("pred"), py::arg("labels"));
  m.def(
      "summary_stats",
      [](const std::vector<double>& v) {
        const auto s = summary_stats(v);
        return std::make_pair(s.mean, s.sd);
      },
      py::arg("values"), "(mean, population standard deviation)");

  m.def(
      "tokenize",
      [](const std::string& text, int ngram_order, bool remove_stopwords) {
        return tokenize(text, make_features(ngram_order, remove_stopwords, "tfidf"));
      },
      py::arg("text"), py::arg("ngram_order") = 1, py::arg("remove_stopwords") = false);
  m.def(
      "token_distribution",
      [](const std::vector<std::string>& texts, bool remove_stopwords) {
        return token_distribution(as_instances(texts, {}), make_features(1, remove_stopwords, "count")).probs;
      },
      py::arg("texts"), py::arg("remove_stopwords") = true);
  m.def(
      "js_divergence",
      [](const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
        return js_divergence(dist_from_dict(p), dist_from_dict(q));
      },
      py::arg("p"), py::arg("q"), "Base-2 Jensen-Shannon divergence of two token distributions.");

  m.def(
      "estimate_from_errors",
      [](const std::vector<double>& error_probs, double threshold) {
        std::vector<ErrorJudgment> js;
        for (std::size_t i = 0; i < error_probs.size(); ++i) js.push_back({std::to_string(i), "py", error_probs[i]});
        return estimate_from_errors("py", js, threshold).estimated;
      },
      py::arg("error_probs"), py::arg("threshold") = 0.5);
  m.def(
      "zero_shot_estimate",
      [](const std::vector<double>& confidences) {
        std::vector<Prediction> ps;
        for (std::size_t i = 0; i < confidences.size(); ++i) {
          ps.push_back({std::to_string(i), "py", "x", confidences[i], std::nullopt});
        }
        return zero_shot_estimate("py", ps).estimated;
      },
      py::arg("confidences"));
  m.def("cosine", [](const std::vector<double>& u, const std::vector<double>& v) { return cosine(u, v); },
        py::arg("u"), py::arg("v"));
  m.def(
      "semantic_drift_estimate",
      [](const std::vector<std::vector<double>>& queries, const std::map<std::string, std::vector<double>>& labels) {
        std::vector<Prediction> ps;
        std::map<std::string, std::vector<double>> q;
        for (std::size_t i = 0; i < queries.size(); ++i) {
          ps.push_back({std::to_string(i), "py", "x", std::nullopt, std::nullopt});
          q[std::to_string(i)] = queries[i];
        }
        const auto e = semantic_drift_estimate("py", ps, q, labels);
        return std::make_pair(e.estimated, *e.raw);
      },
      py::arg("queries"), py::arg("label_embeddings"), "(clamped estimate, raw mean of max cosines)");

  py::class_<PyLinearTextClassifier>(m, "LinearTextClassifier")
      .def_static("fit", &PyLinearTextClassifier::fit, py::arg("texts"), py::arg("labels"), py::arg("ngram_order") = 1,
                  py::arg("remove_stopwords") = true, py::arg("epochs") = 100, py::arg("learning_rate") = 0.1,
                  py::arg("seed") = 42)
      .def_static("load", &PyLinearTextClassifier::load, py::arg("directory"))
      .def("predict", &PyLinearTextClassifier::predict, py::arg("texts"), "List of (label, confidence).")
      .def("save", &PyLinearTextClassifier::save, py::arg("directory"))
      .def_property_readonly("classes", &PyLinearTextClassifier::classes)
      .def_property_readonly("loss_history", &PyLinearTextClassifier::loss_history);

  m.def(
      "run_experiment",
      [](const std::filesystem::path& config, bool online, const std::optional<std::filesystem::path>& out,
         std::optional<std::uint64_t> seed) {
        auto cfg = load_config(config);
        if (out) cfg.out = std::filesystem::absolute(*out);
        if (seed) cfg.override_seed(*seed);
        std::vector<RankingReport> reports;
        {
          py::gil_scoped_release release;
          reports = run_experiment(cfg, online);
        }
        py::list result;
        for (const auto& r : reports) result.append(report_dict(r));
        return result;
      },
      py::arg("config"), py::arg("online") = false, py::arg("out") = py::none(), py::arg("seed") = py::none());

  m.def(
      "run_sweep",
      [](const std::string& mode, const std::vector<std::size_t>& margin_steps, const std::vector<std::uint64_t>& seeds,
         std::size_t n_domains, std::size_t n_per_domain, double judge_accuracy, std::uint64_t judge_seed,
         std::size_t threads) {
        InjectionPlan plan;
        plan.mode = injection_mode_from_string(mode);
        plan.margin_steps = margin_steps;
        plan.seeds = seeds;
        plan.n_domains = n_domains;
        plan.n_per_domain = n_per_domain;
        plan.threads = threads;
        SweepCurve curve;
        {
          py::gil_scoped_release release;
          NoisyJudge judge(judge_accuracy, judge_seed);
          curve = run_sweep(plan, judge);
        }
        py::list points;
        for (const auto& p : curve.points) {
          py::dict d;
          d["margin"] = p.margin;
          d["margin_step"] = p.margin_step;
          d["rho_mean"] = p.rho_mean ? py::cast(*p.rho_mean) : py::none();
          d["rho_sd"] = p.rho_sd;
          d["n_seeds"] = p.n_seeds;
          d["spill_total"] = p.spill_total;
          points.append(d);
        }
        return points;
      },
      py::arg("mode"), py::arg("margin_steps"), py::arg("seeds"), py::arg("n_domains") = 15,
      py::arg("n_per_domain") = 500, py::arg("judge_accuracy") = 0.7, py::arg("judge_seed") = 42,
      py::arg("threads") = 1);
}
