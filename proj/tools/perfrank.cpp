// perfrank: label-free performance ranking pipeline.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "perfrank/error.hpp"
#include "perfrank/experiment.hpp"
#include "perfrank/ranking.hpp"
#include "perfrank/variation.hpp"

namespace {

using namespace perfrank;

enum ExitCode { kOk = 0, kValidation = 2, kPartial = 3, kInternal = 4 };

struct CommonOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool online = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required) {
  auto* c = cmd->add_option("--config", opts.config, "Experiment config (JSON)");
  if (config_required) c->required();
  cmd->add_option("--out", opts.out, "Output directory (overrides the config)");
  cmd->add_option("--seed", opts.seed, "Seed (overrides the config)");
  cmd->add_flag("--online", opts.online, "Allow requests to remote endpoints on cache misses");
}

ExperimentConfig resolve_config(const CommonOptions& opts) {
  auto cfg = load_config(opts.config);
  if (!opts.out.empty()) cfg.out = std::filesystem::absolute(opts.out);
  if (opts.seed) cfg.override_seed(*opts.seed);
  return cfg;
}

void print_reports(const std::vector<RankingReport>& reports) {
  for (const auto& r : reports) {
    std::cout << r.training_domain << '\t' << r.method << "\trho=" << (r.rho ? format_double(*r.rho) : "undefined")
              << (r.status == "ok" ? "" : " (" + r.status + ")") << '\t' << "n_domains=" << r.n_domains << '\n';
  }
}

void print_curves(const std::vector<SweepCurve>& curves) {
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      std::cout << to_string(c.mode) << "\tmargin=" << format_double(p.margin)
                << "\trho_mean=" << (p.rho_mean ? format_double(*p.rho_mean) : "undefined")
                << "\tspill=" << p.spill_total << '\n';
    }
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Rank held-out domains by estimated model accuracy without their labels"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string stage_name;

  auto* run = app.add_subcommand("run", "Run the pipeline (ingest through report)");
  add_common(run, opts, true);
  run->add_option("--stage", stage_name, "Start from this stage instead of ingest");

  std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
  for (auto [name, stage, help] : std::initializer_list<std::tuple<const char*, Stage, const char*>>{
           {"ingest", Stage::Ingest, "Load, sample and split the dataset"},
           {"train-base", Stage::TrainBase, "Train the base model or pick its prompt exemplars"},
           {"predict", Stage::Predict, "Run the base model on the test split and held-out domains"},
           {"judge", Stage::Judge, "Train the error model and judge held-out predictions"},
           {"estimate", Stage::Estimate, "Compute per-domain estimates for every configured estimator"}}) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, opts, true);
    stage_cmds.emplace_back(cmd, stage);
  }

  std::string estimates_file, training_domain = "unspecified";
  auto* evaluate = app.add_subcommand("evaluate", "Spearman correlation of estimates against true accuracy");
  add_common(evaluate, opts, false);
  evaluate->add_option("--estimates", estimates_file, "Estimates file to evaluate without a config");
  evaluate->add_option("--training-domain", training_domain, "Training domain recorded in the report");

  std::vector<std::string> report_files;
  auto* report = app.add_subcommand("report", "Merge ranking reports into one table");
  add_common(report, opts, false);
  report->add_option("--reports", report_files, "Report JSON files to merge without a config");

  std::string sweep_modes = "random,error_informed";
  double judge_accuracy = 0.7;
  std::size_t threads = 1;
  auto* sweep = app.add_subcommand("sweep", "Synthetic error-injection sweep");
  add_common(sweep, opts, false);
  sweep->add_option("--modes", sweep_modes, "Comma-separated injection modes when no config is given");
  sweep->add_option("--judge-accuracy", judge_accuracy, "Noisy judge accuracy when no config is given");
  sweep->add_option("--threads", threads, "Seeds evaluated concurrently");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  if (run->parsed()) {
    Experiment exp(resolve_config(opts), opts.online);
    print_reports(exp.run(stage_name.empty() ? Stage::Ingest : stage_from_string(stage_name)));
    return kOk;
  }
  for (auto& [cmd, stage] : stage_cmds) {
    if (!cmd->parsed()) continue;
    Experiment(resolve_config(opts), opts.online).run_stage(stage);
    return kOk;
  }
  if (evaluate->parsed()) {
    if (!opts.config.empty()) {
      Experiment exp(resolve_config(opts), opts.online);
      exp.run_stage(Stage::Evaluate);
      print_reports(read_reports_json(exp.path("reports/report.json")));
      return kOk;
    }
    if (estimates_file.empty() || opts.out.empty()) {
      throw Error(ErrorKind::InvalidConfig, "evaluate needs --config, or --estimates and --out");
    }
    std::map<std::string, std::vector<DomainEstimate>> by_method;
    for (auto& e : read_estimates(estimates_file)) by_method[e.method].push_back(std::move(e));
    std::vector<RankingReport> reports;
    for (auto& [method, subset] : by_method) reports.push_back(build_ranking_report(training_domain, method, subset));
    const std::filesystem::path out(opts.out);
    write_reports_json(out / "report.json", reports);
    write_reports_csv(out / "report.csv", reports);
    print_reports(reports);
    return kOk;
  }
  if (report->parsed()) {
    if (!opts.config.empty()) {
      Experiment exp(resolve_config(opts), opts.online);
      exp.run_stage(Stage::Report);
      std::cout << read_text_file(exp.path("reports/table.csv"));
      return kOk;
    }
    if (report_files.empty()) throw Error(ErrorKind::InvalidConfig, "report needs --config or --reports");
    std::vector<RankingReport> all;
    for (const auto& f : report_files) {
      auto reports = read_reports_json(f);
      all.insert(all.end(), reports.begin(), reports.end());
    }
    const auto table = merge_reports_table(all);
    if (!opts.out.empty()) write_text_file(std::filesystem::path(opts.out) / "table.csv", table);
    std::cout << table;
    return kOk;
  }
  if (sweep->parsed()) {
    if (!opts.config.empty()) {
      Experiment exp(resolve_config(opts), opts.online);
      exp.run_stage(Stage::Sweep);
      std::cout << read_text_file(exp.path("sweep/sweep.csv"));
      return kOk;
    }
    if (opts.out.empty()) throw Error(ErrorKind::InvalidConfig, "sweep needs --config or --out");
    InjectionPlan plan;
    for (std::size_t s = 0; s < 15; ++s) plan.margin_steps.push_back(s);
    for (std::uint64_t s = 0; s < 20; ++s) plan.seeds.push_back(s);
    plan.threads = threads;
    NoisyJudge judge(judge_accuracy, opts.seed.value_or(42));
    std::vector<SweepCurve> curves;
    std::size_t start = 0;
    while (start <= sweep_modes.size()) {
      auto end = sweep_modes.find(',', start);
      if (end == std::string::npos) end = sweep_modes.size();
      plan.mode = injection_mode_from_string(sweep_modes.substr(start, end - start));
      curves.push_back(run_sweep(plan, judge));
      start = end + 1;
    }
    const std::filesystem::path out(opts.out);
    write_sweep_csv(out / "sweep.csv", curves);
    write_sweep_plot_json(out / "plot.json", curves);
    print_curves(curves);
    return kOk;
  }
  return kInternal;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const perfrank::PartialFailure& e) {
    std::cerr << "perfrank: " << e.what() << " (" << e.failed_ids().size() << " failed)\n";
    return kPartial;
  } catch (const perfrank::Error& e) {
    std::cerr << "perfrank: " << e.what() << '\n';
    if (e.kind() == perfrank::ErrorKind::ProviderUnavailable) return kPartial;
    return perfrank::is_validation_error(e.kind()) ? kValidation : kInternal;
  } catch (const std::exception& e) {
    std::cerr << "perfrank: internal error: " << e.what() << '\n';
    return kInternal;
  }
}
