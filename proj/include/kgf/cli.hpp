#pragma once

// `kgf` command-line front end. Exit codes: 0 success, 1 usage error,
// 2 data error, 3 numerical fault.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <regex>
#include <string>
#include <vector>

#include "kgf/checkpoint.hpp"
#include "kgf/error.hpp"
#include "kgf/eval.hpp"
#include "kgf/hpo.hpp"
#include "kgf/ingest.hpp"
#include "kgf/text.hpp"
#include "kgf/training.hpp"

namespace kgf::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct IngestArgs {
  std::string combo, mono, targets, ppi, variant = "selfloops", out;
  std::size_t min_pse_count = 500;
  bool lenient = false;
};

struct SplitArgs {
  std::string dataset, out;
  double fraction = 0.1;
  double valid_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string dataset, config, out;
  std::vector<std::string> settings;
  bool save_every_epoch = false;
};

struct EvalArgs {
  std::string dataset, checkpoint, out, summary;
  std::uint64_t seed = 0;
  bool trapezoid = false;
  bool no_ranking = false;
};

struct HpoArgs {
  std::string dataset, space, config, journal;
  std::vector<std::string> settings;
  std::size_t trials = 100;
  std::optional<std::size_t> sobol;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
};

struct CurveArgs {
  std::string checkpoints, dataset, out;
  std::uint64_t seed = 0;
};

struct ReportArgs {
  std::string journal, eval;
};

struct Invocation {
  IngestArgs ingest;
  SplitArgs split;
  TrainArgs train;
  EvalArgs eval;
  HpoArgs hpo;
  CurveArgs curve;
  ReportArgs report;
};

inline CLI::Validator open_unit_interval(bool allow_zero) {
  return CLI::Validator(
      [allow_zero](std::string& s) -> std::string {
        const auto v = text::parse_double(s);
        if (!v || !(allow_zero ? *v >= 0.0 : *v > 0.0) || !(*v < 1.0)) {
          return allow_zero ? "must lie in [0,1)" : "must lie in (0,1)";
        }
        return {};
      },
      allow_zero ? "[0,1)" : "(0,1)");
}

/// Parser for every subcommand, bound to the fields of `inv`.
inline std::unique_ptr<CLI::App> build_app(Invocation& inv) {
  auto app = std::make_unique<CLI::App>("Knowledge-graph embedding toolkit for polypharmacy side-effect prediction",
                                        "kgf");
  app->require_subcommand(1);
  app->fallthrough(false);

  auto* ingest = app->add_subcommand("ingest", "Build a dataset directory from the four source tables");
  ingest->add_option("--combo", inv.ingest.combo, "Drug-pair side-effect table (CSV)")->required();
  ingest->add_option("--mono", inv.ingest.mono, "Single-drug side-effect table (CSV)")->required();
  ingest->add_option("--targets", inv.ingest.targets, "Drug-target table (CSV)")->required();
  ingest->add_option("--ppi", inv.ingest.ppi, "Protein-protein interaction table (CSV)")->required();
  ingest->add_option("--variant", inv.ingest.variant, "Graph variant")
      ->check(CLI::IsMember({"selfloops", "nonnaive"}))
      ->capture_default_str();
  ingest->add_option("--min-pse-count", inv.ingest.min_pse_count, "Drop side effects with fewer drug pairs")
      ->capture_default_str();
  ingest->add_flag("--lenient", inv.ingest.lenient, "Skip malformed rows instead of failing");
  ingest->add_option("--out", inv.ingest.out, "Output dataset directory")->required();

  auto* split = app->add_subcommand("split", "Carve per-relation holdout and validation splits");
  split->add_option("--dataset", inv.split.dataset, "Dataset directory")->required();
  split->add_option("--fraction", inv.split.fraction, "Holdout fraction per side-effect relation")
      ->check(open_unit_interval(false))
      ->capture_default_str();
  split->add_option("--valid-fraction", inv.split.valid_fraction, "Validation fraction of what remains (0 disables)")
      ->check(open_unit_interval(true))
      ->capture_default_str();
  split->add_option("--seed", inv.split.seed, "Random seed")->required();
  split->add_option("--out", inv.split.out, "Output directory (default: rewrite --dataset)");

  auto* train = app->add_subcommand("train", "Train an embedding model");
  train->add_option("--dataset", inv.train.dataset, "Dataset directory")->required();
  train->add_option("--config", inv.train.config, "Training config file (key = value)");
  train->add_option("--set", inv.train.settings, "Override one setting, key=value (repeatable)");
  train->add_option("--out", inv.train.out, "Run directory (default: <dataset>/run)");
  train->add_flag("--save-every-epoch", inv.train.save_every_epoch, "Write epoch_%05d.ckpt after every epoch");

  auto* eval = app->add_subcommand("eval", "Assess a checkpoint on the holdout split");
  eval->add_option("--dataset", inv.eval.dataset, "Dataset directory")->required();
  eval->add_option("--checkpoint", inv.eval.checkpoint, "Checkpoint file")->required();
  eval->add_option("--seed", inv.eval.seed, "Seed for negative sampling and tie ordering")->required();
  eval->add_option("--out", inv.eval.out, "Per-relation report CSV")->required();
  eval->add_option("--summary", inv.eval.summary, "Summary CSV (default: <out stem>_summary.csv)");
  eval->add_flag("--trapezoid", inv.eval.trapezoid, "Integrate the PR curve with the trapezoidal rule");
  eval->add_flag("--no-ranking", inv.eval.no_ranking, "Skip filtered MRR and hits@k");

  auto* hpo = app->add_subcommand("hpo", "Sobol then Bayesian-optimisation hyperparameter search");
  hpo->add_option("--dataset", inv.hpo.dataset, "Dataset directory")->required();
  hpo->add_option("--space", inv.hpo.space, "Search-space file (default: built-in space)");
  hpo->add_option("--config", inv.hpo.config, "Base training config for every trial");
  hpo->add_option("--set", inv.hpo.settings, "Override one base setting, key=value (repeatable)");
  hpo->add_option("--trials", inv.hpo.trials, "Total trials")->check(CLI::PositiveNumber)->capture_default_str();
  hpo->add_option("--sobol", inv.hpo.sobol, "Sobol design trials (default: half of --trials)");
  hpo->add_option("--workers", inv.hpo.workers, "Parallel design trials")->check(CLI::PositiveNumber)->capture_default_str();
  hpo->add_option("--seed", inv.hpo.seed, "Random seed")->required();
  hpo->add_option("--journal", inv.hpo.journal, "Trial journal (resumed when present)")->required();

  auto* curve = app->add_subcommand("curve", "Assess every per-epoch checkpoint of a run");
  curve->add_option("--checkpoints", inv.curve.checkpoints, "Run directory holding epoch_%05d.ckpt and train_log.csv")
      ->required();
  curve->add_option("--dataset", inv.curve.dataset, "Dataset directory")->required();
  curve->add_option("--seed", inv.curve.seed, "Seed for negative sampling and tie ordering")->required();
  curve->add_option("--out", inv.curve.out, "Output CSV (default: standard output)");

  auto* report = app->add_subcommand("report", "Summarise a search journal");
  report->add_option("--journal", inv.report.journal, "Trial journal")->required();
  report->add_option("--eval", inv.report.eval, "Per-relation report CSV from eval");
  return app;
}

namespace detail {

inline KeyValues parse_settings(const std::vector<std::string>& settings) {
  KeyValues out;
  for (const auto& s : settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(ErrorKind::InvalidConfig, "--set expects key=value, got '" + s + "'");
    out.emplace_back(std::string(text::trim(std::string_view(s).substr(0, eq))),
                     std::string(text::trim(std::string_view(s).substr(eq + 1))));
  }
  return out;
}

inline TrainConfig load_config(const std::string& path, const std::vector<std::string>& settings) {
  TrainConfig c = path.empty() ? TrainConfig{} : load_train_config(path);
  return apply_settings(c, parse_settings(settings));
}

inline void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty()) {
    out << content;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  text::write_file_atomic(p, content);
}

inline int run_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  const auto records = parse_source_tables({a.combo, a.mono, a.targets, a.ppi}, !a.lenient);
  for (const auto& e : records.errors) err << "skipped " << e.file << ":" << e.row << ": " << e.message << "\n";
  const auto variant = a.variant == "nonnaive" ? GraphVariant::NonNaive : GraphVariant::Selfloops;
  const auto bundle = build_graph(records, variant, a.min_pse_count);
  export_dataset(bundle, a.out);
  for (const auto& [k, v] : bundle.ledger) out << k << "\t" << v << "\n";
  return kOk;
}

inline int run_split(const SplitArgs& a, std::ostream& out) {
  auto bundle = import_dataset(a.dataset);
  if (!bundle.holdout.empty() || !bundle.valid.empty()) {
    fail(ErrorKind::InvalidConfig, a.dataset + " is already split");
  }
  bundle = holdout_split(std::move(bundle), a.fraction, a.seed);
  if (a.valid_fraction > 0.0) bundle = validation_split(std::move(bundle), a.valid_fraction, a.seed);
  export_dataset(bundle, a.out.empty() ? a.dataset : a.out);
  out << "train\t" << bundle.train.size() << "\nvalid\t" << bundle.valid.size() << "\nholdout\t"
      << bundle.holdout.size() << "\n";
  return kOk;
}

template <typename Real>
TrainLog train_with(const TrainConfig& c, const DatasetBundle& bundle, const TrainOutput& output) {
  return run_training<Real>(c, bundle, output).log;
}

inline int run_train(const TrainArgs& a, std::ostream& out) {
  const auto config = load_config(a.config, a.settings);
  const auto bundle = import_dataset(a.dataset);
  const fs::path dir = a.out.empty() ? fs::path(a.dataset) / "run" : fs::path(a.out);
  fs::create_directories(dir);
  text::write_file_atomic(dir / "config.txt", format_key_values(to_key_values(config)));
  const TrainOutput output{dir, a.save_every_epoch};
  const auto log = config.double_precision ? train_with<double>(config, bundle, output)
                                           : train_with<float>(config, bundle, output);
  out << "epochs\t" << log.epochs.size() << "\nstop\t" << log.stop_reason << "\nfinal_loss\t"
      << text::exact(log.epochs.back().loss) << "\ncheckpoint\t" << (dir / "final.ckpt").string() << "\n";
  return kOk;
}

inline std::string default_summary_path(const std::string& out) {
  fs::path p(out);
  return (p.parent_path() / (p.stem().string() + "_summary.csv")).string();
}

inline int run_eval(const EvalArgs& a, std::ostream& out) {
  const auto bundle = import_dataset(a.dataset);
  const auto params = read_model<double>(Checkpoint::load(a.checkpoint));
  if (params.entity_count() != bundle.vocabulary.entity_count() ||
      params.relation_count() != bundle.vocabulary.relation_count()) {
    fail(ErrorKind::DimensionMismatch, "checkpoint tables do not match the dataset vocabulary");
  }
  const auto report = assess(params, bundle, a.seed, {a.trapezoid, !a.no_ranking});
  write_output(a.out, report_csv(report, bundle.vocabulary), out);
  const auto summary = summary_csv(report);
  write_output(a.summary.empty() ? default_summary_path(a.out) : a.summary, summary, out);
  out << summary;
  return kOk;
}

inline int run_hpo(const HpoArgs& a, std::ostream& out, std::ostream& err) {
  const auto base = load_config(a.config, a.settings);
  const auto space = a.space.empty() ? default_search_space() : load_search_space(a.space);
  const auto bundle = import_dataset(a.dataset);
  if (bundle.valid.empty()) fail(ErrorKind::EmptyEvaluation, "search needs a validation split");
  const std::size_t sobol = a.sobol.value_or(a.trials / 2 + a.trials % 2);
  if (sobol > a.trials) fail(ErrorKind::InvalidConfig, "--sobol exceeds --trials");
  const TrialRunner runner = [&](const Assignment& assignment, std::size_t) {
    const auto started = std::chrono::steady_clock::now();
    const auto config = apply_assignment(base, assignment);
    double mrr = 0.0;
    if (config.double_precision) {
      mrr = valid_mrr(run_training<double>(config, bundle).params, bundle);
    } else {
      mrr = valid_mrr(run_training<float>(config, bundle).params, bundle);
    }
    return TrialResult{mrr, std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()};
  };
  const auto result = run_search(space, {sobol, a.trials - sobol}, runner, {a.seed, fs::path(a.journal), a.workers});
  if (!result.best) {
    err << "no trial completed\n";
    return kData;
  }
  const auto& best = result.records[*result.best];
  out << "best_trial\t" << best.index << "\nvalid_mrr\t" << text::exact(*best.outcome) << "\n";
  for (const auto& [k, v] : best.assignment) out << k << "\t" << v << "\n";
  return kOk;
}

inline int run_curve(const CurveArgs& a, std::ostream& out) {
  const auto bundle = import_dataset(a.dataset);
  const fs::path dir(a.checkpoints);
  if (!fs::is_directory(dir)) fail(ErrorKind::FileNotFound, a.checkpoints);
  static const std::regex pattern(R"(epoch_(\d{5})\.ckpt)");
  std::vector<std::pair<int, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) files.emplace_back(std::stoi(m[1].str()), entry.path());
  }
  std::sort(files.begin(), files.end());
  std::map<int, double> cumulative;
  if (fs::exists(dir / "train_log.csv")) {
    double total = 0.0;
    for (const auto& e : TrainLog::parse_csv(text::read_file(dir / "train_log.csv")).epochs) {
      total += e.seconds;
      cumulative[e.epoch] = total;
    }
  }
  std::string csv = "epoch,median_auroc,median_auprc,median_ap50,seconds_cum\n";
  for (const auto& [epoch, path] : files) {
    try {
      const auto params = read_model<double>(Checkpoint::load(path));
      const auto report = assess(params, bundle, a.seed, {false, false});
      const auto it = cumulative.find(epoch);
      csv += std::to_string(epoch) + "," + text::fixed6(report.median_auroc) + "," + text::fixed6(report.median_auprc) +
             "," + text::fixed6(report.median_ap50) + "," + (it == cumulative.end() ? "" : text::fixed6(it->second)) +
             "\n";
    } catch (const Error& e) {
      csv += "#skipped," + path.filename().string() + "," + to_string(e.kind()) + "\n";
    }
  }
  write_output(a.out, csv, out);
  return kOk;
}

inline int run_report(const ReportArgs& a, std::ostream& out) {
  if (!fs::exists(a.journal)) fail(ErrorKind::FileNotFound, a.journal);
  const auto records = read_journal(a.journal);
  std::vector<double> outcomes;
  for (const auto& r : records) {
    if (r.outcome) outcomes.push_back(*r.outcome);
  }
  out << "trials\t" << records.size() << "\nok\t" << outcomes.size() << "\nfailed\t"
      << records.size() - outcomes.size() << "\n";
  if (const auto best = best_trial(records)) {
    const auto& b = records[*best];
    out << "median_outcome\t" << text::fixed6(median(outcomes)) << "\nbest_trial\t" << b.index << "\nbest_outcome\t"
        << text::fixed6(*b.outcome) << "\n";
    for (const auto& [k, v] : b.assignment) out << "  " << k << " = " << v << "\n";
  }
  if (!a.eval.empty()) {
    const auto lines = text::read_lines(a.eval);
    const auto it = std::find_if(lines.begin(), lines.end(), [](const std::string& l) { return l.rfind("#median,", 0) == 0; });
    if (it == lines.end()) fail(ErrorKind::MalformedRow, a.eval + " has no #median row");
    const auto f = text::split_csv(*it);
    if (f.size() != 7) fail(ErrorKind::MalformedRow, a.eval + ": #median row has " + std::to_string(f.size()) + " fields");
    std::size_t relations = 0;
    for (const auto& l : lines) relations += !l.empty() && l[0] != '#' && l.rfind("relation_id,", 0) != 0;
    out << "\nMedian performance across " << relations << " side effects\n";
    out << "AUROC\tAUPRC\tAP@50\n" << f[4] << "\t" << f[5] << "\t" << f[6] << "\n";
  }
  return kOk;
}

}  // namespace detail

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NumericalFault: return kNumerical;
    case ErrorKind::InvalidConfig: return kUsage;
    default: return kData;
  }
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Invocation inv;
  auto app = build_app(inv);
  try {
    app->parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app->exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app->exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    if (argc <= 1) {
      err << app->help();
    } else {
      app->exit(e, out, err);
    }
    return kUsage;
  }
  try {
    const auto& used = app->get_subcommands();
    const std::string name = used.front()->get_name();
    if (name == "ingest") return detail::run_ingest(inv.ingest, out, err);
    if (name == "split") return detail::run_split(inv.split, out);
    if (name == "train") return detail::run_train(inv.train, out);
    if (name == "eval") return detail::run_eval(inv.eval, out);
    if (name == "hpo") return detail::run_hpo(inv.hpo, out, err);
    if (name == "curve") return detail::run_curve(inv.curve, out);
    if (name == "report") return detail::run_report(inv.report, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"kgf"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace kgf::cli
