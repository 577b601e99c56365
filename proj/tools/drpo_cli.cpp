// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

// drpo: command-line front end.
//
//   drpo simulate   --config exp.yaml [--output DIR] [--seed N] [--estimator NAME[,NAME...]]
//   drpo advantages --input rollouts.jsonl [--output adv.jsonl] [--config exp.yaml] [--seed N] [--estimator NAME]
//   drpo score      --input predictions.jsonl --gold gold.jsonl [--output samples.jsonl] [--metrics metrics.csv]
//                   [--config exp.yaml]
//
// DRPO_VERBOSITY=1 prints progress to stderr.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "drpo/commands.hpp"
#include "drpo/config.hpp"
#include "drpo/error.hpp"

namespace {

struct Options {
  std::string config;
  std::string input;
  std::string gold;
  std::string output;
  std::string metrics;
  std::optional<std::uint64_t> seed;
  std::string estimator;
};

int verbosity() {
  const char* v = std::getenv("DRPO_VERBOSITY");
  return v == nullptr ? 0 : std::atoi(v);
}

drpo::ExperimentConfig resolve_config(const Options& opts) {
  drpo::ExperimentConfig cfg = opts.config.empty() ? drpo::parse_config("") : drpo::load_config(opts.config);
  if (opts.seed) cfg.seeds = {*opts.seed};
  if (!opts.estimator.empty()) {
    cfg.estimators.clear();
    std::stringstream ss(opts.estimator);
    std::string name;
    while (std::getline(ss, name, ',')) {
      try {
        cfg.estimators.push_back(drpo::parse_estimator(name));
      } catch (const drpo::ValidationError& e) {
        throw drpo::ValidationError(fmt::format("--estimator: {}", e.what()));
      }
    }
  }
  cfg.validate();
  return cfg;
}

std::ifstream open_input(const std::string& path, const char* flag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw drpo::ValidationError(fmt::format("{}: cannot open '{}'", flag, path));
  return in;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw drpo::RuntimeError(fmt::format("cannot write '{}'", path));
  out << contents;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-aware relative policy optimization toolkit"};
  app.require_subcommand(1);
  Options opts;

  auto* simulate = app.add_subcommand("simulate", "Train the toy policy on the synthetic multi-domain environment");
  simulate->add_option("--config", opts.config, "Experiment config (YAML)")->required();
  simulate->add_option("--output", opts.output, "Output directory (overrides output.dir)");
  simulate->add_option("--seed", opts.seed, "Single seed (overrides seeds)");
  simulate->add_option("--estimator", opts.estimator, "Estimator name(s), comma separated (overrides estimators)");

  auto* advantages = app.add_subcommand("advantages", "Compute advantages for a rollout JSONL file");
  advantages->add_option("--input", opts.input, "Rollout JSONL")->required();
  advantages->add_option("--output", opts.output, "Advantage JSONL (default: stdout)");
  advantages->add_option("--config", opts.config, "Experiment config (YAML)");
  advantages->add_option("--seed", opts.seed, "Clustering seed (overrides seeds)");
  advantages->add_option("--estimator", opts.estimator, "Estimator name (overrides estimators)");

  auto* score = app.add_subcommand("score", "Score predictions against gold labels and masks");
  score->add_option("--input", opts.input, "Prediction JSONL")->required();
  score->add_option("--gold", opts.gold, "Gold JSONL")->required();
  score->add_option("--output", opts.output, "Per-sample reward JSONL (default: stdout)");
  score->add_option("--metrics", opts.metrics, "Metric CSV (default: <output>.metrics.csv, or stderr)");
  score->add_option("--config", opts.config, "Experiment config (YAML) supplying reward weights");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? drpo::kExitOk : drpo::kExitValidation;
  }

  try {
    const drpo::ExperimentConfig cfg = resolve_config(opts);
    std::ostringstream sink;
    std::ostream& log = verbosity() > 0 ? std::cerr : sink;

    if (simulate->parsed()) {
      drpo::run_simulate(cfg, opts.output.empty() ? cfg.output_dir : opts.output, log);
    } else if (advantages->parsed()) {
      auto in = open_input(opts.input, "--input");
      std::ostringstream out;
      drpo::run_advantages(in, out, cfg);
      if (opts.output.empty()) std::cout << out.str();
      else write_file(opts.output, out.str());
    } else if (score->parsed()) {
      auto preds = open_input(opts.input, "--input");
      auto gold = open_input(opts.gold, "--gold");
      std::ostringstream samples;
      std::ostringstream metrics;
      drpo::run_score(preds, gold, samples, metrics, cfg.weights);
      if (opts.output.empty()) std::cout << samples.str();
      else write_file(opts.output, samples.str());
      const std::string metrics_path = !opts.metrics.empty()   ? opts.metrics
                                       : !opts.output.empty() ? opts.output + ".metrics.csv"
                                                              : std::string();
      if (metrics_path.empty()) std::cerr << metrics.str();
      else write_file(metrics_path, metrics.str());
    }
  } catch (const drpo::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return drpo::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return drpo::kExitRuntime;
  }
  return drpo::kExitOk;
}
