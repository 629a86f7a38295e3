// Command-line driver: agrostress <command> --config <toml> [--seed N] [--out DIR] [--threads K]

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "agrostress/commands.hpp"

int main(int argc, char** argv) {
  using namespace agrostress;
  CLI::App app{"Environmental stress models, sensitivity analysis and hybrid clustering"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kToolVersion);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::string run_id;
  pipeline::CommandOptions options;

  const char* help[] = {"generate a synthetic dataset with planted ground truth",
                        "compute growth calendars and expert-model stress vectors",
                        "train the configured stress model on delta yield",
                        "compute covariance (C) and gradient (R) sensitivity matrices",
                        "rank hybrids by sensitivity-row norm and draw heatmaps",
                        "cluster hybrids into susceptible and resistant classes",
                        "compare C and R rankings",
                        "report regression error and cluster recovery"};
  for (std::size_t k = 0; k < pipeline::kCommands.size(); ++k) {
    auto* sub = app.add_subcommand(pipeline::kCommands[k], help[k]);
    sub->add_option("--config", config_path, "TOML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "global seed (overrides the config)");
    sub->add_option("--out", out, "output root directory (overrides the config)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--run-id", run_id, "run directory name under the output root");
    if (std::string(pipeline::kCommands[k]) == "dem")
      sub->add_flag("--emit-calendar", options.emit_calendar, "also write per-environment calendar CSVs");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    auto cfg = load_run_config(config_path);
    if (seed) apply_seed(cfg, *seed);
    if (out) cfg.out = *out;
    if (threads) cfg.threads = *threads;
    if (!run_id.empty()) cfg.run_id = run_id;
    cfg.validate();
    pipeline::Run run(cfg, std::cerr);
    pipeline::run_command(command, run, options);
    std::cout << run.dir().string() << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "agrostress " << command << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "agrostress " << command << ": " << e.what() << "\n";
    return 3;
  }
}
