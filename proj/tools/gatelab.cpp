// gatelab: run, render and report experiment sweeps.
//
//   gatelab run <config.json> [--dry-run] [--workers N]
//   gatelab render <run_dir>
//   gatelab report <sweep_dir>

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"

#include "gatelab/experiment.hpp"
#include "gatelab/svg.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Graph attention lab: GAT/GATE training sweeps and diagnostics"};
  app.require_subcommand(1);

  std::string config_path;
  bool dry_run = false;
  std::size_t workers = 1;
  auto* run = app.add_subcommand("run", "train every run of a sweep config");
  run->add_option("config", config_path, "experiment JSON")->required();
  run->add_flag("--dry-run", dry_run, "validate and print the run matrix only");
  run->add_option("--workers", workers, "concurrent runs")->check(CLI::PositiveNumber);

  std::string run_dir;
  auto* render = app.add_subcommand("render", "re-render the SVG plots of one run");
  render->add_option("run_dir", run_dir)->required()->check(CLI::ExistingDirectory);

  std::string sweep_dir;
  auto* report = app.add_subcommand("report", "rebuild sweep_summary.csv from run summaries");
  report->add_option("sweep_dir", sweep_dir)->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = gatelab::load_config(config_path);
      if (dry_run) {
        std::cout << gatelab::describe_run_matrix(cfg);
        return 0;
      }
      gatelab::SweepOptions options;
      options.workers = workers;
      options.log = &std::cerr;
      const auto outcomes = gatelab::run_experiment(cfg, options);
      std::size_t failed = 0;
      for (const auto& o : outcomes) failed += o.failed;
      std::cout << gatelab::io::read_file(gatelab::resolve_output_dir(cfg) / "sweep_summary.csv");
      if (failed) {
        std::cerr << failed << " of " << outcomes.size() << " runs failed\n";
        return 3;
      }
      return 0;
    }
    if (*render) {
      const auto result = gatelab::svg::render_run(run_dir);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      for (const auto& p : result.written) std::cout << p.string() << '\n';
      return 0;
    }
    if (*report) {
      std::cout << gatelab::write_sweep_summary(sweep_dir);
      return 0;
    }
  } catch (const gatelab::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
