#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tripwell/runner.hpp"

#ifndef TRIPWELL_CONFIG_DIR
#define TRIPWELL_CONFIG_DIR "configs"
#endif

int main(int argc, char** argv) {
  CLI::App app{"Triple-well two-parameter phase estimation: experiments and figure data"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<unsigned> workers;
  std::optional<unsigned> seed;
  auto* run = app.add_subcommand("run", "Run one experiment described by a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--workers", workers, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Seed for randomized verification sampling");

  std::string configs = TRIPWELL_CONFIG_DIR;
  std::string repro_out = "reproduction";
  unsigned repro_workers = 1;
  auto* repro = app.add_subcommand("reproduce", "Run every checked-in figure config and compare");
  repro->add_option("--out", repro_out, "Output directory")->capture_default_str();
  repro->add_option("--configs", configs, "Directory of figure configs")->capture_default_str();
  repro->add_option("--workers", repro_workers, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tripwell::kExitConfig;
  }

  if (*run) {
    tripwell::ExperimentConfig cfg;
    try {
      cfg = tripwell::load_config(config_path, workers, seed);
    } catch (const tripwell::ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return tripwell::kExitConfig;
    } catch (const tripwell::IoError& e) {
      std::cerr << "I/O error: " << e.what() << '\n';
      return tripwell::kExitIo;
    }
    return tripwell::run(cfg, out_dir, std::cout, std::cerr);
  }
  return tripwell::reproduce_all(configs, repro_out, repro_workers, std::cout, std::cerr);
}
