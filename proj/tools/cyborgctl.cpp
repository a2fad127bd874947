// cyborgctl: command-line driver for the analysis pipeline.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "cyborg/pipeline.hpp"

namespace pl = cyborg::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Cyborg account analysis pipeline"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path, out, input, preset, ground_truth;
  std::vector<std::string> settings;
  long long seed = -1;
  long long jobs = -1;
  long long agents = -1;
  double percentile = -1.0;

  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--out", out, "output directory");
  app.add_option("--input", input, "input archive (JSON lines)");
  app.add_option("--ground-truth", ground_truth, "ground-truth CSV for validation");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--jobs", jobs, "worker threads");
  app.add_option("--percentile", percentile, "calibration percentile");
  app.add_option("--preset", preset, "synth preset: fixture, coronavirus or elections");
  app.add_option("--agents", agents, "synth population size");
  app.add_option("--set", settings, "override a setting, section.key=value")->take_all();
  for (const auto& name : pl::subcommands()) app.add_subcommand(name, "run the " + name + " stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    pl::PipelineConfig cfg = config_path.empty() ? pl::default_config() : pl::load_config(config_path);
    if (!out.empty()) pl::apply_setting(cfg, "output.dir", out);
    if (!input.empty()) pl::apply_setting(cfg, "input.archive", input);
    if (!ground_truth.empty()) pl::apply_setting(cfg, "input.ground_truth", ground_truth);
    if (seed != -1) pl::apply_setting(cfg, "run.seed", std::to_string(seed));
    if (jobs != -1) pl::apply_setting(cfg, "run.jobs", std::to_string(jobs));
    if (agents != -1) pl::apply_setting(cfg, "synth.agents", std::to_string(agents));
    if (!preset.empty()) pl::apply_setting(cfg, "synth.preset", preset);
    if (percentile != -1.0) pl::apply_setting(cfg, "thresholds.percentile", CLI::detail::to_string(percentile));
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw pl::ConfigError(s, "--set expects section.key=value");
      pl::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    cfg.validate();
    pl::run(app.get_subcommands().front()->get_name(), cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cyborgctl: %s\n", e.what());
    return pl::exit_code_for(e);
  }
  return 0;
}
