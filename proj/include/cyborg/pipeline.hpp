#pragma once

// Pipeline stages behind the cyborgctl subcommands.
//
// Every stage reads its inputs from earlier stages' artifacts under
// <out>/<stage>/ and writes its own directory. Outputs carry no timestamps
// and are sorted, so reruns over unchanged inputs are byte-identical.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cyborg/error.hpp"
#include "cyborg/timeutil.hpp"

namespace cyborg::pipeline {

// Invalid configuration; field() names the offending key ("section.key").
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config " + field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// A stage's input is absent.
class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(const std::filesystem::path& path)
      : Error("missing artifact " + path.string()), path_(path) {}
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

struct PipelineConfig {
  std::filesystem::path input;       // archive; empty -> <out>/synth/archive.jsonl
  std::filesystem::path ground_truth;  // empty -> <out>/synth/ground_truth.csv when present
  std::filesystem::path out = "out";
  std::uint64_t seed = 42;
  unsigned jobs = 1;

  std::filesystem::path scorer_weights;  // empty -> embedded reference weights
  std::vector<std::string> automation_sources;

  double bot_threshold = 0.70;
  int min_flips = 3;
  double min_mean_delta = 0.10;
  double percentile = 75.0;

  double eigen_tol = 1e-8;
  int eigen_max_iter = 1000;
  double significance = 0.001;

  std::filesystem::path lexicon;
  int stance_max_iter = 100;
  double stance_tol = 1e-6;
  double neutral_band = 0.1;

  std::size_t topics_k = 5;
  int topics_iterations = 1000;
  double topics_alpha = -1.0;  // negative -> 50 / K
  double topics_beta = 0.01;
  std::size_t topics_max_docs = 2000;  // per stratum; 0 = no cap
  std::size_t topics_top_n = 10;
  std::filesystem::path stopwords;

  Day analysis_date{};

  std::string synth_preset = "fixture";  // fixture | coronavirus | elections
  std::size_t synth_agents = 5000;
  double synth_degree_inflation = 3.0;

  // Throws ConfigError for the first out-of-range field.
  void validate() const;
};

// Built-in defaults; data paths point at the source tree's data directory.
PipelineConfig default_config();

// Sectioned key = value file ('#' or ';' comments). Keys override the
// defaults; relative paths resolve against the file's directory. Unknown
// sections or keys are config errors.
PipelineConfig load_config(const std::filesystem::path& path);

// Applies one "section.key=value" override.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);

// Stages. Each throws MissingArtifact, ConfigError or another Error.
void run_synth(const PipelineConfig& config);
void run_ingest(const PipelineConfig& config);
void run_score(const PipelineConfig& config);
void run_flips(const PipelineConfig& config);
void run_calibrate(const PipelineConfig& config);
void run_classify(const PipelineConfig& config);
void run_network(const PipelineConfig& config);
void run_stance(const PipelineConfig& config);
void run_topics(const PipelineConfig& config);
void run_cohort(const PipelineConfig& config);
void run_report(const PipelineConfig& config);

// synth (when no input archive is configured), then every stage in order.
void run_all(const PipelineConfig& config);

const std::vector<std::string>& subcommands();
void run(const std::string& subcommand, const PipelineConfig& config);

// Exit status for an exception escaping run(): 1 config, 2 missing artifact,
// 3 anything else.
int exit_code_for(const std::exception& e);

}  // namespace cyborg::pipeline
