#pragma once

// Flip tracing and Cyborg classification.
//
// A flip is a change of the daily Bot/Human label between two consecutive
// observed days of one agent. An agent is a Cyborg when it flips at least
// `min_flips` times and the mean absolute score change across its flips is
// at least `min_mean_delta`.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cyborg/scoring.hpp"
#include "cyborg/timeutil.hpp"

namespace cyborg::flips {

using scoring::BotLabel;

struct Observation {
  Day day{};
  double probability = 0.0;
};

struct ScoreSeries {
  std::string agent_id;
  std::vector<Observation> observations;

  // Throws InvalidArgument unless days strictly increase and every
  // probability lies in [0, 1].
  void validate() const;
};

enum class FlipDirection { BotToHuman, HumanToBot };
const char* to_string(FlipDirection d);

struct FlipEvent {
  Day from_day{};
  Day to_day{};
  FlipDirection direction = FlipDirection::BotToHuman;
  double abs_delta = 0.0;
};

struct FlipStats {
  std::string agent_id;
  int n_flips = 0;
  int n_bot_to_human = 0;
  int n_human_to_bot = 0;
  double mean_abs_delta = 0.0;  // 0 when there are no flips
  double score_stddev = 0.0;    // population standard deviation

  bool operator==(const FlipStats&) const = default;
};

enum class AgentClass { Bot, Human, Cyborg };
const char* to_string(AgentClass c);
std::optional<AgentClass> parse_agent_class(std::string_view text);

struct CyborgThresholds {
  double bot_threshold = scoring::kDefaultBotThreshold;
  int min_flips = 3;
  double min_mean_delta = 0.10;

  // bot_threshold and min_mean_delta in (0,1), min_flips >= 1.
  void validate() const;
};

// One event per adjacent pair of observations whose labels differ, ordered by
// from_day. Adjacency is over observed days, so calendar gaps are skipped.
std::vector<FlipEvent> detect_flips(const ScoreSeries& series, double bot_threshold);

FlipStats flip_stats(const ScoreSeries& series, std::span<const FlipEvent> events);

// Cumulative flip-count table over agents with at least one flip.
struct FlipCountRow {
  int n_flips = 0;
  std::size_t count = 0;     // agents with exactly n_flips
  double cumulative = 0.0;   // fraction with 1 <= flips <= n_flips
};
std::vector<FlipCountRow> flip_count_distribution(std::span<const FlipStats> stats);

struct DeltaHistogram {
  static constexpr double kBinWidth = 0.05;
  static constexpr std::size_t kBins = 20;  // [0,0.05), ..., [0.95,1.0]
  std::vector<std::size_t> counts = std::vector<std::size_t>(kBins, 0);
  std::size_t total = 0;

  static double lower(std::size_t bin) { return static_cast<double>(bin) * kBinWidth; }
  std::size_t modal_bin() const;  // first bin with the highest count
};

// Histogram of mean_abs_delta over every entry of `stats` (callers filter the
// population).
DeltaHistogram delta_distribution(std::span<const FlipStats> stats);

// Nearest-rank percentile: the element at 1-based rank ceil(p/100 * n) of the
// sorted values. Throws InvalidArgument on empty input ("empty") or p outside
// (0, 100).
double percentile_threshold(std::vector<double> values, double percentile = 75.0);

// Cyborg iff n_flips >= min_flips and mean_abs_delta >= min_mean_delta;
// otherwise Bot if strictly more than half of the daily labels are Bot,
// else Human.
AgentClass classify_agent(const FlipStats& stats, const CyborgThresholds& thresholds,
                          std::span<const BotLabel> daily_labels);

struct Calibration {
  double percentile = 75.0;
  std::size_t population = 0;  // agents with at least one flip
  std::vector<FlipCountRow> flip_table;
  DeltaHistogram delta_histogram;
  double flip_count_percentile = 0.0;  // nearest-rank percentile of flip counts
  int min_flips = 0;                   // first flip count above that percentile
  double min_mean_delta = 0.0;         // nearest-rank percentile of mean deltas
};

// Calibrates both thresholds over the agents with at least one flip.
// min_flips is the smallest n such that the share of agents with >= n flips
// is at most (100 - percentile)%, which for integer counts is the
// nearest-rank percentile plus one. Throws InvalidArgument("empty") when no
// agent flips.
Calibration calibrate(std::span<const FlipStats> stats, double percentile = 75.0);

}  // namespace cyborg::flips
