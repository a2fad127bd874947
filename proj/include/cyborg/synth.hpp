#pragma once

// Labeled synthetic populations used as ground truth.
//
// Every agent gets a class, a flip count drawn from its class distribution,
// and a daily score series built so that the flips and their deltas are
// known exactly. Scores sit at least `score_margin` away from the bot
// threshold, and the Cyborg criterion is kept clear of its boundary by
// `delta_guard`, so the labels survive the rendering of scores into posts.
//
// Rendering inverts the reference logistic scorer: each day is drawn from a
// grid of posting patterns (post count, automation and retweet share,
// hashtags per post, regular or irregular spacing) and the spacing is
// bisected until the day's features score within `render_tolerance` of the
// target.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cyborg/flips.hpp"
#include "cyborg/ingest.hpp"
#include "cyborg/scoring.hpp"
#include "cyborg/timeutil.hpp"

namespace cyborg::synth {

using flips::AgentClass;

// Mixture of uniform pieces over per-agent mean flip deltas.
struct DeltaPiece {
  double weight = 1.0;
  double lo = 0.0;
  double hi = 0.0;
};
using DeltaDistribution = std::vector<DeltaPiece>;

struct ClassSpec {
  std::size_t n_agents = 0;
  std::vector<double> flip_pmf;  // index = number of flips
  DeltaDistribution delta;
  double suspension_rate = 0.0;
  double lifespan_mean_days = 3000.0;
  double lifespan_sd_days = 1200.0;
  double followers_log_mean = 7.0;  // lognormal parameters
  double followers_log_sd = 0.8;
  double friends_log_mean = 6.5;
  double friends_log_sd = 0.8;
  double verified_rate = 0.0;
  double stance_pro = 0.4;   // share of agents using pro seed tags
  double stance_anti = 0.4;  // share using anti seed tags; the rest use neither
};

struct PopulationSpec {
  std::array<ClassSpec, 3> classes;  // indexed by AgentClass
  int days = 30;
  Day start_day{};       // first calendar day of the window
  Day analysis_date{};   // reference date for lifespans
  double min_lifespan_days = 400.0;
  double bot_threshold = scoring::kDefaultBotThreshold;
  int min_flips = 3;
  double min_mean_delta = 0.10;
  double delta_guard = 0.005;
  double score_margin = 0.01;
  double bot_score_cap = 0.92;    // highest generated score
  double human_score_floor = 0.10;  // lowest generated score
  double mean_degree = 4.0;         // expected non-Cyborg partners
  double degree_inflation = 3.0;    // Cyborg edge-weight multiplier
  double render_tolerance = 0.002;
  std::vector<std::string> pro_tags;
  std::vector<std::string> anti_tags;
  std::vector<std::string> neutral_tags;
  std::uint64_t seed = 0;

  ClassSpec& of(AgentClass c) { return classes[static_cast<std::size_t>(c)]; }
  const ClassSpec& of(AgentClass c) const { return classes[static_cast<std::size_t>(c)]; }
  std::size_t total_agents() const;

  // Throws InvalidArgument naming the offending field.
  void validate() const;
};

// Cumulative flip shares over agents with at least one flip, for 1..4 flips.
struct FlipTable {
  std::array<double, 4> cumulative{};
};
FlipTable coronavirus_flip_table();
FlipTable elections_flip_table();

// Population whose flippers follow `table` (tail beyond 4 flips geometric,
// capped at days - 1), with the reference class shares, suspension rates and
// lifespans. n_agents is split 72% Human, 20% Bot, 8% Cyborg.
PopulationSpec spec_from_flip_table(std::size_t n_agents, const FlipTable& table, std::uint64_t seed);

// The 5000-agent fixture used by the end-to-end tests.
PopulationSpec fixture_spec(std::uint64_t seed);

// Largest-remainder split of n into parts proportional to weights.
std::vector<std::size_t> quota(std::size_t n, const std::vector<double>& weights);

struct GeneratedSeries {
  flips::ScoreSeries series;
  AgentClass cls = AgentClass::Human;
  int true_flips = 0;
  std::vector<double> true_deltas;  // per flip, in order
  double true_mean_delta = 0.0;
};

// Draws the flip count and target delta from the class spec.
GeneratedSeries gen_score_series(AgentClass cls, const PopulationSpec& spec, std::uint64_t agent_seed);

// Series with exactly `n_flips` flips whose mean delta is near
// `target_mean_delta`. Bot and Human series respect the majority rule and,
// at min_flips or more, stay below the Cyborg delta threshold; Cyborg series
// need n_flips >= min_flips. Throws InvalidArgument when the request cannot
// be met (n_flips > days - 1, or a majority that the flip count rules out).
GeneratedSeries gen_series_with_flips(AgentClass cls, int n_flips, double target_mean_delta,
                                      const PopulationSpec& spec, std::uint64_t agent_seed);

struct GroundTruth {
  std::string agent_id;
  AgentClass cls = AgentClass::Human;
  int true_flips = 0;
  double true_mean_delta = 0.0;
};

struct AgentPlan {
  std::string agent_id;
  GeneratedSeries generated;
  ingest::ProfileSnapshot profile;
  int stance = 0;  // +1 pro, -1 anti, 0 neither
};

// Classes, flip counts (largest-remainder quotas per class), score series,
// profiles and stances, without posts. Ordered by agent id.
std::vector<AgentPlan> plan_population(const PopulationSpec& spec, unsigned jobs = 1);

std::vector<GroundTruth> ground_truth(const std::vector<AgentPlan>& plan);

// Undirected partner lists (Chung-Lu sampling, Cyborg weights multiplied by
// degree_inflation). With mean_degree > 0 every agent gets a partner.
std::vector<std::vector<std::size_t>> gen_partners(const std::vector<AgentClass>& classes,
                                                   const PopulationSpec& spec);

struct Population {
  std::vector<AgentPlan> agents;
  std::vector<ingest::PostRecord> posts;  // ordered by (author, created_at, post_id)
  std::vector<GroundTruth> truth;
};

// Full population with posts. Every scored day renders within
// render_tolerance of its target under `scorer`; throws Error if some day
// cannot be rendered.
Population gen_population(const PopulationSpec& spec, unsigned jobs = 1,
                          const scoring::LogisticScorer& scorer = scoring::LogisticScorer::reference());

// Interaction-only posts: each sampled partner pair becomes one mention post
// by one endpoint. Agents without partners post nothing.
std::vector<ingest::PostRecord> gen_comm_posts(const PopulationSpec& spec);

// Agent classes in id order, as used by plan_population and gen_comm_posts.
std::vector<AgentClass> assign_classes(const PopulationSpec& spec);
std::string agent_id(std::size_t index);

// Renders one target score as a day of posts by `profile`'s owner.
struct DayRequest {
  std::string agent_id;
  Day day{};
  double target = 0.5;
  ingest::ProfileSnapshot profile;
  std::vector<std::string> retweet_targets;  // may be empty
  std::vector<std::string> mentions;         // spread over the day's posts
  std::vector<std::string> tags;             // tag pool to draw from
  std::uint64_t seed = 0;
};
std::vector<ingest::PostRecord> render_day(const DayRequest& request, const scoring::LogisticScorer& scorer,
                                           double tolerance = 0.002);

}  // namespace cyborg::synth
