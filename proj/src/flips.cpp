#include "cyborg/flips.hpp"

#include <algorithm>
#include <cmath>

#include "cyborg/error.hpp"

namespace cyborg::flips {

void ScoreSeries::validate() const {
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const double p = observations[i].probability;
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("series " + agent_id + ": probability out of [0,1]");
    if (i > 0 && !(observations[i - 1].day < observations[i].day))
      throw InvalidArgument("series " + agent_id + ": days must strictly increase");
  }
}

const char* to_string(FlipDirection d) { return d == FlipDirection::BotToHuman ? "BotToHuman" : "HumanToBot"; }

const char* to_string(AgentClass c) {
  switch (c) {
    case AgentClass::Bot:
      return "Bot";
    case AgentClass::Human:
      return "Human";
    case AgentClass::Cyborg:
      return "Cyborg";
  }
  return "Human";
}

std::optional<AgentClass> parse_agent_class(std::string_view text) {
  if (text == "Bot") return AgentClass::Bot;
  if (text == "Human") return AgentClass::Human;
  if (text == "Cyborg") return AgentClass::Cyborg;
  return std::nullopt;
}

void CyborgThresholds::validate() const {
  if (!(bot_threshold > 0.0 && bot_threshold < 1.0)) throw InvalidArgument("bot_threshold must be in (0,1)");
  if (!(min_mean_delta > 0.0 && min_mean_delta < 1.0)) throw InvalidArgument("min_mean_delta must be in (0,1)");
  if (min_flips < 1) throw InvalidArgument("min_flips must be >= 1");
}

std::vector<FlipEvent> detect_flips(const ScoreSeries& series, double bot_threshold) {
  series.validate();
  std::vector<FlipEvent> events;
  const auto& obs = series.observations;
  for (std::size_t i = 1; i < obs.size(); ++i) {
    const BotLabel before = scoring::classify_bot(obs[i - 1].probability, bot_threshold);
    const BotLabel after = scoring::classify_bot(obs[i].probability, bot_threshold);
    if (before == after) continue;
    events.push_back(FlipEvent{obs[i - 1].day, obs[i].day,
                               before == BotLabel::Bot ? FlipDirection::BotToHuman : FlipDirection::HumanToBot,
                               std::abs(obs[i].probability - obs[i - 1].probability)});
  }
  return events;
}

FlipStats flip_stats(const ScoreSeries& series, std::span<const FlipEvent> events) {
  FlipStats s;
  s.agent_id = series.agent_id;
  s.n_flips = static_cast<int>(events.size());
  double delta_sum = 0.0;
  for (const auto& e : events) {
    (e.direction == FlipDirection::BotToHuman ? s.n_bot_to_human : s.n_human_to_bot)++;
    delta_sum += e.abs_delta;
  }
  s.mean_abs_delta = events.empty() ? 0.0 : delta_sum / static_cast<double>(events.size());

  const auto& obs = series.observations;
  if (!obs.empty()) {
    // shifted by the first value so a constant series gives exactly 0
    const double shift = obs.front().probability;
    double mean = 0.0;
    for (const auto& o : obs) mean += o.probability - shift;
    mean /= static_cast<double>(obs.size());
    double ss = 0.0;
    for (const auto& o : obs) ss += (o.probability - shift - mean) * (o.probability - shift - mean);
    s.score_stddev = std::sqrt(ss / static_cast<double>(obs.size()));
  }
  return s;
}

std::vector<FlipCountRow> flip_count_distribution(std::span<const FlipStats> stats) {
  int max_flips = 0;
  std::size_t flippers = 0;
  for (const auto& s : stats) {
    if (s.n_flips < 1) continue;
    ++flippers;
    max_flips = std::max(max_flips, s.n_flips);
  }
  std::vector<FlipCountRow> rows;
  if (flippers == 0) return rows;
  std::vector<std::size_t> counts(static_cast<std::size_t>(max_flips) + 1, 0);
  for (const auto& s : stats)
    if (s.n_flips >= 1) ++counts[static_cast<std::size_t>(s.n_flips)];
  std::size_t running = 0;
  for (int n = 1; n <= max_flips; ++n) {
    running += counts[static_cast<std::size_t>(n)];
    rows.push_back({n, counts[static_cast<std::size_t>(n)],
                    static_cast<double>(running) / static_cast<double>(flippers)});
  }
  return rows;
}

std::size_t DeltaHistogram::modal_bin() const {
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

DeltaHistogram delta_distribution(std::span<const FlipStats> stats) {
  DeltaHistogram h;
  for (const auto& s : stats) {
    // The epsilon keeps exact bin edges such as 0.15 out of the bin below.
    auto bin = static_cast<long>(std::floor(s.mean_abs_delta / DeltaHistogram::kBinWidth + 1e-9));
    bin = std::clamp(bin, 0L, static_cast<long>(DeltaHistogram::kBins) - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
    ++h.total;
  }
  return h;
}

double percentile_threshold(std::vector<double> values, double percentile) {
  if (values.empty()) throw InvalidArgument("percentile_threshold: empty input");
  if (!(percentile > 0.0 && percentile < 100.0)) throw InvalidArgument("percentile must be in (0,100)");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

AgentClass classify_agent(const FlipStats& stats, const CyborgThresholds& thresholds,
                          std::span<const BotLabel> daily_labels) {
  if (stats.n_flips >= thresholds.min_flips && stats.mean_abs_delta >= thresholds.min_mean_delta)
    return AgentClass::Cyborg;
  const auto bots = std::count(daily_labels.begin(), daily_labels.end(), BotLabel::Bot);
  return 2 * static_cast<std::size_t>(bots) > daily_labels.size() ? AgentClass::Bot : AgentClass::Human;
}

Calibration calibrate(std::span<const FlipStats> stats, double percentile) {
  Calibration c;
  c.percentile = percentile;
  std::vector<FlipStats> flippers;
  std::vector<double> counts, deltas;
  for (const auto& s : stats) {
    if (s.n_flips < 1) continue;
    flippers.push_back(s);
    counts.push_back(static_cast<double>(s.n_flips));
    deltas.push_back(s.mean_abs_delta);
  }
  if (flippers.empty()) throw InvalidArgument("calibrate: empty population (no agent flips)");
  c.population = flippers.size();
  c.flip_table = flip_count_distribution(flippers);
  c.delta_histogram = delta_distribution(flippers);
  c.flip_count_percentile = percentile_threshold(counts, percentile);
  c.min_flips = static_cast<int>(c.flip_count_percentile) + 1;
  c.min_mean_delta = percentile_threshold(deltas, percentile);
  return c;
}

}  // namespace cyborg::flips
