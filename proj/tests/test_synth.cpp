#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cyborg/error.hpp"
#include "cyborg/network.hpp"
#include "cyborg/rng.hpp"
#include "cyborg/stats.hpp"
#include "cyborg/synth.hpp"

using namespace cyborg;
using namespace cyborg::synth;
using flips::AgentClass;

namespace {

std::vector<scoring::BotLabel> labels_of(const flips::ScoreSeries& s, double threshold) {
  std::vector<scoring::BotLabel> out;
  for (const auto& o : s.observations) out.push_back(scoring::classify_bot(o.probability, threshold));
  return out;
}

AgentClass reclassify(const GeneratedSeries& g, const PopulationSpec& spec) {
  const auto events = flips::detect_flips(g.series, spec.bot_threshold);
  const auto st = flips::flip_stats(g.series, events);
  flips::CyborgThresholds t;
  t.bot_threshold = spec.bot_threshold;
  t.min_flips = spec.min_flips;
  t.min_mean_delta = spec.min_mean_delta;
  return flips::classify_agent(st, t, labels_of(g.series, spec.bot_threshold));
}

}  // namespace

TEST_CASE("quota") {
  CHECK(quota(10, {1, 1}) == std::vector<std::size_t>{5, 5});
  CHECK(quota(10, {1, 2}) == std::vector<std::size_t>{3, 7});
  CHECK(quota(0, {1, 2}) == std::vector<std::size_t>{0, 0});
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> w(1 + rng.below(8));
    for (auto& x : w) x = rng.uniform();
    const std::size_t n = rng.below(100000);
    auto q = quota(n, w);
    CHECK(std::accumulate(q.begin(), q.end(), std::size_t{0}) == n);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (std::size_t k = 0; k < w.size(); ++k) CHECK(std::fabs(q[k] - n * w[k] / total) < 1.0);
  }
  CHECK_THROWS_AS(quota(5, {0, 0}), InvalidArgument);
}

TEST_CASE("spec validation names the field") {
  auto spec = fixture_spec(1);
  CHECK_NOTHROW(spec.validate());
  spec.days = 1;
  try {
    spec.validate();
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("'days'") != std::string::npos);
  }
  spec = fixture_spec(1);
  spec.of(AgentClass::Cyborg).flip_pmf = {0.5, 0.5};
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
  spec = fixture_spec(1);
  spec.of(AgentClass::Bot).flip_pmf.assign(40, 1.0 / 40);
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
}

TEST_CASE("requested flips") {
  const auto spec = fixture_spec(3);
  SUBCASE("zero flips stay on one side") {
    for (auto cls : {AgentClass::Bot, AgentClass::Human}) {
      auto g = gen_series_with_flips(cls, 0, 0.0, spec, 5);
      CHECK(g.true_flips == 0);
      auto labels = labels_of(g.series, spec.bot_threshold);
      CHECK(std::all_of(labels.begin(), labels.end(), [&](auto l) { return l == labels.front(); }));
      CHECK(reclassify(g, spec) == cls);
    }
  }
  SUBCASE("three large flips make a Cyborg") {
    auto g = gen_series_with_flips(AgentClass::Cyborg, 3, 0.2, spec, 9);
    auto events = flips::detect_flips(g.series, spec.bot_threshold);
    CHECK(events.size() == 3);
    for (std::size_t i = 0; i < events.size(); ++i) CHECK(std::fabs(events[i].abs_delta - g.true_deltas[i]) < 1e-12);
    CHECK(std::fabs(flips::flip_stats(g.series, events).mean_abs_delta - g.true_mean_delta) < 1e-12);
    CHECK(reclassify(g, spec) == AgentClass::Cyborg);
  }
  SUBCASE("saturated series alternate") {
    auto g = gen_series_with_flips(AgentClass::Cyborg, spec.days - 1, 0.2, spec, 2);
    auto labels = labels_of(g.series, spec.bot_threshold);
    REQUIRE(labels.size() == static_cast<std::size_t>(spec.days));
    for (std::size_t i = 1; i < labels.size(); ++i) CHECK(labels[i] != labels[i - 1]);
  }
  SUBCASE("infeasible requests") {
    CHECK_THROWS_AS(gen_series_with_flips(AgentClass::Human, spec.days, 0.05, spec, 1), InvalidArgument);
    CHECK_THROWS_AS(gen_series_with_flips(AgentClass::Cyborg, 2, 0.2, spec, 1), InvalidArgument);
  }
  SUBCASE("scores keep their distance from the threshold") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      auto g = gen_score_series(static_cast<AgentClass>(seed % 3), spec, seed);
      for (const auto& o : g.series.observations) {
        CHECK(std::fabs(o.probability - spec.bot_threshold) >= spec.score_margin - 1e-12);
        CHECK(o.probability <= spec.bot_score_cap + 1e-12);
        CHECK(o.probability >= spec.human_score_floor - 1e-12);
      }
    }
  }
}

TEST_CASE("property: generated series reproduce their ground truth") {
  const auto spec = fixture_spec(4);
  Rng rng(4);
  for (int i = 0; i < 3000; ++i) {
    const auto cls = static_cast<AgentClass>(rng.below(3));
    auto g = gen_score_series(cls, spec, rng.next());
    CHECK(g.cls == cls);
    CHECK(static_cast<int>(flips::detect_flips(g.series, spec.bot_threshold).size()) == g.true_flips);
    CHECK(reclassify(g, spec) == cls);
  }
}

TEST_CASE("elections-shaped population matches its flip table") {
  auto spec = spec_from_flip_table(50000, elections_flip_table(), 8);
  auto plan = plan_population(spec, 2);
  std::vector<flips::FlipStats> stats;
  for (const auto& a : plan) {
    auto st = flips::flip_stats(a.generated.series, flips::detect_flips(a.generated.series, spec.bot_threshold));
    CHECK(st.n_flips == a.generated.true_flips);
    stats.push_back(st);
  }
  auto table = flips::flip_count_distribution(stats);
  const double expect[4] = {44.39, 69.98, 78.64, 86.18};
  for (int k = 0; k < 4; ++k) CHECK(std::fabs(100 * table[k].cumulative - expect[k]) <= 0.5);
}

TEST_CASE("population without flips") {
  auto spec = spec_from_flip_table(1000, coronavirus_flip_table(), 2);
  spec.of(AgentClass::Human).n_agents += spec.of(AgentClass::Cyborg).n_agents;
  spec.of(AgentClass::Cyborg).n_agents = 0;
  for (auto c : {AgentClass::Bot, AgentClass::Human}) spec.of(c).flip_pmf = {1.0};
  auto plan = plan_population(spec);
  std::vector<flips::FlipStats> stats;
  for (const auto& a : plan)
    stats.push_back(flips::flip_stats(a.generated.series, flips::detect_flips(a.generated.series, 0.7)));
  std::vector<double> flip_counts;
  for (const auto& s : stats)
    if (s.n_flips >= 1) flip_counts.push_back(s.n_flips);
  try {
    flips::percentile_threshold(flip_counts, 75);
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("empty") != std::string::npos);
  }
}

TEST_CASE("rendered days score at their targets") {
  const auto& scorer = scoring::LogisticScorer::reference();
  Rng rng(6);
  for (int i = 0; i < 300; ++i) {
    DayRequest r;
    r.agent_id = "z1";
    r.day = *parse_day("2020-06-10");
    r.target = rng.uniform(0.1, 0.92);
    r.profile.account_created_at = *parse_timestamp("2014-01-01T00:00:00Z");
    r.profile.followers_count = static_cast<long long>(rng.below(20000));
    r.profile.friends_count = static_cast<long long>(rng.below(5000));
    r.profile.statuses_count = static_cast<long long>(rng.below(90000));
    r.retweet_targets = {"z2", "z3"};
    r.mentions = {"z4"};
    r.tags = {"a", "b", "c", "d"};
    r.seed = rng.next();
    auto posts = render_day(r, scorer, 0.002);
    REQUIRE(!posts.empty());
    ingest::DailyWindow w{r.agent_id, r.day, posts};
    for (const auto& p : posts) CHECK(day_of(p.created_at) == r.day);
    CHECK(std::fabs(scorer.probability(scoring::extract_features(w)) - r.target) <= 0.002);
  }
}

TEST_CASE("small population end to end") {
  auto spec = spec_from_flip_table(400, coronavirus_flip_table(), 12);
  auto a = gen_population(spec, 1);
  auto b = gen_population(spec, 3);
  REQUIRE(a.posts.size() == b.posts.size());
  for (std::size_t i = 0; i < a.posts.size(); ++i) CHECK(ingest::serialize_record(a.posts[i]) == ingest::serialize_record(b.posts[i]));
  CHECK(a.truth.size() == 400);

  const auto windows = ingest::window_by_day(a.posts);
  const auto scores = scoring::score_windows(windows, scoring::LogisticScorer::reference());
  std::map<std::string, flips::ScoreSeries> series;
  for (const auto& s : scores) {
    series[s.agent_id].agent_id = s.agent_id;
    series[s.agent_id].observations.push_back({s.day, s.probability});
  }
  std::size_t suspended = 0;
  for (const auto& plan : a.agents) {
    const auto& got = series.at(plan.agent_id).observations;
    const auto& want = plan.generated.series.observations;
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(got[k].day == want[k].day);
      CHECK(std::fabs(got[k].probability - want[k].probability) <= spec.render_tolerance);
    }
    suspended += plan.profile.is_suspended.value_or(false);
  }
  for (const auto& t : a.truth) {
    GeneratedSeries g;
    g.series = series.at(t.agent_id);
    CHECK(reclassify(g, spec) == t.cls);
  }
  CHECK(suspended > 0);
}

TEST_CASE("communication posts inflate Cyborg degree") {
  auto degrees = [](const PopulationSpec& spec) {
    auto g = network::build_comm_graph(gen_comm_posts(spec));
    auto classes = assign_classes(spec);
    std::vector<double> cy, other;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      auto idx = g.index_of(agent_id(i));
      const double d = idx ? static_cast<double>(g.neighbors(*idx).size()) : 0.0;
      (classes[i] == AgentClass::Cyborg ? cy : other).push_back(d);
    }
    return std::pair{cy, other};
  };
  SUBCASE("inflation 3") {
    auto spec = spec_from_flip_table(10000, coronavirus_flip_table(), 5);
    auto [cy, other] = degrees(spec);
    const double ratio = stats::mean(cy) / stats::mean(other);
    CHECK(std::fabs(ratio - 3.0) <= 0.3);
    auto g = network::build_comm_graph(gen_comm_posts(spec));
    std::map<std::string, AgentClass> classes;
    auto cls = assign_classes(spec);
    for (std::size_t i = 0; i < cls.size(); ++i) classes[agent_id(i)] = cls[i];
    auto rows = network::compare_groups({{"degree", network::to_map(g, network::total_degree(g))}}, classes);
    CHECK(rows[0].higher == "Cyborg");
    CHECK(rows[0].p < 0.001);
  }
  SUBCASE("inflation 1") {
    auto spec = spec_from_flip_table(10000, coronavirus_flip_table(), 5);
    spec.degree_inflation = 1.0;
    auto [cy, other] = degrees(spec);
    CHECK(stats::welch_t_test(cy, other).p > 0.01);
  }
  SUBCASE("no interactions") {
    auto spec = spec_from_flip_table(1000, coronavirus_flip_table(), 5);
    spec.mean_degree = 0.0;
    CHECK(gen_comm_posts(spec).empty());
    CHECK(network::build_comm_graph(gen_comm_posts(spec)).node_count() == 0);
  }
}

TEST_CASE("determinism of plans") {
  auto spec = spec_from_flip_table(2000, coronavirus_flip_table(), 77);
  auto a = plan_population(spec, 1);
  auto b = plan_population(spec, 4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].agent_id == b[i].agent_id);
    CHECK(a[i].generated.true_flips == b[i].generated.true_flips);
    CHECK(a[i].generated.true_mean_delta == b[i].generated.true_mean_delta);
    CHECK(a[i].profile.account_created_at == b[i].profile.account_created_at);
  }
  auto other = plan_population(spec_from_flip_table(2000, coronavirus_flip_table(), 78), 1);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || a[i].generated.true_flips != other[i].generated.true_flips;
  CHECK(differs);
}
