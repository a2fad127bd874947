#include "cyborg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "cyborg/error.hpp"
#include "cyborg/rng.hpp"

namespace cyborg::synth {
namespace {

constexpr int kDaySeconds = 86400;

// Stream ids for derive_seed.
enum Stream : std::uint64_t {
  kClassStream = 1,
  kFlipStream = 2,
  kSuspensionStream = 3,
  kGraphStream = 4,
  kEdgeOwnerStream = 5,
  kCommStream = 6,
  kAgentStreamBase = 1000,
};

std::size_t class_index(AgentClass c) { return static_cast<std::size_t>(c); }

constexpr std::array<AgentClass, 3> kClasses{AgentClass::Bot, AgentClass::Human, AgentClass::Cyborg};

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw InvalidArgument("synth spec field '" + field + "': " + what);
}

bool valid_pmf(const std::vector<double>& pmf) {
  double total = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0)) return false;
    total += p;
  }
  return std::abs(total - 1.0) < 1e-9;
}

// Draw from the mixture restricted to [lo, hi]; each piece keeps the weight
// of its overlap.
double draw_delta(const DeltaDistribution& dist, Rng& rng, double lo, double hi) {
  std::vector<double> weights;
  std::vector<std::pair<double, double>> spans;
  for (const auto& piece : dist) {
    const double a = std::max(piece.lo, lo), b = std::min(piece.hi, hi);
    const double width = piece.hi - piece.lo;
    if (b < a || piece.weight <= 0.0) {
      weights.push_back(0.0);
    } else {
      weights.push_back(width > 0.0 ? piece.weight * (b - a) / width : piece.weight);
    }
    spans.emplace_back(a, b);
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) return std::clamp((lo + hi) / 2.0, lo, hi);
  const auto& [a, b] = spans[rng.categorical(weights)];
  return rng.uniform(a, b);
}

double cyborg_floor(const PopulationSpec& s) { return s.min_mean_delta + s.delta_guard + 1e-6; }
double non_cyborg_ceiling(const PopulationSpec& s) { return s.min_mean_delta - s.delta_guard - 1e-6; }
double max_delta(const PopulationSpec& s) {
  return (s.bot_score_cap - s.bot_threshold) + (s.bot_threshold - s.human_score_floor);
}

}  // namespace

std::size_t PopulationSpec::total_agents() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += c.n_agents;
  return n;
}

void PopulationSpec::validate() const {
  require(days >= 2, "days", "must be >= 2");
  require(bot_threshold > 0.0 && bot_threshold < 1.0, "bot_threshold", "must be in (0, 1)");
  require(min_flips >= 1, "min_flips", "must be >= 1");
  require(min_mean_delta > 0.0 && min_mean_delta < 1.0, "min_mean_delta", "must be in (0, 1)");
  require(score_margin > 0.0, "score_margin", "must be > 0");
  require(delta_guard > 2.0 * render_tolerance, "delta_guard", "must exceed twice render_tolerance");
  require(render_tolerance > 0.0 && render_tolerance < score_margin, "render_tolerance",
          "must be in (0, score_margin)");
  require(bot_score_cap < 1.0 && bot_score_cap - bot_threshold >= 2.0 * score_margin, "bot_score_cap",
          "must leave room above the threshold");
  require(human_score_floor > 0.0 && bot_threshold - human_score_floor >= 2.0 * score_margin, "human_score_floor",
          "must leave room below the threshold");
  require(min_mean_delta - delta_guard >= 2.0 * score_margin, "delta_guard",
          "leaves no feasible non-Cyborg delta");
  require(min_mean_delta + delta_guard <= max_delta(*this), "min_mean_delta", "exceeds the feasible score range");
  require(mean_degree >= 0.0, "mean_degree", "must be >= 0");
  require(degree_inflation > 0.0, "degree_inflation", "must be > 0");
  require(min_lifespan_days >= 0.0, "min_lifespan_days", "must be >= 0");
  require(analysis_date - std::chrono::days{static_cast<int>(std::ceil(min_lifespan_days))} <= start_day, "analysis_date",
          "minimum lifespan would put account creation after the first post");
  for (AgentClass c : kClasses) {
    const std::string name = std::string("classes.") + flips::to_string(c);
    const ClassSpec& cs = of(c);
    if (cs.n_agents == 0) continue;
    require(valid_pmf(cs.flip_pmf), name + ".flip_pmf", "must be a probability distribution");
    require(cs.flip_pmf.size() <= static_cast<std::size_t>(days), name + ".flip_pmf",
            "allows more flips than day pairs");
    if (c == AgentClass::Cyborg)
      for (int k = 0; k < min_flips && k < static_cast<int>(cs.flip_pmf.size()); ++k)
        require(cs.flip_pmf[k] == 0.0, name + ".flip_pmf", "Cyborgs need at least min_flips flips");
    require(!cs.delta.empty(), name + ".delta", "must have at least one piece");
    for (const auto& p : cs.delta)
      require(p.weight >= 0.0 && p.lo >= 0.0 && p.hi >= p.lo && p.hi <= 1.0, name + ".delta", "invalid piece");
    require(cs.suspension_rate >= 0.0 && cs.suspension_rate <= 1.0, name + ".suspension_rate", "must be in [0, 1]");
    require(cs.verified_rate >= 0.0 && cs.verified_rate <= 1.0, name + ".verified_rate", "must be in [0, 1]");
    require(cs.lifespan_mean_days > min_lifespan_days && cs.lifespan_sd_days > 0.0, name + ".lifespan",
            "mean must exceed min_lifespan_days and sd must be > 0");
    require(cs.stance_pro >= 0.0 && cs.stance_anti >= 0.0 && cs.stance_pro + cs.stance_anti <= 1.0,
            name + ".stance", "shares must be nonnegative and sum to <= 1");
    require(cs.followers_log_sd >= 0.0 && cs.friends_log_sd >= 0.0, name + ".log_sd", "must be >= 0");
  }
}

FlipTable coronavirus_flip_table() { return {{0.4968, 0.7576, 0.8414, 0.9056}}; }
FlipTable elections_flip_table() { return {{0.4439, 0.6998, 0.7864, 0.8618}}; }

std::vector<std::size_t> quota(std::size_t n, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  std::vector<std::size_t> out(weights.size(), 0);
  if (n == 0 || weights.empty()) return out;
  if (!(total > 0.0)) throw InvalidArgument("quota: weights sum to zero");
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t given = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(n) * weights[i] / total;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    given += out[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; given < n; ++r, ++given) ++out[remainders[r % remainders.size()].second];
  return out;
}

PopulationSpec spec_from_flip_table(std::size_t n_agents, const FlipTable& table, std::uint64_t seed) {
  PopulationSpec s;
  s.seed = seed;
  s.start_day = std::chrono::sys_days{std::chrono::year{2020} / std::chrono::June / 1};
  s.analysis_date = std::chrono::sys_days{std::chrono::year{2021} / std::chrono::June / 30};

  // Shares of the whole population.
  constexpr double kCyborgShare = 0.08, kBotShare = 0.20, kFlipperShare = 0.5;
  const std::size_t n_cyborg = static_cast<std::size_t>(std::llround(kCyborgShare * static_cast<double>(n_agents)));
  const std::size_t n_bot = static_cast<std::size_t>(std::llround(kBotShare * static_cast<double>(n_agents)));
  const std::size_t n_human = n_agents - n_cyborg - n_bot;

  // Exact flip shares among flippers: 1..4 from the table, a geometric tail
  // from 5 up to days - 1.
  const int max_k = s.days - 1;
  std::vector<double> p(static_cast<std::size_t>(max_k) + 1, 0.0);
  double prev = 0.0;
  for (int k = 1; k <= 4; ++k) {
    p[k] = table.cumulative[k - 1] - prev;
    prev = table.cumulative[k - 1];
  }
  constexpr double kTailRatio = 0.7;
  double tail_norm = 0.0;
  for (int k = 5; k <= max_k; ++k) tail_norm += std::pow(kTailRatio, k - 5);
  for (int k = 5; k <= max_k; ++k) p[k] = (1.0 - prev) * std::pow(kTailRatio, k - 5) / tail_norm;
  double s3 = 0.0;
  for (int k = 3; k <= max_k; ++k) s3 += p[k];

  // Cyborgs take the >= 3 tail shape; non-Cyborgs take what is left so the
  // mixture matches the table.
  const double flippers = kFlipperShare, cyborgs = kCyborgShare, non_cyborgs = 1.0 - kCyborgShare;
  if (flippers * s3 < cyborgs) throw InvalidArgument("spec_from_flip_table: flip table leaves too few agents with >= 3 flips");
  std::vector<double> cyborg_pmf(p.size(), 0.0), other_pmf(p.size(), 0.0);
  double other_flip = 0.0;
  for (int k = 1; k <= max_k; ++k) {
    if (k >= 3) {
      cyborg_pmf[k] = p[k] / s3;
      other_pmf[k] = p[k] * (flippers - cyborgs / s3) / non_cyborgs;
    } else {
      other_pmf[k] = flippers * p[k] / non_cyborgs;
    }
    other_flip += other_pmf[k];
  }
  other_pmf[0] = 1.0 - other_flip;

  const DeltaDistribution cyborg_delta{{0.50, 0.105, 0.20}, {0.35, 0.20, 0.35}, {0.15, 0.35, 0.60}};
  const DeltaDistribution other_delta{{0.25, 0.02, 0.05}, {0.63, 0.05, 0.095}, {0.12, 0.105, 0.35}};

  ClassSpec& bot = s.of(AgentClass::Bot);
  bot.n_agents = n_bot;
  bot.flip_pmf = other_pmf;
  bot.delta = other_delta;
  bot.suspension_rate = 0.892;
  bot.lifespan_mean_days = 2751;
  bot.lifespan_sd_days = 1226;
  bot.followers_log_mean = 6.4;
  bot.friends_log_mean = 6.2;

  ClassSpec& human = s.of(AgentClass::Human);
  human.n_agents = n_human;
  human.flip_pmf = other_pmf;
  human.delta = other_delta;
  human.suspension_rate = 0.195;
  human.lifespan_mean_days = 2901;
  human.lifespan_sd_days = 1294;
  human.followers_log_mean = 6.8;
  human.friends_log_mean = 6.3;
  human.verified_rate = 0.06;

  ClassSpec& cyborg = s.of(AgentClass::Cyborg);
  cyborg.n_agents = n_cyborg;
  cyborg.flip_pmf = cyborg_pmf;
  cyborg.delta = cyborg_delta;
  cyborg.suspension_rate = 0.560;
  cyborg.lifespan_mean_days = 3663;
  cyborg.lifespan_sd_days = 1141;
  cyborg.followers_log_mean = 7.6;
  cyborg.friends_log_mean = 7.2;

  s.pro_tags = {"vaccineswork", "getthevaccine", "vaccinessavelives", "vaccinesaresafe", "igotvaccinated"};
  s.anti_tags = {"novaccine", "vaccineskill", "saynotovaccines", "vaccinedeath", "novaccineforme"};
  s.neutral_tags = {"covid19", "coronavirus", "vaccine", "pandemic", "lockdown", "health"};
  return s;
}

PopulationSpec fixture_spec(std::uint64_t seed) { return spec_from_flip_table(5000, coronavirus_flip_table(), seed); }

std::string agent_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "a%06zu", index);
  return buf;
}

std::vector<AgentClass> assign_classes(const PopulationSpec& spec) {
  std::vector<AgentClass> out;
  out.reserve(spec.total_agents());
  for (AgentClass c : kClasses) out.insert(out.end(), spec.of(c).n_agents, c);
  Rng rng(derive_seed(spec.seed, kClassStream));
  rng.shuffle(out);
  return out;
}

namespace {

struct LabelPlan {
  std::vector<int> day_offsets;  // observed days, increasing
  std::vector<bool> bot;         // label per observation
};

LabelPlan plan_labels(AgentClass cls, int k, const PopulationSpec& spec, Rng& rng) {
  const int days = spec.days;
  for (int attempt = 0; attempt < 400; ++attempt) {
    int m;
    if (attempt < 100)
      m = std::min(days, std::max(2, k + 1) + static_cast<int>(rng.below(12)));
    else
      m = std::max(2, k + 1) + static_cast<int>(rng.below(static_cast<std::size_t>(days - std::max(2, k + 1) + 1)));
    std::vector<int> gaps(static_cast<std::size_t>(m - 1));
    std::iota(gaps.begin(), gaps.end(), 0);
    std::vector<bool> change(static_cast<std::size_t>(m - 1), false);
    for (int i = 0; i < k; ++i) {
      const std::size_t j = static_cast<std::size_t>(i) + rng.below(gaps.size() - static_cast<std::size_t>(i));
      std::swap(gaps[static_cast<std::size_t>(i)], gaps[j]);
      change[static_cast<std::size_t>(gaps[static_cast<std::size_t>(i)])] = true;
    }
    std::vector<bool> bot(static_cast<std::size_t>(m));
    bot[0] = rng.bernoulli(0.5);
    for (int i = 1; i < m; ++i) bot[i] = change[i - 1] ? !bot[i - 1] : bot[i - 1];
    const auto n_bot = static_cast<int>(std::count(bot.begin(), bot.end(), true));
    auto fits = [&](int b) {
      if (cls == AgentClass::Bot) return 2 * b > m;
      if (cls == AgentClass::Human) return 2 * b <= m;
      return true;
    };
    if (!fits(n_bot)) {
      if (!fits(m - n_bot)) continue;
      bot.flip();
    }
    // Observed days: a random m-subset of the window.
    std::vector<int> all(static_cast<std::size_t>(days));
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < m; ++i)
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(i) + rng.below(all.size() - i)]);
    std::vector<int> offsets(all.begin(), all.begin() + m);
    std::sort(offsets.begin(), offsets.end());
    return {std::move(offsets), std::move(bot)};
  }
  throw InvalidArgument(std::string("infeasible series: ") + flips::to_string(cls) + " with " + std::to_string(k) +
                        " flips over " + std::to_string(days) + " days");
}

}  // namespace

GeneratedSeries gen_series_with_flips(AgentClass cls, int n_flips, double target_mean_delta,
                                      const PopulationSpec& spec, std::uint64_t agent_seed) {
  if (n_flips < 0 || n_flips > spec.days - 1)
    throw InvalidArgument("infeasible series: " + std::to_string(n_flips) + " flips need more than " +
                          std::to_string(spec.days) + " days");
  if (cls == AgentClass::Cyborg && n_flips < spec.min_flips)
    throw InvalidArgument("infeasible series: a Cyborg needs at least " + std::to_string(spec.min_flips) + " flips");

  Rng rng(agent_seed);
  double target = target_mean_delta;
  const double lo = 2.0 * spec.score_margin;
  if (cls == AgentClass::Cyborg)
    target = std::clamp(target, cyborg_floor(spec), max_delta(spec));
  else if (n_flips >= spec.min_flips)
    target = std::clamp(target, lo, non_cyborg_ceiling(spec));
  else
    target = std::clamp(target, lo, max_delta(spec));

  const LabelPlan plan = plan_labels(cls, n_flips, spec, rng);
  const std::size_t m = plan.bot.size();
  const double thr = spec.bot_threshold;
  const double bot_room = spec.bot_score_cap - thr, human_room = thr - spec.human_score_floor;
  auto side_cap = [&](std::size_t j) { return plan.bot[j] ? bot_room : human_room; };

  // Distance from the threshold per observation.
  std::vector<double> dist(m);
  std::vector<int> touches(m, 0);  // flips each observation takes part in
  for (std::size_t j = 0; j + 1 < m; ++j)
    if (plan.bot[j] != plan.bot[j + 1]) {
      ++touches[j];
      ++touches[j + 1];
    }
  for (std::size_t j = 0; j < m; ++j) {
    if (plan.bot[j])
      dist[j] = rng.uniform(3.0 * spec.score_margin, bot_room);
    else
      dist[j] = rng.uniform(std::min(0.05, human_room), human_room);
  }

  if (n_flips > 0) {
    const double bot_base = std::min(target / 2.0, bot_room);
    const double human_base = target - bot_base;
    auto clip = [&](std::size_t j, double v) { return std::clamp(v, spec.score_margin, side_cap(j)); };
    std::vector<double> endpoint(m, 0.0);
    for (std::size_t j = 0; j < m; ++j)
      if (touches[j] > 0) endpoint[j] = clip(j, (plan.bot[j] ? bot_base : human_base) * std::exp(0.3 * rng.normal()));
    const double wanted = target * n_flips;
    for (int round = 0; round < 6; ++round) {
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) sum += touches[j] * endpoint[j];
      if (std::abs(sum - wanted) < 1e-12 * wanted) break;
      const double factor = wanted / sum;
      for (std::size_t j = 0; j < m; ++j)
        if (touches[j] > 0) endpoint[j] = clip(j, endpoint[j] * factor);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) sum += touches[j] * endpoint[j];
    const double mean = sum / n_flips;
    const bool ok = cls == AgentClass::Cyborg        ? mean >= cyborg_floor(spec)
                    : n_flips >= spec.min_flips ? mean <= non_cyborg_ceiling(spec)
                                                 : true;
    // The flat assignment hits the target for every flip exactly.
    for (std::size_t j = 0; j < m; ++j)
      if (touches[j] > 0) dist[j] = ok ? endpoint[j] : (plan.bot[j] ? bot_base : human_base);
  }

  GeneratedSeries g;
  g.cls = cls;
  g.series.observations.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double score = plan.bot[j] ? thr + dist[j] : thr - dist[j];
    g.series.observations.push_back({spec.start_day + std::chrono::days{plan.day_offsets[j]}, score});
  }
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j)
    if (plan.bot[j] != plan.bot[j + 1]) {
      const double d = std::abs(g.series.observations[j + 1].probability - g.series.observations[j].probability);
      g.true_deltas.push_back(d);
      sum += d;
    }
  g.true_flips = static_cast<int>(g.true_deltas.size());
  g.true_mean_delta = g.true_deltas.empty() ? 0.0 : sum / static_cast<double>(g.true_deltas.size());
  if (g.true_flips != n_flips) throw Error("series generator produced the wrong number of flips");
  return g;
}

GeneratedSeries gen_score_series(AgentClass cls, const PopulationSpec& spec, std::uint64_t agent_seed) {
  const ClassSpec& cs = spec.of(cls);
  if (!valid_pmf(cs.flip_pmf)) throw InvalidArgument("gen_score_series: class flip_pmf is not a distribution");
  Rng rng(agent_seed);
  const int k = static_cast<int>(rng.categorical(cs.flip_pmf));
  double hi = max_delta(spec);
  double lo = 0.0;
  if (cls == AgentClass::Cyborg)
    lo = cyborg_floor(spec);
  else if (k >= spec.min_flips)
    hi = non_cyborg_ceiling(spec);
  const double target = k > 0 ? draw_delta(cs.delta, rng, lo, hi) : 0.0;
  return gen_series_with_flips(cls, k, target, spec, rng.next());
}

namespace {

template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& body) {
  jobs = std::max(1u, jobs);
  if (jobs == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j)
      pool.emplace_back([&, j] {
        try {
          for (std::size_t i = next++; i < n; i = next++) body(i);
        } catch (...) {
          errors[j] = std::current_exception();
          next = n;
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

ingest::ProfileSnapshot gen_profile(const ClassSpec& cs, const PopulationSpec& spec, Rng& rng) {
  ingest::ProfileSnapshot p;
  p.followers_count = std::llround(rng.lognormal(cs.followers_log_mean, cs.followers_log_sd));
  p.friends_count = std::llround(rng.lognormal(cs.friends_log_mean, cs.friends_log_sd));
  p.statuses_count = std::llround(rng.lognormal(8.5, 0.8));
  p.is_verified = rng.bernoulli(cs.verified_rate);
  const double excess_mean = cs.lifespan_mean_days - spec.min_lifespan_days;
  const double shape = (excess_mean / cs.lifespan_sd_days) * (excess_mean / cs.lifespan_sd_days);
  const double scale = cs.lifespan_sd_days * cs.lifespan_sd_days / excess_mean;
  const auto lifespan = static_cast<long long>(std::ceil(spec.min_lifespan_days)) +
                        static_cast<long long>(std::floor(rng.gamma(shape, scale)));
  const auto second_of_day = static_cast<long long>(rng.below(kDaySeconds));
  p.account_created_at = Timestamp{spec.analysis_date} - std::chrono::seconds{lifespan * kDaySeconds + second_of_day};
  return p;
}

}  // namespace

std::vector<AgentPlan> plan_population(const PopulationSpec& spec, unsigned jobs) {
  spec.validate();
  const std::vector<AgentClass> classes = assign_classes(spec);
  const std::size_t n = classes.size();

  // Flip counts and suspensions: exact quotas per class, shuffled over members.
  std::vector<int> flips_of(n, 0);
  std::vector<bool> suspended(n, false);
  for (AgentClass c : kClasses) {
    const ClassSpec& cs = spec.of(c);
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (classes[i] == c) members.push_back(i);
    if (members.empty()) continue;
    std::vector<int> ks;
    const auto counts = quota(members.size(), cs.flip_pmf);
    for (std::size_t k = 0; k < counts.size(); ++k) ks.insert(ks.end(), counts[k], static_cast<int>(k));
    Rng flip_rng(derive_seed(spec.seed, kFlipStream * 16 + class_index(c)));
    flip_rng.shuffle(ks);
    const auto n_susp = quota(members.size(), {cs.suspension_rate, 1.0 - cs.suspension_rate})[0];
    std::vector<bool> susp(members.size(), false);
    std::fill(susp.begin(), susp.begin() + static_cast<std::ptrdiff_t>(n_susp), true);
    Rng susp_rng(derive_seed(spec.seed, kSuspensionStream * 16 + class_index(c)));
    susp_rng.shuffle(susp);
    for (std::size_t j = 0; j < members.size(); ++j) {
      flips_of[members[j]] = ks[j];
      suspended[members[j]] = susp[j];
    }
  }

  std::vector<AgentPlan> plan(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const AgentClass c = classes[i];
    const ClassSpec& cs = spec.of(c);
    Rng rng(derive_seed(spec.seed, kAgentStreamBase + 2 * i));
    AgentPlan& a = plan[i];
    a.agent_id = agent_id(i);
    const int k = flips_of[i];
    double lo = 0.0, hi = max_delta(spec);
    if (c == AgentClass::Cyborg)
      lo = cyborg_floor(spec);
    else if (k >= spec.min_flips)
      hi = non_cyborg_ceiling(spec);
    const double target = k > 0 ? draw_delta(cs.delta, rng, lo, hi) : 0.0;
    a.generated = gen_series_with_flips(c, k, target, spec, rng.next());
    a.generated.series.agent_id = a.agent_id;
    a.profile = gen_profile(cs, spec, rng);
    a.profile.is_suspended = suspended[i];
    const double u = rng.uniform();
    a.stance = u < cs.stance_pro ? 1 : u < cs.stance_pro + cs.stance_anti ? -1 : 0;
  });
  return plan;
}

std::vector<GroundTruth> ground_truth(const std::vector<AgentPlan>& plan) {
  std::vector<GroundTruth> out;
  out.reserve(plan.size());
  for (const auto& a : plan)
    out.push_back({a.agent_id, a.generated.cls, a.generated.true_flips, a.generated.true_mean_delta});
  return out;
}

std::vector<std::vector<std::size_t>> gen_partners(const std::vector<AgentClass>& classes, const PopulationSpec& spec) {
  const std::size_t n = classes.size();
  std::vector<std::vector<std::size_t>> partners(n);
  if (n < 2 || spec.mean_degree <= 0.0) return partners;
  std::vector<double> cumulative(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += classes[i] == AgentClass::Cyborg ? spec.degree_inflation : 1.0;
    cumulative[i] = total;
  }
  Rng rng(derive_seed(spec.seed, kGraphStream));
  auto pick = [&] {
    const double u = rng.uniform() * total;
    const auto i = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    return std::min(i, n - 1);
  };
  // Expected degree of a weight-1 node is 2E / total.
  const auto max_edges = n * (n - 1) / 2;
  const auto wanted =
      std::min<std::size_t>(max_edges, static_cast<std::size_t>(std::llround(spec.mean_degree * total / 2.0)));
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t tries = 0; edges.size() < wanted && tries < 20 * wanted + 100; ++tries) {
    std::size_t a = pick(), b = pick();
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    edges.emplace(a, b);
  }
  std::vector<bool> touched(n, false);
  for (const auto& [a, b] : edges) touched[a] = touched[b] = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (touched[i]) continue;
    std::size_t j = pick();
    while (j == i) j = pick();
    edges.emplace(std::min(i, j), std::max(i, j));
    touched[i] = touched[j] = true;
  }
  for (const auto& [a, b] : edges) {
    partners[a].push_back(b);
    partners[b].push_back(a);
  }
  for (auto& p : partners) std::sort(p.begin(), p.end());
  return partners;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

struct DayTemplate {
  int n = 2;
  int n_auto = 0;
  int n_retweet = 0;
  int tags_per_post = 0;
  std::vector<int> gap_weights;  // n - 1 entries
  int weight_sum = 0;
  double logit_high = 0.0;     // day part at unit gap 1
  double logit_low = 0.0;      // day part at the widest spacing
  double logit_typical = 0.0;  // day part at ~30 minute gaps
};

const std::vector<int>& irregular_pattern() {
  static const std::vector<int> p{1, 4, 2, 7, 1, 3, 9, 2, 5, 1, 6, 2, 8, 1, 3};
  return p;
}

scoring::FeatureVector day_features(const DayTemplate& t, long long unit) {
  scoring::FeatureVector f;
  f.posts_today = t.n;
  std::vector<double> gaps;
  gaps.reserve(t.gap_weights.size());
  for (int w : t.gap_weights) gaps.push_back(static_cast<double>(w * unit));
  double mean = 0.0;
  for (double g : gaps) mean += g;
  mean /= static_cast<double>(gaps.size());
  double var = 0.0;
  for (double g : gaps) var += (g - mean) * (g - mean);
  var /= static_cast<double>(gaps.size());
  f.mean_interpost_gap_seconds = mean;
  f.gap_coefficient_of_variation = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
  f.distinct_sources = (t.n_auto > 0 && t.n_auto < t.n) ? 2.0 : 1.0;
  f.automation_source_fraction = static_cast<double>(t.n_auto) / t.n;
  f.retweet_fraction = static_cast<double>(t.n_retweet) / t.n;
  f.hashtags_per_post = static_cast<double>(t.tags_per_post);
  return f;
}

scoring::FeatureVector profile_features(const ingest::ProfileSnapshot& p, Timestamp first_post) {
  scoring::FeatureVector f;
  f.account_age_days = std::max(0.0, static_cast<double>((first_post - p.account_created_at).count()) / kDaySeconds);
  f.followers = static_cast<double>(p.followers_count);
  f.friends = static_cast<double>(p.friends_count);
  f.statuses = static_cast<double>(p.statuses_count);
  f.follower_friend_ratio = p.friends_count == 0 ? f.followers : f.followers / f.friends;
  return f;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr int kMaxOffset = 3600;  // first post falls in the first hour of the day

class Renderer {
 public:
  explicit Renderer(const scoring::LogisticScorer& scorer) : scorer_(scorer) {
    for (int n : {2, 3, 4, 6, 10, 20, 30})
      for (double auto_share : {0.0, 0.5, 1.0})
        for (double rt_share : {0.0, 0.5, 1.0})
          for (int tags : {0, 1, 2, 4})
            for (bool irregular : {false, true}) {
              if (irregular && n < 3) continue;
              DayTemplate t;
              t.n = n;
              t.n_auto = static_cast<int>(std::lround(auto_share * n));
              t.n_retweet = static_cast<int>(std::lround(rt_share * n));
              t.tags_per_post = tags;
              for (int i = 0; i + 1 < n; ++i)
                t.gap_weights.push_back(irregular ? irregular_pattern()[i % irregular_pattern().size()] : 1);
              t.weight_sum = std::accumulate(t.gap_weights.begin(), t.gap_weights.end(), 0);
              const long long widest = (kDaySeconds - 1 - kMaxOffset) / t.weight_sum;
              const double mean_w = static_cast<double>(t.weight_sum) / (n - 1);
              const long long typical = std::clamp<long long>(std::llround(1800.0 / mean_w), 1, widest);
              t.logit_high = day_logit(t, 1);
              t.logit_low = day_logit(t, widest);
              t.logit_typical = day_logit(t, typical);
              templates_.push_back(std::move(t));
            }
  }

  std::vector<ingest::PostRecord> render(const DayRequest& req, double tolerance) const {
    Rng rng(req.seed);
    const auto offset = static_cast<long long>(rng.below(kMaxOffset));
    const Timestamp first = Timestamp{req.day} + std::chrono::seconds{offset};
    const double profile_logit = scorer_.logit(profile_features(req.profile, first)) - scorer_.bias();
    const double target = std::clamp(req.target, 1e-9, 1.0 - 1e-9);
    const double wanted = std::log(target / (1.0 - target)) - profile_logit;  // day logit incl. bias

    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < templates_.size(); ++i) {
      const DayTemplate& t = templates_[i];
      if (t.n_retweet > 0 && req.retweet_targets.empty()) continue;
      if (static_cast<std::size_t>(t.tags_per_post) > req.tags.size()) continue;
      if (wanted > t.logit_high + 0.05 || wanted < t.logit_low - 0.05) continue;
      // Prefer patterns that sit near the target at ordinary spacing, and
      // fewer posts.
      order.emplace_back(std::abs(t.logit_typical - wanted) + 0.1 * t.n, i);
    }
    std::sort(order.begin(), order.end());
    for (const auto& [_, idx] : order) {
      const DayTemplate& t = templates_[idx];
      const long long widest = (kDaySeconds - 1 - offset) / t.weight_sum;
      // Largest unit whose logit is still >= wanted (logit falls as the unit grows).
      long long lo = 1, hi = widest;
      if (day_logit(t, lo) < wanted) {
        hi = lo;
      } else if (day_logit(t, hi) >= wanted) {
        lo = hi;
      } else {
        while (hi - lo > 1) {
          const long long mid = lo + (hi - lo) / 2;
          (day_logit(t, mid) >= wanted ? lo : hi) = mid;
        }
      }
      long long best = lo;
      double best_err = std::abs(sigmoid(day_logit(t, lo) + profile_logit) - target);
      const double err_hi = std::abs(sigmoid(day_logit(t, hi) + profile_logit) - target);
      if (err_hi < best_err) {
        best = hi;
        best_err = err_hi;
      }
      if (best_err > tolerance) continue;
      auto posts = build(req, t, best, first, rng);
      ingest::DailyWindow w{req.agent_id, req.day, posts};
      const double p = scorer_.probability(scoring::extract_features(w));
      if (std::abs(p - req.target) <= tolerance) return posts;
    }
    throw Error("cannot render score " + std::to_string(req.target) + " for " + req.agent_id + " on " +
                format_day(req.day));
  }

 private:
  double day_logit(const DayTemplate& t, long long unit) const { return scorer_.logit(day_features(t, unit)); }

  std::vector<ingest::PostRecord> build(const DayRequest& req, const DayTemplate& t, long long unit, Timestamp first,
                                        Rng& rng) const {
    static const std::vector<std::string> kOrganic{"Twitter for iPhone", "Twitter Web App", "Twitter for Android"};
    static const std::vector<std::string> kWords{
        "today", "people", "news",     "update", "world",  "week",     "report",  "city",  "school",  "family",
        "work",  "doctors", "hospital", "cases", "numbers", "government", "plan", "trial", "community", "nurses"};
    const std::size_t h = std::hash<std::string>{}(req.agent_id);
    const std::string organic = kOrganic[h % kOrganic.size()];
    const auto& automation = scoring::default_automation_sources();
    const std::string automated = automation[(h / 7) % automation.size()];
    const std::string day_key = format_day(req.day);

    std::vector<ingest::PostRecord> posts(static_cast<std::size_t>(t.n));
    Timestamp at = first;
    const auto rt_start = static_cast<int>(rng.below(static_cast<std::size_t>(t.n)));
    const auto auto_start = static_cast<int>(rng.below(static_cast<std::size_t>(t.n)));
    for (int i = 0; i < t.n; ++i) {
      auto& p = posts[static_cast<std::size_t>(i)];
      if (i > 0) at += std::chrono::seconds{t.gap_weights[static_cast<std::size_t>(i - 1)] * unit};
      char id[96];
      std::snprintf(id, sizeof id, "%s-%s-%02d", req.agent_id.c_str(), day_key.c_str(), i);
      p.post_id = id;
      p.author_id = req.agent_id;
      p.created_at = at;
      p.author_profile = req.profile;
      p.source_client = ((i - auto_start + t.n) % t.n) < t.n_auto ? automated : organic;
      std::string text;
      if (((i - rt_start + t.n) % t.n) < t.n_retweet) {
        p.retweet_of = req.retweet_targets[rng.below(req.retweet_targets.size())];
        text = "RT @" + *p.retweet_of + ": ";
      }
      // Distinct tags per post.
      std::vector<std::string> pool = req.tags;
      for (int k = 0; k < t.tags_per_post && !pool.empty(); ++k) {
        const std::size_t j = rng.below(pool.size());
        p.hashtags.push_back(pool[j]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
      }
      const int words = 4 + static_cast<int>(rng.below(5));
      for (int k = 0; k < words; ++k) text += kWords[rng.below(kWords.size())] + " ";
      for (const auto& tag : p.hashtags) text += "#" + tag + " ";
      posts[static_cast<std::size_t>(i)].text = std::move(text);
    }
    for (std::size_t k = 0; k < req.mentions.size(); ++k) {
      auto& p = posts[k % posts.size()];
      p.mentions.push_back(req.mentions[k]);
      p.text += "@" + req.mentions[k] + " ";
    }
    for (auto& p : posts)
      if (!p.text.empty() && p.text.back() == ' ') p.text.pop_back();
    return posts;
  }

  const scoring::LogisticScorer& scorer_;
  std::vector<DayTemplate> templates_;
};

// Words that tie a post's text to its author's stance, for the topic models.
const std::vector<std::string>& stance_words(int stance) {
  static const std::vector<std::string> pro{"protect", "science", "immunity", "dose", "clinic",
                                            "effective", "appointment", "volunteers", "grateful", "booster"};
  static const std::vector<std::string> anti{"freedom", "mandate", "choice", "risk", "injury",
                                             "poison", "refuse", "rights", "experiment", "untested"};
  static const std::vector<std::string> none;
  return stance > 0 ? pro : stance < 0 ? anti : none;
}

}  // namespace

std::vector<ingest::PostRecord> render_day(const DayRequest& request, const scoring::LogisticScorer& scorer,
                                           double tolerance) {
  return Renderer(scorer).render(request, tolerance);
}

Population gen_population(const PopulationSpec& spec, unsigned jobs, const scoring::LogisticScorer& scorer) {
  Population pop;
  pop.agents = plan_population(spec, jobs);
  pop.truth = ground_truth(pop.agents);
  const std::size_t n = pop.agents.size();

  std::vector<AgentClass> classes(n);
  for (std::size_t i = 0; i < n; ++i) classes[i] = pop.agents[i].generated.cls;
  const auto partners = gen_partners(classes, spec);

  // Each partner pair is carried by a mention from one endpoint.
  std::vector<std::vector<std::string>> mentions(n);
  Rng owner_rng(derive_seed(spec.seed, kEdgeOwnerStream));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b : partners[a])
      if (a < b) {
        if (owner_rng.bernoulli(0.5))
          mentions[a].push_back(pop.agents[b].agent_id);
        else
          mentions[b].push_back(pop.agents[a].agent_id);
      }

  const Renderer renderer(scorer);
  std::vector<std::vector<ingest::PostRecord>> per_agent(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const AgentPlan& a = pop.agents[i];
    Rng rng(derive_seed(spec.seed, kAgentStreamBase + 2 * i + 1));
    std::vector<std::string> tags = spec.neutral_tags;
    const auto& seeds = a.stance > 0 ? spec.pro_tags : a.stance < 0 ? spec.anti_tags : std::vector<std::string>{};
    tags.insert(tags.end(), seeds.begin(), seeds.end());
    std::vector<std::string> retweet_targets;
    for (std::size_t j : partners[i]) retweet_targets.push_back(pop.agents[j].agent_id);
    const auto& obs = a.generated.series.observations;
    const auto& words = stance_words(a.stance);
    for (std::size_t d = 0; d < obs.size(); ++d) {
      DayRequest req;
      req.agent_id = a.agent_id;
      req.day = obs[d].day;
      req.target = obs[d].probability;
      req.profile = a.profile;
      req.retweet_targets = retweet_targets;
      for (std::size_t k = d; k < mentions[i].size(); k += obs.size()) req.mentions.push_back(mentions[i][k]);
      req.tags = tags;
      req.seed = rng.next();
      auto posts = renderer.render(req, spec.render_tolerance);
      if (!words.empty())
        for (auto& p : posts) {
          p.text += " " + words[rng.below(words.size())];
          p.text += " " + words[rng.below(words.size())];
        }
      per_agent[i].insert(per_agent[i].end(), std::make_move_iterator(posts.begin()),
                          std::make_move_iterator(posts.end()));
    }
  });
  std::size_t total = 0;
  for (const auto& v : per_agent) total += v.size();
  pop.posts.reserve(total);
  for (auto& v : per_agent)
    pop.posts.insert(pop.posts.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  return pop;
}

std::vector<ingest::PostRecord> gen_comm_posts(const PopulationSpec& spec) {
  spec.validate();
  const auto classes = assign_classes(spec);
  const auto partners = gen_partners(classes, spec);
  Rng rng(derive_seed(spec.seed, kCommStream));
  std::vector<ingest::PostRecord> posts;
  ingest::ProfileSnapshot profile;
  profile.account_created_at = Timestamp{spec.start_day} - std::chrono::days{1000};
  std::size_t counter = 0;
  for (std::size_t a = 0; a < partners.size(); ++a)
    for (std::size_t b : partners[a]) {
      if (b < a) continue;
      const bool a_posts = rng.bernoulli(0.5);
      ingest::PostRecord p;
      p.post_id = "c" + std::to_string(counter++);
      p.author_id = agent_id(a_posts ? a : b);
      p.mentions.push_back(agent_id(a_posts ? b : a));
      p.created_at = Timestamp{spec.start_day} + std::chrono::seconds{static_cast<long long>(rng.below(
                                                      static_cast<std::size_t>(spec.days) * kDaySeconds))};
      p.text = "@" + p.mentions.front();
      p.source_client = "Twitter Web App";
      p.author_profile = profile;
      posts.push_back(std::move(p));
    }
  return posts;
}

}  // namespace cyborg::synth
