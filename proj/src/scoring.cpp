#include "cyborg/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "cyborg/error.hpp"

namespace cyborg::scoring {
namespace {

constexpr double kDaySeconds = 86400.0;

// Bounded features enter the logit as-is; the rest through log1p.
bool is_bounded(std::size_t index) {
  return index == 7 || index == 9 || index == 10;  // gap CV, automation, retweet
}

constexpr const char* kReferenceWeights = R"(# Reference bot scorer, version 1.
# logit = bias + sum(w * g(x)); g = identity for gap_coefficient_of_variation,
# automation_source_fraction and retweet_fraction, log1p for everything else.
bias = -2.0
account_age_days = -0.10
followers = -0.05
friends = 0.05
statuses = 0.10
follower_friend_ratio = -0.10
posts_today = 0.60
mean_interpost_gap_seconds = -0.25
gap_coefficient_of_variation = -1.0
distinct_sources = -0.30
automation_source_fraction = 2.5
retweet_fraction = 1.5
hashtags_per_post = 0.40
)";

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = {
      "account_age_days",           "followers",
      "friends",                    "statuses",
      "follower_friend_ratio",      "posts_today",
      "mean_interpost_gap_seconds", "gap_coefficient_of_variation",
      "distinct_sources",           "automation_source_fraction",
      "retweet_fraction",           "hashtags_per_post",
  };
  return names;
}

std::vector<double> to_vector(const FeatureVector& f) {
  return {f.account_age_days,
          f.followers,
          f.friends,
          f.statuses,
          f.follower_friend_ratio,
          f.posts_today,
          f.mean_interpost_gap_seconds,
          f.gap_coefficient_of_variation,
          f.distinct_sources,
          f.automation_source_fraction,
          f.retweet_fraction,
          f.hashtags_per_post};
}

const std::vector<std::string>& default_automation_sources() {
  static const std::vector<std::string> sources = {"TweetDeck", "IFTTT", "dlvr.it", "twittbot.net"};
  return sources;
}

FeatureVector extract_features(const ingest::DailyWindow& window, const FeatureOptions& options) {
  const auto& posts = window.posts;
  if (posts.empty()) throw InvalidArgument("extract_features: empty window");

  FeatureVector f;
  const auto& profile = posts.back().author_profile;
  const double age = static_cast<double>((posts.front().created_at - profile.account_created_at).count());
  f.account_age_days = std::max(0.0, age / kDaySeconds);
  f.followers = static_cast<double>(profile.followers_count);
  f.friends = static_cast<double>(profile.friends_count);
  f.statuses = static_cast<double>(profile.statuses_count);
  f.follower_friend_ratio = profile.friends_count == 0 ? f.followers : f.followers / f.friends;

  const std::size_t n = posts.size();
  f.posts_today = static_cast<double>(n);

  if (n < 2) {
    f.mean_interpost_gap_seconds = kDaySeconds;
    f.gap_coefficient_of_variation = 0.0;
  } else {
    std::vector<double> gaps;
    gaps.reserve(n - 1);
    for (std::size_t i = 1; i < n; ++i)
      gaps.push_back(static_cast<double>((posts[i].created_at - posts[i - 1].created_at).count()));
    double mean = 0.0;
    for (double g : gaps) mean += g;
    mean /= static_cast<double>(gaps.size());
    double var = 0.0;
    for (double g : gaps) var += (g - mean) * (g - mean);
    var /= static_cast<double>(gaps.size());
    f.mean_interpost_gap_seconds = mean;
    f.gap_coefficient_of_variation = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
  }

  std::set<std::string_view> sources;
  std::size_t automated = 0, retweets = 0, tags = 0;
  for (const auto& p : posts) {
    sources.insert(p.source_client);
    if (std::find(options.automation_sources.begin(), options.automation_sources.end(), p.source_client) !=
        options.automation_sources.end())
      ++automated;
    if (p.retweet_of) ++retweets;
    tags += p.hashtags.size();
  }
  const auto dn = static_cast<double>(n);
  f.distinct_sources = static_cast<double>(sources.size());
  f.automation_source_fraction = static_cast<double>(automated) / dn;
  f.retweet_fraction = static_cast<double>(retweets) / dn;
  f.hashtags_per_post = static_cast<double>(tags) / dn;
  return f;
}

LogisticScorer::LogisticScorer(std::map<std::string, double> weights, std::string id) : id_(std::move(id)) {
  const auto& names = feature_names();
  weights_.assign(names.size(), 0.0);
  for (const auto& [key, value] : weights) {
    if (key == "bias") {
      bias_ = value;
      continue;
    }
    auto it = std::find(names.begin(), names.end(), key);
    if (it == names.end()) throw FormatError("unknown scorer weight key '" + key + "'");
    weights_[static_cast<std::size_t>(it - names.begin())] = value;
  }
}

double LogisticScorer::logit(const FeatureVector& features) const {
  const auto x = to_vector(features);
  double z = bias_;
  for (std::size_t i = 0; i < x.size(); ++i) z += weights_[i] * (is_bounded(i) ? x[i] : std::log1p(x[i]));
  return z;
}

double LogisticScorer::probability(const FeatureVector& features) const {
  return 1.0 / (1.0 + std::exp(-logit(features)));
}

double LogisticScorer::weight(const std::string& name) const {
  if (name == "bias") return bias_;
  const auto& names = feature_names();
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("unknown feature '" + name + "'");
  return weights_[static_cast<std::size_t>(it - names.begin())];
}

LogisticScorer LogisticScorer::from_text(std::string_view text, std::string id) {
  std::map<std::string, double> weights;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw FormatError("weight file line " + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    double w = 0.0;
    try {
      std::size_t used = 0;
      w = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw FormatError("weight file line " + std::to_string(line_no) + ": bad number '" + value + "'");
    }
    if (!std::isfinite(w)) throw FormatError("weight file line " + std::to_string(line_no) + ": non-finite weight");
    if (!weights.emplace(key, w).second) throw FormatError("weight file: repeated key '" + key + "'");
  }
  return LogisticScorer(std::move(weights), std::move(id));
}

LogisticScorer LogisticScorer::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weight file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), "logistic:" + path.stem().string());
}

const LogisticScorer& LogisticScorer::reference() {
  static const LogisticScorer model = from_text(kReferenceWeights, "reference-logistic-v1");
  return model;
}

std::string LogisticScorer::reference_weights_text() { return kReferenceWeights; }

const char* to_string(BotLabel label) { return label == BotLabel::Bot ? "Bot" : "Human"; }

BotLabel classify_bot(double probability, double bot_threshold) {
  if (!(probability >= 0.0 && probability <= 1.0))
    throw InvalidArgument("classify_bot: probability out of [0,1]");
  if (!(bot_threshold >= 0.0 && bot_threshold <= 1.0))
    throw InvalidArgument("classify_bot: threshold out of [0,1]");
  return probability >= bot_threshold ? BotLabel::Bot : BotLabel::Human;
}

std::vector<BotScore> score_windows(const std::map<std::string, std::vector<ingest::DailyWindow>>& windows,
                                    const Scorer& model, const FeatureOptions& options, unsigned jobs) {
  std::vector<const std::vector<ingest::DailyWindow>*> agents;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& [agent, ws] : windows) {
    agents.push_back(&ws);
    offsets.push_back(total);
    total += ws.size();
  }
  std::vector<BotScore> out(total);
  const std::string sid = model.id();
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t a = begin; a < end; ++a) {
      std::size_t k = offsets[a];
      for (const auto& w : *agents[a])
        out[k++] = BotScore{w.agent_id, w.day, model.probability(extract_features(w, options)), sid};
    }
  };
  jobs = std::max(1u, jobs);
  if (jobs == 1 || agents.size() < 2) {
    work(0, agents.size());
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (agents.size() + jobs - 1) / jobs;
  for (std::size_t b = 0; b < agents.size(); b += chunk) pool.emplace_back(work, b, std::min(agents.size(), b + chunk));
  pool.clear();  // joins
  return out;
}

}  // namespace cyborg::scoring
