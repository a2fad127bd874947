#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cyborg/ingest.hpp"

namespace cyborg::scoring {

struct FeatureVector {
  double account_age_days = 0.0;
  double followers = 0.0;
  double friends = 0.0;
  double statuses = 0.0;
  double follower_friend_ratio = 0.0;  // friends == 0 -> followers
  double posts_today = 0.0;
  double mean_interpost_gap_seconds = 0.0;  // single post -> 86400
  double gap_coefficient_of_variation = 0.0;  // <= 1 post -> 0
  double distinct_sources = 0.0;
  double automation_source_fraction = 0.0;
  double retweet_fraction = 0.0;
  double hashtags_per_post = 0.0;

  bool operator==(const FeatureVector&) const = default;
};

// Field names in declaration order; these are the keys of a weight file.
const std::vector<std::string>& feature_names();
std::vector<double> to_vector(const FeatureVector& f);

const std::vector<std::string>& default_automation_sources();

struct FeatureOptions {
  std::vector<std::string> automation_sources = default_automation_sources();
};

// Precondition: window.posts is nonempty. The profile snapshot of the last
// post of the day is used for the account fields; account age is measured
// at the first post of the day.
FeatureVector extract_features(const ingest::DailyWindow& window, const FeatureOptions& options = {});

// Any scorer must be a pure function of its features and its parameters.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double probability(const FeatureVector& features) const = 0;
  virtual std::string id() const = 0;
};

// Logistic model over transformed features:
//   logit = bias + sum_i w_i * g_i(x_i)
// where g is the identity for the bounded features (the three fractions and
// the gap coefficient of variation) and log1p for every count-like feature.
class LogisticScorer final : public Scorer {
 public:
  LogisticScorer(std::map<std::string, double> weights, std::string id);

  double probability(const FeatureVector& features) const override;
  double logit(const FeatureVector& features) const;
  std::string id() const override { return id_; }
  double weight(const std::string& name) const;
  double bias() const { return bias_; }

  // Flat key=value text, one feature per line plus `bias`; '#' starts a
  // comment line. Unknown or repeated keys are fatal (FormatError); missing
  // features default to weight 0.
  static LogisticScorer from_file(const std::filesystem::path& path);
  static LogisticScorer from_text(std::string_view text, std::string id);

  // The shipped reference weights (identical to data/reference_scorer.weights).
  static const LogisticScorer& reference();
  static std::string reference_weights_text();

 private:
  std::vector<double> weights_;  // feature_names() order
  double bias_ = 0.0;
  std::string id_;
};

inline double score(const FeatureVector& features, const Scorer& model) { return model.probability(features); }

enum class BotLabel { Human, Bot };
const char* to_string(BotLabel label);

inline constexpr double kDefaultBotThreshold = 0.70;

// Bot iff probability >= bot_threshold. Both arguments must lie in [0, 1]
// (InvalidArgument otherwise).
BotLabel classify_bot(double probability, double bot_threshold = kDefaultBotThreshold);

struct BotScore {
  std::string agent_id;
  Day day{};
  double probability = 0.0;
  std::string scorer_id;
};

// Scores every daily window. Parallel over agents when jobs > 1; output is
// ordered by (agent_id, day) regardless of jobs.
std::vector<BotScore> score_windows(const std::map<std::string, std::vector<ingest::DailyWindow>>& windows,
                                    const Scorer& model, const FeatureOptions& options = {}, unsigned jobs = 1);

}  // namespace cyborg::scoring
