#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "cyborg/error.hpp"
#include "cyborg/rng.hpp"
#include "cyborg/scoring.hpp"

using namespace cyborg;
using namespace cyborg::scoring;
using doctest::Approx;

namespace {

ingest::DailyWindow window_of(int n_posts, int gap_seconds, const std::string& source, bool retweets, int tags) {
  ingest::DailyWindow w;
  w.agent_id = "a";
  w.day = *parse_day("2020-06-01");
  const Timestamp start = *parse_timestamp("2020-06-01T00:00:00Z");
  for (int i = 0; i < n_posts; ++i) {
    ingest::PostRecord p;
    p.post_id = "p" + std::to_string(i);
    p.author_id = "a";
    p.created_at = start + std::chrono::seconds(i * gap_seconds);
    p.source_client = source;
    if (retweets) p.retweet_of = "b";
    for (int t = 0; t < tags; ++t) p.hashtags.push_back("t" + std::to_string(t));
    p.author_profile.account_created_at = *parse_timestamp("2019-06-01T00:00:00Z");
    p.author_profile.followers_count = 100;
    p.author_profile.friends_count = 50;
    p.author_profile.statuses_count = 2000;
    w.posts.push_back(p);
  }
  return w;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("single post conventions") {
  auto f = extract_features(window_of(1, 0, "web", false, 0));
  CHECK(f.posts_today == 1);
  CHECK(f.retweet_fraction == 0.0);
  CHECK(f.gap_coefficient_of_variation == 0.0);
  CHECK(f.mean_interpost_gap_seconds == 86400.0);
  CHECK(f.hashtags_per_post == 0.0);
  CHECK(f.distinct_sources == 1);
}

TEST_CASE("two retweets a minute apart") {
  auto f = extract_features(window_of(2, 60, "web", true, 1));
  CHECK(f.mean_interpost_gap_seconds == 60.0);
  CHECK(f.retweet_fraction == 1.0);
  CHECK(f.hashtags_per_post == 1.0);
}

TEST_CASE("fixed-interval automation client") {
  auto f = extract_features(window_of(50, 600, "dlvr.it", false, 0));
  CHECK(f.gap_coefficient_of_variation == 0.0);
  CHECK(f.mean_interpost_gap_seconds == 600.0);
  CHECK(f.automation_source_fraction == 1.0);
  CHECK(f.posts_today == 50);
}

TEST_CASE("profile features and ratio convention") {
  auto w = window_of(3, 100, "web", false, 0);
  auto f = extract_features(w);
  CHECK(f.account_age_days == Approx(366.0));
  CHECK(f.follower_friend_ratio == Approx(2.0));
  for (auto& p : w.posts) p.author_profile.friends_count = 0;
  CHECK(extract_features(w).follower_friend_ratio == 100.0);
}

TEST_CASE("irregular gaps: mean and coefficient of variation by hand") {
  auto w = window_of(4, 0, "web", false, 0);
  const int offsets[] = {0, 100, 400, 1000};  // gaps 100, 300, 600
  for (int i = 0; i < 4; ++i)
    w.posts[i].created_at = *parse_timestamp("2020-06-01T00:00:00Z") + std::chrono::seconds(offsets[i]);
  auto f = extract_features(w);
  const double mean = 1000.0 / 3.0;
  const double sd = std::sqrt(((100 - mean) * (100 - mean) + (300 - mean) * (300 - mean) + (600 - mean) * (600 - mean)) / 3.0);
  CHECK(f.mean_interpost_gap_seconds == Approx(mean).epsilon(1e-12));
  CHECK(f.gap_coefficient_of_variation == Approx(sd / mean).epsilon(1e-12));
}

TEST_CASE("mixed sources and custom automation list") {
  auto w = window_of(4, 60, "web", false, 0);
  w.posts[1].source_client = "TweetDeck";
  w.posts[2].source_client = "MyBot";
  auto f = extract_features(w);
  CHECK(f.distinct_sources == 3);
  CHECK(f.automation_source_fraction == 0.25);
  FeatureOptions o;
  o.automation_sources = {"MyBot"};
  CHECK(extract_features(w, o).automation_source_fraction == 0.25);
}

TEST_CASE("empty window is rejected") {
  ingest::DailyWindow w;
  CHECK_THROWS_AS(extract_features(w), InvalidArgument);
}

TEST_CASE("reference scorer on zero features is logistic(bias)") {
  const auto& m = LogisticScorer::reference();
  CHECK(m.bias() == -2.0);
  CHECK(score(FeatureVector{}, m) == Approx(0.11920292202211755).epsilon(1e-15));
  CHECK(score(FeatureVector{}, m) == sigmoid(-2.0));
}

TEST_CASE("reference scorer by hand") {
  FeatureVector f;
  f.posts_today = 10;
  f.automation_source_fraction = 0.5;
  f.retweet_fraction = 0.25;
  f.mean_interpost_gap_seconds = 3600;
  const double logit = -2.0 + 0.60 * std::log1p(10.0) + 2.5 * 0.5 + 1.5 * 0.25 - 0.25 * std::log1p(3600.0);
  CHECK(LogisticScorer::reference().logit(f) == Approx(logit).epsilon(1e-14));
  CHECK(LogisticScorer::reference().probability(f) == Approx(sigmoid(logit)).epsilon(1e-14));
}

TEST_CASE("score range and automation monotonicity") {
  Rng rng(9);
  const auto& m = LogisticScorer::reference();
  for (int i = 0; i < 2000; ++i) {
    FeatureVector f;
    f.account_age_days = rng.uniform(0, 6000);
    f.followers = static_cast<double>(rng.below(1000000));
    f.friends = static_cast<double>(rng.below(100000));
    f.statuses = static_cast<double>(rng.below(1000000));
    f.follower_friend_ratio = rng.uniform(0, 1000);
    f.posts_today = static_cast<double>(1 + rng.below(500));
    f.mean_interpost_gap_seconds = rng.uniform(0, 86400);
    f.gap_coefficient_of_variation = rng.uniform(0, 5);
    f.distinct_sources = static_cast<double>(1 + rng.below(5));
    f.retweet_fraction = rng.uniform();
    f.hashtags_per_post = rng.uniform(0, 10);
    f.automation_source_fraction = 0.0;
    const double lo = score(f, m);
    f.automation_source_fraction = 1.0;
    const double hi = score(f, m);
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK(hi >= lo);
    CHECK(score(f, m) == hi);  // pure
  }
}

TEST_CASE("scripted and organic agents separate") {
  // scripted: 48 retweets every 30 min from a scheduler, 2 tags each
  auto scripted = window_of(48, 1800, "twittbot.net", true, 2);
  CHECK(score(extract_features(scripted), LogisticScorer::reference()) >= 0.8);
  // organic: 3 original posts at uneven times from a phone, established account
  auto organic = window_of(3, 0, "Twitter for iPhone", false, 0);
  const int offsets[] = {8 * 3600, 9 * 3600 + 700, 21 * 3600};
  for (int i = 0; i < 3; ++i) {
    organic.posts[i].created_at = *parse_timestamp("2020-06-01T00:00:00Z") + std::chrono::seconds(offsets[i]);
    organic.posts[i].author_profile.account_created_at = *parse_timestamp("2011-01-01T00:00:00Z");
    organic.posts[i].author_profile.followers_count = 900;
    organic.posts[i].author_profile.friends_count = 400;
  }
  CHECK(score(extract_features(organic), LogisticScorer::reference()) <= 0.4);
}

TEST_CASE("weights file matches the embedded reference") {
  auto from_file = LogisticScorer::from_file(CYBORG_DATA_DIR "/reference_scorer.weights");
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    FeatureVector f;
    f.posts_today = static_cast<double>(rng.below(100));
    f.followers = static_cast<double>(rng.below(10000));
    f.retweet_fraction = rng.uniform();
    f.gap_coefficient_of_variation = rng.uniform(0, 3);
    CHECK(from_file.probability(f) == LogisticScorer::reference().probability(f));
  }
}

TEST_CASE("weights parsing errors") {
  CHECK_THROWS_AS(LogisticScorer::from_text("bias = 1\nbias = 2\n", "x"), FormatError);
  CHECK_THROWS_AS(LogisticScorer::from_text("nonsense = 1\n", "x"), FormatError);
  CHECK_THROWS_AS(LogisticScorer::from_text("posts_today = abc\n", "x"), FormatError);
  auto m = LogisticScorer::from_text("# only bias\nbias = 0\n", "flat");
  CHECK(m.probability(FeatureVector{}) == 0.5);
  CHECK(m.weight("posts_today") == 0.0);
}

TEST_CASE("classify_bot boundary") {
  CHECK(classify_bot(0.70) == BotLabel::Bot);
  CHECK(classify_bot(0.6999) == BotLabel::Human);
  CHECK(classify_bot(0.0) == BotLabel::Human);
  CHECK(classify_bot(1.0) == BotLabel::Bot);
  CHECK_THROWS_AS(classify_bot(1.5), InvalidArgument);
  CHECK_THROWS_AS(classify_bot(0.5, -0.1), InvalidArgument);
}

TEST_CASE("score_windows is independent of jobs") {
  std::map<std::string, std::vector<ingest::DailyWindow>> windows;
  for (int a = 0; a < 30; ++a) {
    auto w = window_of(1 + a % 7, 300 + 17 * a, a % 3 ? "web" : "IFTTT", a % 2, a % 4);
    w.agent_id = "a" + std::to_string(100 + a);
    windows[w.agent_id].push_back(w);
  }
  auto one = score_windows(windows, LogisticScorer::reference(), {}, 1);
  auto four = score_windows(windows, LogisticScorer::reference(), {}, 4);
  REQUIRE(one.size() == 30);
  REQUIRE(four.size() == 30);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].agent_id == four[i].agent_id);
    CHECK(one[i].probability == four[i].probability);
    if (i) CHECK(one[i - 1].agent_id < one[i].agent_id);
  }
}
