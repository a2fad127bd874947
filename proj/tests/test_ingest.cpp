#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "cyborg/error.hpp"
#include "cyborg/ingest.hpp"
#include "cyborg/rng.hpp"

using namespace cyborg;
using namespace cyborg::ingest;

namespace {

const std::filesystem::path kFixtures = CYBORG_TEST_FIXTURES;

PostRecord make_post(const std::string& id, const std::string& author, const std::string& ts) {
  PostRecord p;
  p.post_id = id;
  p.author_id = author;
  p.created_at = *parse_timestamp(ts);
  p.text = "text " + id;
  p.source_client = "web";
  p.author_profile.account_created_at = *parse_timestamp("2010-01-01T00:00:00Z");
  return p;
}

bool same_record(const PostRecord& a, const PostRecord& b) {
  return a.post_id == b.post_id && a.author_id == b.author_id && a.created_at == b.created_at && a.text == b.text &&
         a.hashtags == b.hashtags && a.retweet_of == b.retweet_of && a.quote_of == b.quote_of &&
         a.mentions == b.mentions && a.source_client == b.source_client &&
         a.author_profile.followers_count == b.author_profile.followers_count &&
         a.author_profile.friends_count == b.author_profile.friends_count &&
         a.author_profile.statuses_count == b.author_profile.statuses_count &&
         a.author_profile.account_created_at == b.author_profile.account_created_at &&
         a.author_profile.is_verified == b.author_profile.is_verified &&
         a.author_profile.is_suspended == b.author_profile.is_suspended;
}

}  // namespace

TEST_CASE("empty stream gives nothing") {
  std::istringstream in("");
  auto r = parse_archive(in);
  CHECK(r.records.empty());
  CHECK(r.report.ok == 0);
  CHECK(r.report.skipped == 0);
}

TEST_CASE("single fixture line") {
  auto r = parse_archive_file(kFixtures / "min_post.jsonl");
  REQUIRE(r.records.size() == 1);
  CHECK(r.report.ok == 1);
  const auto& p = r.records[0];
  CHECK(p.post_id == "1001");
  CHECK(p.author_id == "u1");
  CHECK(format_timestamp(p.created_at) == "2020-06-01T12:30:45Z");
  CHECK(p.text == "Got my shot today #VaccinesWork @u2");
  CHECK(p.hashtags == std::vector<std::string>{"vaccineswork"});
  CHECK(p.mentions == std::vector<std::string>{"u2"});
  CHECK(p.retweet_of == std::optional<std::string>("u3"));
  CHECK(!p.quote_of);
  CHECK(p.source_client == "Twitter for iPhone");
  CHECK(p.author_profile.followers_count == 120);
  CHECK(p.author_profile.friends_count == 80);
  CHECK(p.author_profile.statuses_count == 4500);
  CHECK(format_timestamp(p.author_profile.account_created_at) == "2015-03-02T10:00:00Z");
  CHECK(!p.author_profile.is_verified);
  CHECK(!p.author_profile.is_suspended);

  auto again = parse_record(serialize_record(p));
  CHECK(same_record(p, again));
}

TEST_CASE("truncated middle line is skipped") {
  auto r = parse_archive_file(kFixtures / "truncated.jsonl");
  CHECK(r.records.size() == 2);
  CHECK(r.report.ok == 2);
  CHECK(r.report.skipped == 1);
  REQUIRE(r.report.errors.size() == 1);
  CHECK(r.report.errors[0].rfind("line 2:", 0) == 0);
  CHECK(r.records[1].quote_of == std::optional<std::string>("u1"));
}

TEST_CASE("missing archive is an io error") {
  CHECK_THROWS_AS(parse_archive_file(kFixtures / "nope.jsonl"), IoError);
}

TEST_CASE("record validation") {
  const std::string good = R"({"id":"1","user":{"id":"u","followers_count":1,"friends_count":1,"statuses_count":1,"created_at":"2015-01-01T00:00:00Z","verified":false},"created_at":"2020-01-01T00:00:00Z","text":"","entities":{"hashtags":[],"user_mentions":[]},"source":"web"})";
  CHECK_NOTHROW(parse_record(good));

  auto with = [&](const std::string& from, const std::string& to) {
    std::string s = good;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  CHECK_THROWS_AS(parse_record(with(R"("id":"1")", R"("id":"")")), FormatError);
  CHECK_THROWS_AS(parse_record(with("2020-01-01T00:00:00Z", "2020-02-30T00:00:00Z")), FormatError);
  CHECK_THROWS_AS(parse_record(with("\"followers_count\":1", "\"followers_count\":-1")), FormatError);
  CHECK_THROWS_AS(parse_record(with("\"verified\":false", "\"verified\":0")), FormatError);
  CHECK_THROWS_AS(parse_record(with("\"hashtags\":[]", "\"hashtags\":[\"a#b\"]")), FormatError);
  // account created after the post
  CHECK_THROWS_AS(parse_record(with("2015-01-01T00:00:00Z", "2021-01-01T00:00:00Z")), FormatError);
  CHECK_THROWS_AS(parse_record("[1,2]"), FormatError);

  auto p = parse_record(with("\"hashtags\":[]", "\"hashtags\":[\"#CoViD19\"]"));
  CHECK(p.hashtags == std::vector<std::string>{"covid19"});
  auto q = parse_record(with(R"("id":"1")", R"("id":12345678901)"));
  CHECK(q.post_id == "12345678901");
  auto s = parse_record(with("\"verified\":false", "\"verified\":false,\"suspended\":true"));
  CHECK(s.author_profile.is_suspended == std::optional<bool>(true));
}

TEST_CASE("duplicate post ids are skipped") {
  std::ostringstream text;
  auto p = make_post("7", "a", "2020-06-01T00:00:00Z");
  text << serialize_record(p) << "\n" << serialize_record(p) << "\n\n";
  std::istringstream in(text.str());
  auto r = parse_archive(in);
  CHECK(r.records.size() == 1);
  CHECK(r.report.skipped == 1);
}

TEST_CASE("round trip over random records") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    PostRecord p = make_post("p" + std::to_string(i), "a" + std::to_string(rng.below(20)), "2020-06-01T00:00:00Z");
    p.created_at += std::chrono::seconds(rng.below(86400 * 60));
    p.text = "x\"y\\z\n\xc3\xa9 " + std::to_string(rng.next());
    for (std::size_t k = rng.below(4); k > 0; --k) p.hashtags.push_back("t" + std::to_string(rng.below(9)));
    for (std::size_t k = rng.below(3); k > 0; --k) p.mentions.push_back("m" + std::to_string(rng.below(9)));
    if (rng.bernoulli(0.3)) p.retweet_of = "r" + std::to_string(rng.below(5));
    if (rng.bernoulli(0.3)) p.quote_of = "q" + std::to_string(rng.below(5));
    if (rng.bernoulli(0.5)) p.author_profile.is_suspended = rng.bernoulli(0.5);
    p.author_profile.followers_count = static_cast<long long>(rng.below(100000));
    p.author_profile.is_verified = rng.bernoulli(0.1);
    CHECK(same_record(p, parse_record(serialize_record(p))));
  }
}

TEST_CASE("window_by_day") {
  SUBCASE("empty") { CHECK(window_by_day({}).empty()); }
  SUBCASE("utc midnight boundary") {
    auto w = window_by_day({make_post("1", "A", "2020-06-01T23:59:59Z"), make_post("2", "A", "2020-06-02T00:00:00Z")});
    REQUIRE(w.at("A").size() == 2);
    CHECK(w.at("A")[0].posts.size() == 1);
    CHECK(w.at("A")[1].posts.size() == 1);
    CHECK(format_day(w.at("A")[0].day) == "2020-06-01");
    CHECK(format_day(w.at("A")[1].day) == "2020-06-02");
  }
  SUBCASE("partition matches grouping by date string") {
    Rng rng(3);
    std::vector<PostRecord> posts;
    for (int i = 0; i < 100; ++i) {
      auto p = make_post("p" + std::to_string(i), "a" + std::to_string(rng.below(4)), "2020-06-01T00:00:00Z");
      p.created_at += std::chrono::seconds(rng.below(86400 * 10));
      posts.push_back(p);
    }
    std::map<std::pair<std::string, std::string>, std::set<std::string>> expect;
    for (const auto& p : posts) expect[{p.author_id, format_timestamp(p.created_at).substr(0, 10)}].insert(p.post_id);

    std::map<std::pair<std::string, std::string>, std::set<std::string>> got;
    std::size_t total = 0;
    for (const auto& [agent, windows] : window_by_day(posts)) {
      for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        CHECK(w.agent_id == agent);
        CHECK(!w.posts.empty());
        if (i) CHECK(windows[i - 1].day < w.day);
        for (std::size_t k = 1; k < w.posts.size(); ++k)
          CHECK(std::tie(w.posts[k - 1].created_at, w.posts[k - 1].post_id) <
                std::tie(w.posts[k].created_at, w.posts[k].post_id));
        for (const auto& p : w.posts) {
          CHECK(day_of(p.created_at) == w.day);
          got[{agent, format_day(w.day)}].insert(p.post_id);
          ++total;
        }
      }
    }
    CHECK(total == posts.size());
    CHECK(got == expect);
  }
}

TEST_CASE("filter_consistent_agents") {
  using S = std::set<std::string>;
  CHECK(filter_consistent_agents({S{"A", "B"}}) == S{"A", "B"});
  CHECK(filter_consistent_agents({S{"A", "B", "C"}, S{"B", "C"}, S{"C", "B"}}) == S{"B", "C"});

  Rng rng(5);
  std::vector<S> snaps(6);
  for (auto& s : snaps)
    while (s.size() < 1000) s.insert(std::to_string(rng.below(1500)));
  S fold = snaps[0];
  for (std::size_t i = 1; i < snaps.size(); ++i) {
    S next;
    std::set_intersection(fold.begin(), fold.end(), snaps[i].begin(), snaps[i].end(), std::inserter(next, next.end()));
    fold = next;
  }
  const S got = filter_consistent_agents(snaps);
  CHECK(got == fold);
  for (const auto& s : snaps) CHECK(std::includes(s.begin(), s.end(), got.begin(), got.end()));
}

TEST_CASE("monthly snapshots") {
  auto m = monthly_snapshots({make_post("1", "A", "2020-06-30T23:00:00Z"), make_post("2", "B", "2020-07-01T00:00:00Z"),
                              make_post("3", "A", "2020-07-02T00:00:00Z")});
  REQUIRE(m.size() == 2);
  CHECK(m.at("2020-06") == std::set<std::string>{"A"});
  CHECK(m.at("2020-07") == std::set<std::string>{"A", "B"});
}
