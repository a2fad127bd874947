#pragma once

// Line-delimited post archive ingestion.
//
// One JSON object per line; the field layout is documented in
// docs/archive_schema.md. Malformed lines are counted and skipped. A run
// where more than half of the non-blank lines are malformed is rejected as
// the wrong format.

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cyborg/timeutil.hpp"

namespace cyborg::ingest {

struct ProfileSnapshot {
  long long followers_count = 0;
  long long friends_count = 0;
  long long statuses_count = 0;
  Timestamp account_created_at{};
  bool is_verified = false;
  std::optional<bool> is_suspended;

  bool operator==(const ProfileSnapshot&) const = default;
};

struct PostRecord {
  std::string post_id;
  std::string author_id;
  Timestamp created_at{};
  std::string text;
  std::vector<std::string> hashtags;  // lowercase, no '#'
  std::optional<std::string> retweet_of;
  std::optional<std::string> quote_of;
  std::vector<std::string> mentions;
  std::string source_client;
  ProfileSnapshot author_profile;

  bool operator==(const PostRecord&) const = default;
};

struct ParseReport {
  std::size_t ok = 0;
  std::size_t skipped = 0;
  std::vector<std::string> errors;  // first kMaxErrors messages, "line N: reason"

  static constexpr std::size_t kMaxErrors = 10;
};

struct ParseResult {
  std::vector<PostRecord> records;
  ParseReport report;
};

// Throws IoError if the stream cannot be read, FormatError if more than 50%
// of the non-blank lines are malformed. Blank lines are ignored.
ParseResult parse_archive(std::istream& in);
ParseResult parse_archive_file(const std::filesystem::path& path);

// Parses one record; throws FormatError with a reason on malformed input.
PostRecord parse_record(std::string_view line);

// Single-line JSON encoding accepted by parse_record (keys sorted).
std::string serialize_record(const PostRecord& post);

// Lowercases ASCII letters and strips leading '#'. Returns nullopt when the
// tag is empty or still contains '#'.
std::optional<std::string> normalize_hashtag(std::string_view tag);

struct DailyWindow {
  std::string agent_id;
  Day day{};
  std::vector<PostRecord> posts;  // ordered by (created_at, post_id)
};

// agent_id -> windows strictly increasing by UTC calendar day.
std::map<std::string, std::vector<DailyWindow>> window_by_day(const std::vector<PostRecord>& posts);

// month ("YYYY-MM") -> set of authors active in that month.
std::map<std::string, std::set<std::string>> monthly_snapshots(const std::vector<PostRecord>& posts);

// Exact intersection of all snapshots. Throws InvalidArgument("no snapshots")
// for an empty list.
std::set<std::string> filter_consistent_agents(const std::vector<std::set<std::string>>& snapshots);

}  // namespace cyborg::ingest
