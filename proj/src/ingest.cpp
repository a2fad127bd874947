#include "cyborg/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "cyborg/error.hpp"

namespace cyborg::ingest {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& reason) { throw FormatError(reason); }

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) fail(path + ": expected object");
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) fail("missing field '" + path + (path.empty() ? "" : ".") + key + "'");
  return *it;
}

const json* optional_field(const json& obj, const char* key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

std::string as_id(const json& v, const std::string& field) {
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (s.empty()) fail("field '" + field + "' is empty");
    return s;
  }
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  fail("field '" + field + "' must be a string or integer id");
}

long long as_count(const json& v, const std::string& field) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) fail("field '" + field + "' must be an integer");
  auto n = v.get<long long>();
  if (n < 0) fail("field '" + field + "' must be nonnegative");
  return n;
}

Timestamp as_time(const json& v, const std::string& field) {
  if (!v.is_string()) fail("field '" + field + "' must be a timestamp string");
  auto t = parse_timestamp(v.get_ref<const std::string&>());
  if (!t) fail("field '" + field + "' is not YYYY-MM-DDTHH:MM:SSZ");
  return *t;
}

std::optional<std::string> nested_user_id(const json& obj, const char* key) {
  const json* status = optional_field(obj, key);
  if (!status) return std::nullopt;
  const json& user = require(*status, "user", key);
  return as_id(require(user, "id", std::string(key) + ".user"), std::string(key) + ".user.id");
}

}  // namespace

std::optional<std::string> normalize_hashtag(std::string_view tag) {
  while (!tag.empty() && tag.front() == '#') tag.remove_prefix(1);
  if (tag.empty() || tag.find('#') != std::string_view::npos) return std::nullopt;
  std::string out(tag);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

PostRecord parse_record(std::string_view line) {
  json doc = json::parse(line, nullptr, false);
  if (doc.is_discarded()) fail("invalid JSON");
  if (!doc.is_object()) fail("record is not a JSON object");

  PostRecord post;
  post.post_id = as_id(require(doc, "id", ""), "id");
  const json& user = require(doc, "user", "");
  post.author_id = as_id(require(user, "id", "user"), "user.id");
  post.created_at = as_time(require(doc, "created_at", ""), "created_at");

  const json& text = require(doc, "text", "");
  if (!text.is_string()) fail("field 'text' must be a string");
  post.text = text.get<std::string>();

  const json& source = require(doc, "source", "");
  if (!source.is_string()) fail("field 'source' must be a string");
  post.source_client = source.get<std::string>();

  ProfileSnapshot& prof = post.author_profile;
  prof.followers_count = as_count(require(user, "followers_count", "user"), "user.followers_count");
  prof.friends_count = as_count(require(user, "friends_count", "user"), "user.friends_count");
  prof.statuses_count = as_count(require(user, "statuses_count", "user"), "user.statuses_count");
  prof.account_created_at = as_time(require(user, "created_at", "user"), "user.created_at");
  const json& verified = require(user, "verified", "user");
  if (!verified.is_boolean()) fail("field 'user.verified' must be a boolean");
  prof.is_verified = verified.get<bool>();
  if (const json* suspended = optional_field(user, "suspended")) {
    if (!suspended->is_boolean()) fail("field 'user.suspended' must be a boolean");
    prof.is_suspended = suspended->get<bool>();
  }
  if (prof.account_created_at > post.created_at) fail("user.created_at is after the post's created_at");

  const json& entities = require(doc, "entities", "");
  const json& tags = require(entities, "hashtags", "entities");
  if (!tags.is_array()) fail("field 'entities.hashtags' must be a list");
  for (const json& t : tags) {
    if (!t.is_string()) fail("entities.hashtags entries must be strings");
    auto norm = normalize_hashtag(t.get_ref<const std::string&>());
    if (!norm) fail("invalid hashtag '" + t.get<std::string>() + "'");
    post.hashtags.push_back(std::move(*norm));
  }
  const json& mentions = require(entities, "user_mentions", "entities");
  if (!mentions.is_array()) fail("field 'entities.user_mentions' must be a list");
  for (const json& m : mentions) post.mentions.push_back(as_id(m, "entities.user_mentions[]"));

  post.retweet_of = nested_user_id(doc, "retweeted_status");
  post.quote_of = nested_user_id(doc, "quoted_status");
  return post;
}

std::string serialize_record(const PostRecord& post) {
  json user = {
      {"id", post.author_id},
      {"followers_count", post.author_profile.followers_count},
      {"friends_count", post.author_profile.friends_count},
      {"statuses_count", post.author_profile.statuses_count},
      {"created_at", format_timestamp(post.author_profile.account_created_at)},
      {"verified", post.author_profile.is_verified},
  };
  if (post.author_profile.is_suspended) user["suspended"] = *post.author_profile.is_suspended;
  json doc = {
      {"id", post.post_id},
      {"user", std::move(user)},
      {"created_at", format_timestamp(post.created_at)},
      {"text", post.text},
      {"entities", {{"hashtags", post.hashtags}, {"user_mentions", post.mentions}}},
      {"source", post.source_client},
  };
  if (post.retweet_of) doc["retweeted_status"] = {{"user", {{"id", *post.retweet_of}}}};
  if (post.quote_of) doc["quoted_status"] = {{"user", {{"id", *post.quote_of}}}};
  return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

ParseResult parse_archive(std::istream& in) {
  if (!in) throw IoError("archive stream is not readable");
  ParseResult result;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  auto note_error = [&](const std::string& msg) {
    ++result.report.skipped;
    if (result.report.errors.size() < ParseReport::kMaxErrors)
      result.report.errors.push_back("line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      PostRecord post = parse_record(line);
      if (!seen_ids.insert(post.post_id).second) {
        note_error("duplicate post id '" + post.post_id + "'");
        continue;
      }
      result.records.push_back(std::move(post));
      ++result.report.ok;
    } catch (const FormatError& e) {
      note_error(e.what());
    }
  }
  if (in.bad()) throw IoError("read error after line " + std::to_string(line_no));
  if (result.report.skipped > result.report.ok) {
    std::string msg = "wrong format: " + std::to_string(result.report.skipped) + " of " +
                      std::to_string(result.report.skipped + result.report.ok) + " lines malformed";
    if (!result.report.errors.empty()) msg += " (first: " + result.report.errors.front() + ")";
    throw FormatError(msg);
  }
  return result;
}

ParseResult parse_archive_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open archive " + path.string());
  return parse_archive(in);
}

std::map<std::string, std::vector<DailyWindow>> window_by_day(const std::vector<PostRecord>& posts) {
  std::map<std::string, std::map<Day, std::vector<const PostRecord*>>> grouped;
  for (const auto& p : posts) grouped[p.author_id][day_of(p.created_at)].push_back(&p);

  std::map<std::string, std::vector<DailyWindow>> out;
  for (auto& [agent, days] : grouped) {
    auto& windows = out[agent];
    windows.reserve(days.size());
    for (auto& [day, ptrs] : days) {
      std::sort(ptrs.begin(), ptrs.end(), [](const PostRecord* a, const PostRecord* b) {
        if (a->created_at != b->created_at) return a->created_at < b->created_at;
        return a->post_id < b->post_id;
      });
      DailyWindow w{agent, day, {}};
      w.posts.reserve(ptrs.size());
      for (const PostRecord* p : ptrs) w.posts.push_back(*p);
      windows.push_back(std::move(w));
    }
  }
  return out;
}

std::map<std::string, std::set<std::string>> monthly_snapshots(const std::vector<PostRecord>& posts) {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& p : posts) out[format_month(day_of(p.created_at))].insert(p.author_id);
  return out;
}

std::set<std::string> filter_consistent_agents(const std::vector<std::set<std::string>>& snapshots) {
  if (snapshots.empty()) throw InvalidArgument("no snapshots");
  std::set<std::string> result = snapshots.front();
  for (std::size_t i = 1; i < snapshots.size() && !result.empty(); ++i) {
    std::set<std::string> next;
    std::set_intersection(result.begin(), result.end(), snapshots[i].begin(), snapshots[i].end(),
                          std::inserter(next, next.end()));
    result = std::move(next);
  }
  return result;
}

}  // namespace cyborg::ingest
