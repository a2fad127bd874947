#include "cyborg/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cyborg/flips.hpp"
#include "cyborg/ingest.hpp"
#include "cyborg/network.hpp"
#include "cyborg/rng.hpp"
#include "cyborg/scoring.hpp"
#include "cyborg/stance.hpp"
#include "cyborg/stats.hpp"
#include "cyborg/synth.hpp"
#include "cyborg/topics.hpp"

#ifndef CYBORG_DATA_DIR
#define CYBORG_DATA_DIR "data"
#endif

namespace cyborg::pipeline {
namespace fs = std::filesystem;
using nlohmann::json;
using flips::AgentClass;

// ---------------------------------------------------------------------------
// Configuration

PipelineConfig default_config() {
  PipelineConfig c;
  const fs::path data = CYBORG_DATA_DIR;
  c.automation_sources = scoring::default_automation_sources();
  c.lexicon = data / "lexicons" / "vaccine.txt";
  c.stopwords = data / "stopwords.txt";
  c.analysis_date = *parse_day("2021-06-30");
  return c;
}

void PipelineConfig::validate() const {
  auto check = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(field, what);
  };
  check(!out.empty(), "output.dir", "must not be empty");
  check(jobs >= 1, "run.jobs", "must be >= 1");
  check(bot_threshold > 0.0 && bot_threshold < 1.0, "thresholds.bot_threshold", "must be in (0, 1)");
  check(min_flips >= 1, "thresholds.min_flips", "must be >= 1");
  check(min_mean_delta > 0.0 && min_mean_delta < 1.0, "thresholds.min_mean_delta", "must be in (0, 1)");
  check(percentile > 0.0 && percentile < 100.0, "thresholds.percentile", "must be in (0, 100)");
  check(eigen_tol > 0.0, "network.eigen_tol", "must be > 0");
  check(eigen_max_iter >= 1, "network.eigen_max_iter", "must be >= 1");
  check(significance > 0.0 && significance < 1.0, "network.significance", "must be in (0, 1)");
  check(stance_max_iter >= 1, "stance.max_iter", "must be >= 1");
  check(stance_tol > 0.0, "stance.tol", "must be > 0");
  check(neutral_band >= 0.0 && neutral_band < 1.0, "stance.neutral_band", "must be in [0, 1)");
  check(topics_k >= 1, "topics.k", "must be >= 1");
  check(topics_iterations >= 1, "topics.iterations", "must be >= 1");
  check(topics_alpha < 0.0 || topics_alpha > 0.0, "topics.alpha", "must be > 0 or 'auto'");
  check(topics_beta > 0.0, "topics.beta", "must be > 0");
  check(topics_top_n >= 1, "topics.top_n", "must be >= 1");
  check(synth_preset == "fixture" || synth_preset == "coronavirus" || synth_preset == "elections", "synth.preset",
        "must be fixture, coronavirus or elections");
  check(synth_agents >= 100, "synth.agents", "must be >= 100");
  check(synth_degree_inflation > 0.0, "synth.degree_inflation", "must be > 0");
  check(!automation_sources.empty(), "scoring.automation_sources", "must not be empty");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long long n = to_int(key, v);
  if (n < 0) throw ConfigError(key, "must be >= 0");
  return static_cast<std::size_t>(n);
}

std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void apply_setting_at(PipelineConfig& c, const std::string& key, const std::string& value, const fs::path& base) {
  auto path = [&]() -> fs::path {
    if (value.empty()) return {};
    fs::path p = value;
    return p.is_absolute() || base.empty() ? p : base / p;
  };
  if (key == "input.archive") c.input = path();
  else if (key == "input.ground_truth") c.ground_truth = path();
  else if (key == "output.dir") c.out = path();
  else if (key == "run.seed") {
    const long long s = to_int(key, value);
    if (s < 0) throw ConfigError(key, "must be >= 0");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "run.jobs") {
    const long long j = to_int(key, value);
    if (j < 1) throw ConfigError(key, "must be >= 1");
    c.jobs = static_cast<unsigned>(j);
  } else if (key == "scoring.weights") c.scorer_weights = path();
  else if (key == "scoring.automation_sources") c.automation_sources = to_list(value);
  else if (key == "thresholds.bot_threshold") c.bot_threshold = to_double(key, value);
  else if (key == "thresholds.min_flips") c.min_flips = static_cast<int>(to_int(key, value));
  else if (key == "thresholds.min_mean_delta") c.min_mean_delta = to_double(key, value);
  else if (key == "thresholds.percentile") c.percentile = to_double(key, value);
  else if (key == "network.eigen_tol") c.eigen_tol = to_double(key, value);
  else if (key == "network.eigen_max_iter") c.eigen_max_iter = static_cast<int>(to_int(key, value));
  else if (key == "network.significance") c.significance = to_double(key, value);
  else if (key == "stance.lexicon") c.lexicon = path();
  else if (key == "stance.max_iter") c.stance_max_iter = static_cast<int>(to_int(key, value));
  else if (key == "stance.tol") c.stance_tol = to_double(key, value);
  else if (key == "stance.neutral_band") c.neutral_band = to_double(key, value);
  else if (key == "topics.k") c.topics_k = to_count(key, value);
  else if (key == "topics.iterations") c.topics_iterations = static_cast<int>(to_int(key, value));
  else if (key == "topics.alpha") c.topics_alpha = value == "auto" ? -1.0 : to_double(key, value);
  else if (key == "topics.beta") c.topics_beta = to_double(key, value);
  else if (key == "topics.max_docs_per_stratum") c.topics_max_docs = to_count(key, value);
  else if (key == "topics.top_n") c.topics_top_n = to_count(key, value);
  else if (key == "topics.stopwords") c.stopwords = path();
  else if (key == "cohort.analysis_date") {
    auto d = parse_day(value);
    if (!d) throw ConfigError(key, "expected YYYY-MM-DD, got '" + value + "'");
    c.analysis_date = *d;
  } else if (key == "synth.preset") c.synth_preset = value;
  else if (key == "synth.agents") c.synth_agents = to_count(key, value);
  else if (key == "synth.degree_inflation") c.synth_degree_inflation = to_double(key, value);
  else throw ConfigError(key, "unknown key");
}

}  // namespace

void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value) {
  apply_setting_at(config, key, trim(value), {});
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  PipelineConfig c = default_config();
  const fs::path base = path.parent_path();
  std::string section, line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(path.string() + ":" + std::to_string(line_no), "bad section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no), "expected key = value");
    if (section.empty())
      throw ConfigError(path.string() + ":" + std::to_string(line_no), "key outside a section");
    apply_setting_at(c, section + "." + trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)),
                     base);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Artifact helpers

namespace {

fs::path stage_dir(const PipelineConfig& c, const char* stage) { return c.out / stage; }

const fs::path& require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw MissingArtifact(p);
  return p;
}

fs::path make_stage(const PipelineConfig& c, const char* stage) {
  const fs::path dir = stage_dir(c, stage);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v, int digits = 4) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << csv_field(fields[i]);
    out_ << '\n';
  }
  ~CsvWriter() noexcept(false) {
    out_.flush();
    if (!out_ && std::uncaught_exceptions() == 0) throw IoError("write failed: " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

// Rows keyed by the header; throws FormatError if a column is missing.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(require_file(path), std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != t.header.size()) throw FormatError(path.string() + ": ragged row");
    t.rows.push_back(std::move(fields));
  }
  return t;
}

double parse_num(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw FormatError("bad number '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw FormatError("bad integer '" + s + "'");
  return v;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(require_file(path), std::ios::binary);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw FormatError(path.string() + ": invalid JSON");
  return doc;
}

fs::path input_archive(const PipelineConfig& c) {
  return c.input.empty() ? stage_dir(c, "synth") / "archive.jsonl" : c.input;
}

std::vector<ingest::PostRecord> load_posts(const PipelineConfig& c) {
  return ingest::parse_archive_file(require_file(stage_dir(c, "ingest") / "posts.jsonl")).records;
}

scoring::LogisticScorer load_scorer(const PipelineConfig& c) {
  if (c.scorer_weights.empty()) return scoring::LogisticScorer::reference();
  if (!fs::is_regular_file(c.scorer_weights)) throw ConfigError("scoring.weights", "no such file " + c.scorer_weights.string());
  return scoring::LogisticScorer::from_file(c.scorer_weights);
}

struct ScoreRow {
  std::string agent;
  Day day;
  double p;
};

std::map<std::string, flips::ScoreSeries> load_series(const PipelineConfig& c) {
  const CsvTable t = read_csv(stage_dir(c, "score") / "scores.csv");
  const auto ia = t.column("agent_id"), id = t.column("day"), ip = t.column("probability");
  std::map<std::string, flips::ScoreSeries> out;
  for (const auto& r : t.rows) {
    auto day = parse_day(r[id]);
    if (!day) throw FormatError("scores.csv: bad day '" + r[id] + "'");
    auto& s = out[r[ia]];
    s.agent_id = r[ia];
    s.observations.push_back({*day, parse_num(r[ip])});
  }
  for (auto& [_, s] : out) {
    std::sort(s.observations.begin(), s.observations.end(),
              [](const flips::Observation& a, const flips::Observation& b) { return a.day < b.day; });
    s.validate();
  }
  return out;
}

std::vector<flips::FlipStats> load_flip_stats(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const auto ia = t.column("agent_id"), inf = t.column("n_flips"), ib = t.column("n_b2h"), ih = t.column("n_h2b"),
             id = t.column("mean_abs_delta"), is = t.column("score_stddev");
  std::vector<flips::FlipStats> out;
  for (const auto& r : t.rows)
    out.push_back({r[ia], parse_int(r[inf]), parse_int(r[ib]), parse_int(r[ih]), parse_num(r[id]), parse_num(r[is])});
  return out;
}

std::map<std::string, AgentClass> load_classes(const PipelineConfig& c) {
  const CsvTable t = read_csv(stage_dir(c, "classify") / "flips.csv");
  const auto ia = t.column("agent_id"), ic = t.column("class");
  std::map<std::string, AgentClass> out;
  for (const auto& r : t.rows) {
    auto cls = flips::parse_agent_class(r[ic]);
    if (!cls) throw FormatError("classify/flips.csv: bad class '" + r[ic] + "'");
    out[r[ia]] = *cls;
  }
  return out;
}

std::map<std::string, ingest::ProfileSnapshot> latest_profiles(const std::vector<ingest::PostRecord>& posts) {
  std::map<std::string, const ingest::PostRecord*> latest;
  for (const auto& p : posts) {
    auto& slot = latest[p.author_id];
    if (!slot || std::tie(slot->created_at, slot->post_id) < std::tie(p.created_at, p.post_id)) slot = &p;
  }
  std::map<std::string, ingest::ProfileSnapshot> out;
  for (const auto& [agent, post] : latest) out[agent] = post->author_profile;
  return out;
}

flips::CyborgThresholds thresholds_of(const PipelineConfig& c) {
  flips::CyborgThresholds t;
  t.bot_threshold = c.bot_threshold;
  t.min_flips = c.min_flips;
  t.min_mean_delta = c.min_mean_delta;
  return t;
}

synth::PopulationSpec synth_spec(const PipelineConfig& c) {
  const auto table = c.synth_preset == "elections" ? synth::elections_flip_table() : synth::coronavirus_flip_table();
  synth::PopulationSpec s = synth::spec_from_flip_table(c.synth_agents, table, c.seed);
  s.degree_inflation = c.synth_degree_inflation;
  s.analysis_date = c.analysis_date;
  s.bot_threshold = c.bot_threshold;
  s.min_flips = c.min_flips;
  s.min_mean_delta = c.min_mean_delta;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

void run_synth(const PipelineConfig& c) {
  c.validate();
  synth::PopulationSpec spec = synth_spec(c);
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("synth", e.what());
  }
  const synth::Population pop = synth::gen_population(spec, c.jobs, load_scorer(c));
  const fs::path dir = make_stage(c, "synth");
  {
    std::ofstream out(dir / "archive.jsonl", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "archive.jsonl").string());
    for (const auto& p : pop.posts) out << ingest::serialize_record(p) << '\n';
    if (!out) throw IoError("write failed: " + (dir / "archive.jsonl").string());
  }
  {
    CsvWriter w(dir / "ground_truth.csv", {"agent_id", "class", "true_flips", "true_mean_delta"});
    for (const auto& t : pop.truth)
      w.row({t.agent_id, flips::to_string(t.cls), std::to_string(t.true_flips), num(t.true_mean_delta)});
  }
  json info;
  info["preset"] = c.synth_preset;
  info["seed"] = c.seed;
  info["agents"] = pop.agents.size();
  info["posts"] = pop.posts.size();
  info["days"] = spec.days;
  info["start_day"] = format_day(spec.start_day);
  info["analysis_date"] = format_day(spec.analysis_date);
  info["degree_inflation"] = spec.degree_inflation;
  for (AgentClass cls : {AgentClass::Bot, AgentClass::Human, AgentClass::Cyborg}) {
    const auto& cs = spec.of(cls);
    json& j = info["classes"][flips::to_string(cls)];
    j["n_agents"] = cs.n_agents;
    j["suspension_rate"] = cs.suspension_rate;
    j["lifespan_mean_days"] = cs.lifespan_mean_days;
    j["lifespan_sd_days"] = cs.lifespan_sd_days;
    j["flip_pmf"] = cs.flip_pmf;
  }
  write_json(dir / "spec.json", info);
}

void run_ingest(const PipelineConfig& c) {
  c.validate();
  const fs::path archive = require_file(input_archive(c));
  ingest::ParseResult parsed = ingest::parse_archive_file(archive);
  auto& posts = parsed.records;

  const auto months = ingest::monthly_snapshots(posts);
  std::set<std::string> consistent;
  if (!months.empty()) {
    std::vector<std::set<std::string>> snapshots;
    for (const auto& [_, authors] : months) snapshots.push_back(authors);
    consistent = ingest::filter_consistent_agents(snapshots);
  }
  std::set<std::string> authors;
  for (const auto& p : posts) authors.insert(p.author_id);

  std::vector<const ingest::PostRecord*> kept;
  for (const auto& p : posts)
    if (consistent.count(p.author_id)) kept.push_back(&p);
  std::sort(kept.begin(), kept.end(), [](const ingest::PostRecord* a, const ingest::PostRecord* b) {
    return std::tie(a->author_id, a->created_at, a->post_id) < std::tie(b->author_id, b->created_at, b->post_id);
  });

  const fs::path dir = make_stage(c, "ingest");
  {
    std::ofstream out(dir / "posts.jsonl", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "posts.jsonl").string());
    for (const auto* p : kept) out << ingest::serialize_record(*p) << '\n';
    if (!out) throw IoError("write failed: " + (dir / "posts.jsonl").string());
  }
  json report;
  report["ok"] = parsed.report.ok;
  report["skipped"] = parsed.report.skipped;
  report["errors"] = parsed.report.errors;
  report["authors"] = authors.size();
  report["consistent_agents"] = consistent.size();
  report["posts_kept"] = kept.size();
  std::vector<std::string> month_names;
  for (const auto& [m, _] : months) month_names.push_back(m);
  report["months"] = month_names;
  write_json(dir / "report.json", report);
}

void run_score(const PipelineConfig& c) {
  c.validate();
  const auto posts = load_posts(c);
  const auto scorer = load_scorer(c);
  scoring::FeatureOptions options;
  options.automation_sources = c.automation_sources;
  const auto windows = ingest::window_by_day(posts);
  const auto scores = scoring::score_windows(windows, scorer, options, c.jobs);

  const fs::path dir = make_stage(c, "score");
  {
    CsvWriter w(dir / "scores.csv", {"agent_id", "day", "probability", "scorer_id"});
    for (const auto& s : scores) w.row({s.agent_id, format_day(s.day), num(s.probability), s.scorer_id});
  }
  std::vector<std::string> header{"agent_id", "day"};
  for (const auto& n : scoring::feature_names()) header.push_back(n);
  CsvWriter w(dir / "features.csv", header);
  for (const auto& [agent, days] : windows)
    for (const auto& win : days) {
      std::vector<std::string> row{agent, format_day(win.day)};
      for (double v : scoring::to_vector(scoring::extract_features(win, options))) row.push_back(num(v));
      w.row(row);
    }
}

void run_flips(const PipelineConfig& c) {
  c.validate();
  const auto series = load_series(c);
  const fs::path dir = make_stage(c, "flips");
  CsvWriter stats_out(dir / "flip_stats.csv",
                      {"agent_id", "n_flips", "n_b2h", "n_h2b", "mean_abs_delta", "score_stddev"});
  CsvWriter events_out(dir / "events.csv", {"agent_id", "from_day", "to_day", "direction", "abs_delta"});
  for (const auto& [agent, s] : series) {
    const auto events = flips::detect_flips(s, c.bot_threshold);
    const auto st = flips::flip_stats(s, events);
    stats_out.row({agent, std::to_string(st.n_flips), std::to_string(st.n_bot_to_human),
                   std::to_string(st.n_human_to_bot), num(st.mean_abs_delta), num(st.score_stddev)});
    for (const auto& e : events)
      events_out.row({agent, format_day(e.from_day), format_day(e.to_day), flips::to_string(e.direction),
                      num(e.abs_delta)});
  }
}

void run_calibrate(const PipelineConfig& c) {
  c.validate();
  const auto stats = load_flip_stats(stage_dir(c, "flips") / "flip_stats.csv");
  const auto cal = flips::calibrate(stats, c.percentile);
  json doc;
  doc["percentile"] = cal.percentile;
  doc["population"] = "agents_with_at_least_one_flip";
  doc["population_size"] = cal.population;
  doc["agents_total"] = stats.size();
  doc["flip_count_percentile"] = cal.flip_count_percentile;
  doc["min_flips"] = cal.min_flips;
  doc["min_flips_rule"] = "smallest n with share(flips >= n) <= 1 - percentile/100";
  doc["min_mean_delta"] = cal.min_mean_delta;
  doc["min_mean_delta_rule"] = "nearest-rank percentile of mean_abs_delta";
  json table = json::array();
  for (const auto& r : cal.flip_table)
    table.push_back({{"n_flips", r.n_flips}, {"count", r.count}, {"cumulative", r.cumulative}});
  doc["flip_table"] = table;
  json hist = json::array();
  for (std::size_t b = 0; b < cal.delta_histogram.counts.size(); ++b)
    hist.push_back({{"lo", flips::DeltaHistogram::lower(b)},
                    {"hi", flips::DeltaHistogram::lower(b + 1)},
                    {"count", cal.delta_histogram.counts[b]}});
  doc["delta_histogram"] = hist;
  doc["delta_modal_bin_lo"] = flips::DeltaHistogram::lower(cal.delta_histogram.modal_bin());
  doc["configured"] = {{"bot_threshold", c.bot_threshold},
                       {"min_flips", c.min_flips},
                       {"min_mean_delta", c.min_mean_delta}};
  write_json(make_stage(c, "calibrate") / "calibration.json", doc);
}

void run_classify(const PipelineConfig& c) {
  c.validate();
  const auto thresholds = thresholds_of(c);
  thresholds.validate();
  const auto stats = load_flip_stats(stage_dir(c, "flips") / "flip_stats.csv");
  const auto series = load_series(c);
  const fs::path dir = make_stage(c, "classify");
  CsvWriter w(dir / "flips.csv",
              {"agent_id", "n_flips", "n_b2h", "n_h2b", "mean_abs_delta", "score_stddev", "class"});
  std::map<std::string, std::size_t> counts;
  for (const auto& st : stats) {
    auto it = series.find(st.agent_id);
    if (it == series.end()) throw FormatError("flip_stats.csv: agent " + st.agent_id + " has no scores");
    std::vector<scoring::BotLabel> labels;
    for (const auto& o : it->second.observations) labels.push_back(scoring::classify_bot(o.probability, c.bot_threshold));
    const AgentClass cls = flips::classify_agent(st, thresholds, labels);
    ++counts[flips::to_string(cls)];
    w.row({st.agent_id, std::to_string(st.n_flips), std::to_string(st.n_bot_to_human), std::to_string(st.n_human_to_bot),
           num(st.mean_abs_delta), num(st.score_stddev), flips::to_string(cls)});
  }
  json doc;
  doc["bot_threshold"] = c.bot_threshold;
  doc["min_flips"] = c.min_flips;
  doc["min_mean_delta"] = c.min_mean_delta;
  doc["class_counts"] = counts;
  write_json(dir / "thresholds.json", doc);
}

void run_network(const PipelineConfig& c) {
  c.validate();
  const auto posts = load_posts(c);
  const auto classes = load_classes(c);
  const network::CommGraph graph = network::build_comm_graph(posts);
  const fs::path dir = make_stage(c, "network");

  const auto between = network::betweenness(graph, c.jobs);
  const auto degree = network::total_degree(graph);
  network::EigenvectorResult eig;
  if (graph.node_count() > 0) eig = network::eigenvector_centrality(graph, c.eigen_tol, c.eigen_max_iter);
  else eig.values.clear();

  {
    CsvWriter w(dir / "centrality.csv", {"agent_id", "betweenness", "eigenvector", "total_degree", "class"});
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
      auto it = classes.find(graph.nodes()[i]);
      w.row({graph.nodes()[i], num(between[i]), num(eig.values[i]), num(degree[i]),
             it == classes.end() ? "" : flips::to_string(it->second)});
    }
  }

  auto metrics = network::profile_metrics(posts);
  metrics.push_back({"Betweenness centrality", network::to_map(graph, between)});
  metrics.push_back({"Eigenvector centrality", network::to_map(graph, eig.values)});
  metrics.push_back({"Degree centrality", network::to_map(graph, degree)});
  // Authors that never interact are isolated nodes with zero centrality.
  for (std::size_t m = 4; m < metrics.size(); ++m)
    for (const auto& [agent, _] : classes) metrics[m].values.emplace(agent, 0.0);
  const auto rows = network::compare_groups(metrics, classes, c.significance);
  {
    CsvWriter w(dir / "group_comparison.csv", {"metric", "cyborg_mean", "non_cyborg_mean", "n_cyborg", "n_non_cyborg",
                                               "t", "df", "p", "significant", "higher"});
    for (const auto& r : rows)
      w.row({r.metric, num(r.cyborg_mean), num(r.non_cyborg_mean), std::to_string(r.n_cyborg),
             std::to_string(r.n_non_cyborg), num(r.t), num(r.df), num(r.p), r.significant ? "true" : "false",
             r.higher});
  }
  json doc;
  doc["nodes"] = graph.node_count();
  doc["edges"] = graph.edge_count();
  doc["eigenvector"] = {{"eigenvalue_of_shifted", eig.eigenvalue},
                        {"iterations", eig.iterations},
                        {"residual", eig.residual},
                        {"component_size", eig.component_size},
                        {"largest_component_only", eig.largest_component_only}};
  doc["significance"] = c.significance;
  write_json(dir / "network.json", doc);
}

void run_stance(const PipelineConfig& c) {
  c.validate();
  const auto posts = load_posts(c);
  const auto classes = load_classes(c);
  if (!fs::is_regular_file(c.lexicon)) throw ConfigError("stance.lexicon", "no such file " + c.lexicon.string());
  const auto lexicon = stance::load_lexicon(c.lexicon);
  stance::StanceOptions options;
  options.max_iter = c.stance_max_iter;
  options.tol = c.stance_tol;
  options.neutral_band = c.neutral_band;
  const auto result = stance::propagate_stance(stance::build_bipartite(posts), lexicon, options);
  const auto strata = stance::split_by_stance_and_class(result.users, classes);

  const fs::path dir = make_stage(c, "stance");
  {
    CsvWriter w(dir / "agents.csv", {"agent_id", "score", "label", "class"});
    for (const auto& [agent, a] : result.users) {
      auto it = classes.find(agent);
      w.row({agent, num(a.score), stance::to_string(a.label), it == classes.end() ? "" : flips::to_string(it->second)});
    }
  }
  {
    CsvWriter w(dir / "hashtags.csv", {"hashtag", "score", "label", "seed"});
    for (const auto& [tag, a] : result.hashtags) {
      const char* seed = lexicon.pro.count(tag) ? "pro" : lexicon.anti.count(tag) ? "anti" : "";
      w.row({tag, num(a.score), stance::to_string(a.label), seed});
    }
  }
  json doc;
  doc["lexicon"] = lexicon.name;
  doc["iterations"] = result.iterations;
  doc["converged"] = result.converged;
  doc["final_residual"] = result.residuals.empty() ? 0.0 : result.residuals.back();
  doc["unused_seed_count"] = result.unused_seeds.size();
  doc["users"] = result.users.size();
  doc["hashtags"] = result.hashtags.size();
  for (std::size_t i = 0; i < stance::stratum_names().size(); ++i)
    doc["strata"][stance::stratum_names()[i]] = stance::stratum(strata, i).size();
  write_json(dir / "summary.json", doc);
}

void run_topics(const PipelineConfig& c) {
  c.validate();
  const auto posts = load_posts(c);
  const auto classes = load_classes(c);
  const CsvTable agents = read_csv(stage_dir(c, "stance") / "agents.csv");
  std::map<std::string, stance::StanceAssignment> users;
  {
    const auto ia = agents.column("agent_id"), is = agents.column("score");
    for (const auto& r : agents.rows) {
      const double s = parse_num(r[is]);
      users[r[ia]] = {s, stance::label_for(s, c.neutral_band)};
    }
  }
  if (!fs::is_regular_file(c.stopwords)) throw ConfigError("topics.stopwords", "no such file " + c.stopwords.string());
  const auto stopwords = topics::load_stopwords(c.stopwords);
  const auto strata = stance::split_by_stance_and_class(users, classes);
  const fs::path dir = make_stage(c, "topics");

  const std::size_t n_strata = stance::stratum_names().size();
  std::vector<json> docs(n_strata);
  std::vector<std::exception_ptr> errors(n_strata);
  auto work = [&](std::size_t s) {
    try {
      auto selected = stance::posts_by(posts, stance::stratum(strata, s));
      topics::Corpus corpus = topics::preprocess(selected, stopwords);
      const std::size_t available = corpus.documents.size();
      if (c.topics_max_docs > 0 && corpus.documents.size() > c.topics_max_docs) {
        // Deterministic sample, kept in archive order.
        std::vector<std::size_t> idx(corpus.documents.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(derive_seed(c.seed, 200 + s));
        for (std::size_t i = 0; i < c.topics_max_docs; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
        idx.resize(c.topics_max_docs);
        std::sort(idx.begin(), idx.end());
        std::vector<std::vector<std::string>> texts;
        std::vector<std::string> ids;
        for (std::size_t i : idx) {
          std::vector<std::string> words;
          for (std::size_t w : corpus.documents[i]) words.push_back(corpus.vocabulary[w]);
          texts.push_back(std::move(words));
          ids.push_back(corpus.doc_ids[i]);
        }
        corpus = topics::make_corpus(texts, ids);
      }
      json doc;
      doc["stratum"] = stance::stratum_names()[s];
      doc["agents"] = stance::stratum(strata, s).size();
      doc["documents_available"] = available;
      doc["documents_used"] = corpus.documents.size();
      doc["tokens"] = corpus.token_count();
      doc["k"] = c.topics_k;
      doc["iterations"] = c.topics_iterations;
      doc["seed"] = c.seed;
      doc["topics"] = json::array();
      if (corpus.token_count() < c.topics_k) {
        doc["skipped"] = "fewer tokens than topics";
      } else {
        topics::LdaOptions o;
        o.topics = c.topics_k;
        o.alpha = c.topics_alpha;
        o.beta = c.topics_beta;
        o.iterations = c.topics_iterations;
        o.seed = derive_seed(c.seed, 100 + s);
        const auto model = topics::lda_fit(corpus, o);
        doc["alpha"] = model.alpha;
        doc["beta"] = model.beta;
        for (std::size_t k = 0; k < model.topics; ++k) {
          json terms = json::array();
          for (const auto& [term, prob] : topics::top_terms(model, k, c.topics_top_n))
            terms.push_back({{"term", term}, {"probability", prob}});
          doc["topics"].push_back({{"topic", k}, {"terms", terms}});
        }
      }
      docs[s] = std::move(doc);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> pool;
    const unsigned workers = std::min<unsigned>(c.jobs, static_cast<unsigned>(n_strata));
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
      for (std::size_t s = next++; s < n_strata; s = next++) work(s);
    };
    if (workers <= 1) {
      loop();
    } else {
      for (unsigned j = 0; j < workers; ++j) pool.emplace_back(loop);
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (std::size_t s = 0; s < n_strata; ++s)
    write_json(dir / ("topics_" + stance::stratum_names()[s] + ".json"), docs[s]);
}

void run_cohort(const PipelineConfig& c) {
  c.validate();
  const auto posts = load_posts(c);
  const auto classes = load_classes(c);
  const auto report = stats::cohort_report(latest_profiles(posts), classes, c.analysis_date);
  const fs::path dir = make_stage(c, "cohort");
  {
    CsvWriter w(dir / "cohort.csv", {"class", "n", "n_suspended", "prop_suspended", "n_alive", "mean_lifespan_days",
                                     "sd_lifespan_days", "anova_f", "anova_p"});
    for (const auto& r : report.rows)
      w.row({flips::to_string(r.cls), std::to_string(r.n), std::to_string(r.n_suspended), num(r.prop_suspended),
             std::to_string(r.n_alive), r.lifespan_defined ? num(r.mean_lifespan_days) : "",
             r.n_alive >= 2 ? num(r.stddev_lifespan_days) : "", report.anova ? num(report.anova->f) : "",
             report.anova ? num(report.anova->p) : ""});
  }
  json doc;
  doc["analysis_date"] = format_day(c.analysis_date);
  doc["missing_suspension_flag"] = report.missing_suspension_flag;
  json rows = json::array();
  for (const auto& r : report.rows) {
    json j{{"class", flips::to_string(r.cls)},         {"n", r.n},
           {"n_suspended", r.n_suspended},             {"prop_suspended", r.prop_suspended},
           {"n_alive", r.n_alive},                     {"lifespan_defined", r.lifespan_defined}};
    if (r.lifespan_defined) {
      j["mean_lifespan_days"] = r.mean_lifespan_days;
      j["sd_lifespan_days"] = r.stddev_lifespan_days;
    }
    rows.push_back(j);
  }
  doc["rows"] = rows;
  if (report.anova)
    doc["anova"] = {{"f", report.anova->f},
                    {"df_between", report.anova->df_between},
                    {"df_within", report.anova->df_within},
                    {"p", report.anova->p}};
  json pts = json::array();
  for (const auto& [x, y] : report.fit_points) pts.push_back({{"class_code", x}, {"mean_lifespan_days", y}});
  doc["fit_points"] = pts;
  doc["class_encoding"] = {{"Cyborg", 0}, {"Human", 1}, {"Bot", 2}};
  if (report.fit) doc["fit"] = {{"slope", report.fit->slope}, {"intercept", report.fit->intercept}};
  write_json(dir / "cohort.json", doc);
}

void run_report(const PipelineConfig& c) {
  c.validate();
  const fs::path classify_csv = stage_dir(c, "classify") / "flips.csv";
  const auto stats = load_flip_stats(classify_csv);
  const auto classes = load_classes(c);
  const json calibration = read_json(stage_dir(c, "calibrate") / "calibration.json");
  const CsvTable comparison = read_csv(stage_dir(c, "network") / "group_comparison.csv");
  const json stance_summary = read_json(stage_dir(c, "stance") / "summary.json");
  const json cohort = read_json(stage_dir(c, "cohort") / "cohort.json");
  std::vector<json> topic_docs;
  for (const auto& name : stance::stratum_names())
    topic_docs.push_back(read_json(stage_dir(c, "topics") / ("topics_" + name + ".json")));

  const fs::path dir = make_stage(c, "report");
  std::vector<flips::FlipStats> flippers;
  for (const auto& s : stats)
    if (s.n_flips >= 1) flippers.push_back(s);

  // Figure 1: flip-count proportions over agents with at least one flip.
  const auto table = flips::flip_count_distribution(flippers);
  {
    CsvWriter w(dir / "flip_proportions.csv", {"n_flips", "count", "proportion", "cumulative"});
    for (const auto& r : table)
      w.row({std::to_string(r.n_flips), std::to_string(r.count),
             num(static_cast<double>(r.count) / static_cast<double>(flippers.size())), num(r.cumulative)});
  }
  // Figure 2: histogram of per-agent mean flip deltas.
  const auto hist = flips::delta_distribution(flippers);
  {
    CsvWriter w(dir / "delta_histogram.csv", {"bin_lo", "bin_hi", "count", "proportion"});
    for (std::size_t b = 0; b < hist.counts.size(); ++b)
      w.row({num(flips::DeltaHistogram::lower(b)), num(flips::DeltaHistogram::lower(b + 1)),
             std::to_string(hist.counts[b]),
             num(hist.total ? static_cast<double>(hist.counts[b]) / static_cast<double>(hist.total) : 0.0)});
  }
  // Figure 3 and the flip-direction table, per class.
  struct ClassAgg {
    std::vector<double> stddev, b2h, h2b;
  };
  std::map<std::string, ClassAgg> agg;
  for (const auto& s : stats) {
    auto& a = agg[flips::to_string(classes.at(s.agent_id))];
    a.stddev.push_back(s.score_stddev);
    a.b2h.push_back(s.n_bot_to_human);
    a.h2b.push_back(s.n_human_to_bot);
  }
  auto sd = [](const std::vector<double>& v) { return v.size() >= 2 ? std::sqrt(stats::sample_variance(v)) : 0.0; };
  {
    CsvWriter w(dir / "score_stddev.csv", {"class", "n", "mean_score_stddev", "sd_score_stddev"});
    for (const auto& [cls, a] : agg)
      w.row({cls, std::to_string(a.stddev.size()), num(stats::mean(a.stddev)), num(sd(a.stddev))});
  }
  {
    CsvWriter w(dir / "flip_direction.csv",
                {"class", "n", "mean_bot_to_human", "sd_bot_to_human", "mean_human_to_bot", "sd_human_to_bot"});
    for (const auto& [cls, a] : agg)
      w.row({cls, std::to_string(a.b2h.size()), num(stats::mean(a.b2h)), num(sd(a.b2h)), num(stats::mean(a.h2b)),
             num(sd(a.h2b))});
  }
  {
    CsvWriter w(dir / "longevity_regression.csv", {"class", "class_code", "mean_lifespan_days", "fitted"});
    const bool has_fit = cohort.contains("fit");
    for (const auto& row : cohort["rows"]) {
      if (!row.value("lifespan_defined", false)) continue;
      const std::string cls = row["class"].get<std::string>();
      const double x = stats::class_code(*flips::parse_agent_class(cls));
      const double fitted =
          has_fit ? cohort["fit"]["intercept"].get<double>() + cohort["fit"]["slope"].get<double>() * x : 0.0;
      w.row({cls, num(x), num(row["mean_lifespan_days"].get<double>()), has_fit ? num(fitted) : ""});
    }
  }

  // Validation against generator ground truth, when available.
  fs::path truth_path = c.ground_truth;
  if (truth_path.empty() && c.input.empty()) truth_path = stage_dir(c, "synth") / "ground_truth.csv";
  std::optional<std::pair<std::size_t, std::size_t>> validation;  // (checked, mismatches)
  if (!truth_path.empty()) {
    const CsvTable truth = read_csv(truth_path);
    const auto ia = truth.column("agent_id"), ic = truth.column("class"), inf = truth.column("true_flips");
    std::map<std::string, const flips::FlipStats*> by_agent;
    for (const auto& s : stats) by_agent[s.agent_id] = &s;
    CsvWriter w(dir / "validation.csv", {"agent_id", "true_class", "class", "true_flips", "n_flips", "match"});
    std::size_t checked = 0, bad = 0;
    for (const auto& r : truth.rows) {
      auto cls = classes.find(r[ia]);
      auto st = by_agent.find(r[ia]);
      const std::string got = cls == classes.end() ? "" : flips::to_string(cls->second);
      const std::string flips_got = st == by_agent.end() ? "" : std::to_string(st->second->n_flips);
      const bool ok = got == r[ic] && flips_got == r[inf];
      ++checked;
      if (!ok) ++bad;
      w.row({r[ia], r[ic], got, r[inf], flips_got, ok ? "true" : "false"});
    }
    validation = std::make_pair(checked, bad);
  }

  std::ostringstream md;
  md << "# Cyborg analysis summary\n\n";
  md << "## Classification\n\n";
  md << "Thresholds: bot score >= " << short_num(c.bot_threshold) << ", Cyborg when flips >= " << c.min_flips
     << " and mean flip delta >= " << short_num(c.min_mean_delta) << ".\n\n";
  md << "| Class | Agents |\n|---|---|\n";
  for (const auto& [cls, a] : agg) md << "| " << cls << " | " << a.stddev.size() << " |\n";
  md << "\n## Calibration (" << short_num(calibration["percentile"].get<double>()) << "th percentile, "
     << calibration["population_size"].get<std::size_t>() << " agents with at least one flip)\n\n";
  md << "- nearest-rank flip-count percentile: " << short_num(calibration["flip_count_percentile"].get<double>())
     << "\n";
  md << "- calibrated min_flips: " << calibration["min_flips"].get<int>() << "\n";
  md << "- calibrated min_mean_delta: " << short_num(calibration["min_mean_delta"].get<double>()) << "\n";
  md << "- modal delta bin: [" << short_num(flips::DeltaHistogram::lower(hist.modal_bin())) << ", "
     << short_num(flips::DeltaHistogram::lower(hist.modal_bin() + 1)) << ")\n\n";
  md << "| Flips | Cumulative share |\n|---|---|\n";
  for (const auto& r : table)
    if (r.n_flips <= 5) md << "| <= " << r.n_flips << " | " << short_num(100.0 * r.cumulative) << "% |\n";
  md << "\n## Network comparison (Cyborg vs non-Cyborg, Welch t-test)\n\n";
  md << "| Metric | Cyborgs | Non-Cyborgs | p |\n|---|---|---|---|\n";
  {
    const auto im = comparison.column("metric"), icm = comparison.column("cyborg_mean"),
               inm = comparison.column("non_cyborg_mean"), ip = comparison.column("p"),
               ih = comparison.column("higher");
    for (const auto& r : comparison.rows) {
      const bool cy = r[ih] == "Cyborg", nc = r[ih] == "NonCyborg";
      md << "| " << r[im] << " | " << short_num(parse_num(r[icm])) << (cy ? "*" : "") << " | "
         << short_num(parse_num(r[inm])) << (nc ? "*" : "") << " | " << short_num(parse_num(r[ip]), 3) << " |\n";
    }
  }
  md << "\n`*` marks the significantly higher group (p < " << short_num(c.significance) << ").\n";
  md << "\n## Stance\n\n";
  md << "Lexicon `" << stance_summary["lexicon"].get<std::string>() << "`, "
     << stance_summary["iterations"].get<int>() << " sweeps, converged: "
     << (stance_summary["converged"].get<bool>() ? "yes" : "no") << ".\n\n";
  md << "| Stratum | Agents |\n|---|---|\n";
  for (const auto& name : stance::stratum_names())
    md << "| " << name << " | " << stance_summary["strata"][name].get<std::size_t>() << " |\n";
  md << "\n## Topics\n\n";
  for (const auto& doc : topic_docs) {
    md << "### " << doc["stratum"].get<std::string>() << "\n\n";
    if (doc["topics"].empty()) {
      md << "(no topics: " << doc.value("skipped", std::string("empty stratum")) << ")\n\n";
      continue;
    }
    for (const auto& t : doc["topics"]) {
      md << "- topic " << t["topic"].get<int>() << ":";
      for (const auto& term : t["terms"]) md << " " << term["term"].get<std::string>();
      md << "\n";
    }
    md << "\n";
  }
  md << "## Cohort (analysis date " << cohort["analysis_date"].get<std::string>() << ")\n\n";
  md << "| Class | Suspended | Lifespan of alive accounts (days) |\n|---|---|---|\n";
  for (const auto& row : cohort["rows"]) {
    md << "| " << row["class"].get<std::string>() << " | " << short_num(100.0 * row["prop_suspended"].get<double>())
       << "% | ";
    if (row["lifespan_defined"].get<bool>())
      md << short_num(row["mean_lifespan_days"].get<double>()) << " +- " << short_num(row["sd_lifespan_days"].get<double>());
    else
      md << "n/a";
    md << " |\n";
  }
  if (cohort.contains("anova")) md << "\nANOVA over lifespans: p = " << short_num(cohort["anova"]["p"].get<double>(), 3) << "\n";
  if (cohort.contains("fit"))
    md << "Linear fit over class means (Cyborg=0, Human=1, Bot=2): slope " << short_num(cohort["fit"]["slope"].get<double>())
       << "\n";
  if (validation)
    md << "\n## Ground truth\n\n" << validation->first << " agents checked, " << validation->second
       << " mismatches.\n";
  std::ofstream out(dir / "summary.md", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "summary.md").string());
  out << md.str();
}

void run_all(const PipelineConfig& c) {
  c.validate();
  if (c.input.empty()) run_synth(c);
  run_ingest(c);
  run_score(c);
  run_flips(c);
  run_calibrate(c);
  run_classify(c);
  run_network(c);
  run_stance(c);
  run_topics(c);
  run_cohort(c);
  run_report(c);
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"ingest", "score",  "flips",  "calibrate", "classify", "network",
                                              "stance", "topics", "cohort", "synth",     "report",   "all"};
  return names;
}

void run(const std::string& subcommand, const PipelineConfig& config) {
  if (subcommand == "ingest") run_ingest(config);
  else if (subcommand == "score") run_score(config);
  else if (subcommand == "flips") run_flips(config);
  else if (subcommand == "calibrate") run_calibrate(config);
  else if (subcommand == "classify") run_classify(config);
  else if (subcommand == "network") run_network(config);
  else if (subcommand == "stance") run_stance(config);
  else if (subcommand == "topics") run_topics(config);
  else if (subcommand == "cohort") run_cohort(config);
  else if (subcommand == "synth") run_synth(config);
  else if (subcommand == "report") run_report(config);
  else if (subcommand == "all") run_all(config);
  else throw ConfigError("subcommand", "unknown subcommand '" + subcommand + "'");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 1;
  if (dynamic_cast<const MissingArtifact*>(&e)) return 2;
  return 3;
}

}  // namespace cyborg::pipeline
