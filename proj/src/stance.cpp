#include "cyborg/stance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cyborg/error.hpp"

namespace cyborg::stance {

SeedLexicon parse_lexicon(std::string_view text, std::string name) {
  SeedLexicon lex;
  lex.name = std::move(name);
  std::set<std::string>* section = nullptr;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string item = line.substr(first, last - first + 1);
    const std::string where = lex.name + " line " + std::to_string(line_no);
    if (item == "[pro]") {
      section = &lex.pro;
    } else if (item == "[anti]") {
      section = &lex.anti;
    } else if (item.front() == '[') {
      throw FormatError(where + ": unknown section " + item);
    } else if (!section) {
      throw FormatError(where + ": hashtag outside a section");
    } else {
      auto tag = ingest::normalize_hashtag(item);
      if (!tag) throw FormatError(where + ": invalid hashtag '" + item + "'");
      section->insert(*tag);
    }
  }
  for (const auto& tag : lex.pro)
    if (lex.anti.count(tag)) throw FormatError(lex.name + ": '" + tag + "' is both pro and anti");
  return lex;
}

SeedLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_lexicon(text.str(), path.stem().string());
}

SeedLexicon swapped(const SeedLexicon& lexicon) { return {lexicon.name, lexicon.anti, lexicon.pro}; }

double Bipartite::weight(const std::string& user, const std::string& hashtag) const {
  auto u = std::lower_bound(users.begin(), users.end(), user);
  auto h = std::lower_bound(hashtags.begin(), hashtags.end(), hashtag);
  if (u == users.end() || *u != user || h == hashtags.end() || *h != hashtag) return 0.0;
  const std::size_t ui = u - users.begin(), hi = h - hashtags.begin();
  auto e = std::lower_bound(edges.begin(), edges.end(), std::pair{ui, hi},
                            [](const BipartiteEdge& a, const std::pair<std::size_t, std::size_t>& k) {
                              return std::pair{a.user, a.hashtag} < k;
                            });
  return e != edges.end() && e->user == ui && e->hashtag == hi ? e->weight : 0.0;
}

Bipartite build_bipartite(const std::vector<ingest::PostRecord>& posts) {
  std::map<std::pair<std::string, std::string>, double> counts;
  std::set<std::string> users, tags;
  for (const auto& p : posts) {
    std::set<std::string> unique(p.hashtags.begin(), p.hashtags.end());
    for (const auto& t : unique) {
      counts[{p.author_id, t}] += 1.0;
      users.insert(p.author_id);
      tags.insert(t);
    }
  }
  Bipartite g;
  g.users.assign(users.begin(), users.end());
  g.hashtags.assign(tags.begin(), tags.end());
  auto index = [](const std::vector<std::string>& v, const std::string& s) {
    return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), s) - v.begin());
  };
  for (const auto& [key, w] : counts) g.edges.push_back({index(g.users, key.first), index(g.hashtags, key.second), w});
  return g;
}

const char* to_string(StanceLabel label) {
  switch (label) {
    case StanceLabel::Pro: return "Pro";
    case StanceLabel::Anti: return "Anti";
    case StanceLabel::Neutral: return "Neutral";
  }
  return "?";
}

StanceLabel label_for(double score, double neutral_band) {
  if (score > neutral_band) return StanceLabel::Pro;
  if (score < -neutral_band) return StanceLabel::Anti;
  return StanceLabel::Neutral;
}

void StanceOptions::validate() const {
  if (max_iter < 1) throw InvalidArgument("stance max_iter must be >= 1");
  if (!(tol > 0.0)) throw InvalidArgument("stance tol must be > 0");
  if (!(neutral_band >= 0.0 && neutral_band < 1.0)) throw InvalidArgument("stance neutral_band must be in [0, 1)");
}

StanceResult propagate_stance(const Bipartite& graph, const SeedLexicon& lexicon, const StanceOptions& options) {
  options.validate();
  const std::size_t nu = graph.users.size(), nh = graph.hashtags.size();

  struct Adj {
    std::size_t other;
    double weight;
  };
  std::vector<std::vector<Adj>> user_adj(nu), tag_adj(nh);
  for (const auto& e : graph.edges) {
    user_adj[e.user].push_back({e.hashtag, e.weight});
    tag_adj[e.hashtag].push_back({e.user, e.weight});
  }

  StanceResult result;
  std::vector<double> u(nu, 0.0), h(nh, 0.0);
  std::vector<bool> seed(nh, false);
  auto mark = [&](const std::set<std::string>& tags, double value) {
    for (const auto& t : tags) {
      auto it = std::lower_bound(graph.hashtags.begin(), graph.hashtags.end(), t);
      if (it == graph.hashtags.end() || *it != t) {
        result.unused_seeds.push_back(t);
        continue;
      }
      const std::size_t j = it - graph.hashtags.begin();
      seed[j] = true;
      h[j] = value;
    }
  };
  mark(lexicon.pro, 1.0);
  mark(lexicon.anti, -1.0);
  std::sort(result.unused_seeds.begin(), result.unused_seeds.end());

  auto weighted_mean = [](const std::vector<Adj>& adj, const std::vector<double>& values) {
    double num = 0.0, den = 0.0;
    for (const Adj& a : adj) {
      num += a.weight * values[a.other];
      den += a.weight;
    }
    return den > 0.0 ? num / den : 0.0;
  };

  std::vector<double> u_next(nu), h_next(nh);
  result.converged = nu == 0 && nh == 0;
  for (int it = 1; it <= options.max_iter && !result.converged; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < nu; ++i) {
      u_next[i] = weighted_mean(user_adj[i], h);
      change = std::max(change, std::abs(u_next[i] - u[i]));
    }
    for (std::size_t j = 0; j < nh; ++j) {
      h_next[j] = seed[j] ? h[j] : weighted_mean(tag_adj[j], u);
      change = std::max(change, std::abs(h_next[j] - h[j]));
    }
    u.swap(u_next);
    h.swap(h_next);
    result.iterations = it;
    result.residuals.push_back(change);
    result.converged = change < options.tol;
  }

  for (std::size_t i = 0; i < nu; ++i)
    result.users[graph.users[i]] = {u[i], label_for(u[i], options.neutral_band)};
  for (std::size_t j = 0; j < nh; ++j)
    result.hashtags[graph.hashtags[j]] = {h[j], label_for(h[j], options.neutral_band)};
  return result;
}

StanceStrata split_by_stance_and_class(const std::map<std::string, StanceAssignment>& users,
                                       const std::map<std::string, flips::AgentClass>& classes) {
  StanceStrata s;
  for (const auto& [agent, a] : users) {
    auto c = classes.find(agent);
    if (c == classes.end() || a.label == StanceLabel::Neutral) continue;
    const bool cyborg = c->second == flips::AgentClass::Cyborg;
    if (a.label == StanceLabel::Pro)
      (cyborg ? s.pro_cyborg : s.pro_non_cyborg).push_back(agent);
    else
      (cyborg ? s.anti_cyborg : s.anti_non_cyborg).push_back(agent);
  }
  return s;
}

const std::vector<std::string>& stratum_names() {
  static const std::vector<std::string> names{"pro_cyborg", "pro_noncyborg", "anti_cyborg", "anti_noncyborg"};
  return names;
}

const std::vector<std::string>& stratum(const StanceStrata& strata, std::size_t index) {
  switch (index) {
    case 0: return strata.pro_cyborg;
    case 1: return strata.pro_non_cyborg;
    case 2: return strata.anti_cyborg;
    case 3: return strata.anti_non_cyborg;
  }
  throw InvalidArgument("stratum index out of range");
}

std::vector<ingest::PostRecord> posts_by(const std::vector<ingest::PostRecord>& posts,
                                         const std::vector<std::string>& agents) {
  std::vector<ingest::PostRecord> out;
  for (const auto& p : posts)
    if (std::binary_search(agents.begin(), agents.end(), p.author_id)) out.push_back(p);
  return out;
}

}  // namespace cyborg::stance
