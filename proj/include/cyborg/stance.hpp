#pragma once

// Stance propagation over the user-hashtag bipartite graph.
//
// Update rule (Jacobi, no damping): every user takes the weighted mean of its
// hashtags' scores from the previous sweep, every non-seed hashtag the
// weighted mean of its users' previous scores, and seed hashtags stay at +1
// (pro) or -1 (anti). Non-seed scores start at 0, so anything with no path to
// a seed stays at 0 and is labeled Neutral.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cyborg/flips.hpp"
#include "cyborg/ingest.hpp"

namespace cyborg::stance {

struct SeedLexicon {
  std::string name;
  std::set<std::string> pro;
  std::set<std::string> anti;
};

// `[pro]` / `[anti]` sections, one hashtag per line. Tags are normalized like
// post hashtags and duplicates collapse. Throws FormatError on a tag outside
// a section, an unknown section, an invalid tag, or a tag in both sections.
SeedLexicon parse_lexicon(std::string_view text, std::string name);
SeedLexicon load_lexicon(const std::filesystem::path& path);

// Pro and anti swapped.
SeedLexicon swapped(const SeedLexicon& lexicon);

struct BipartiteEdge {
  std::size_t user = 0;
  std::size_t hashtag = 0;
  double weight = 0.0;  // posts by the user containing the hashtag
};

struct Bipartite {
  std::vector<std::string> users;     // sorted
  std::vector<std::string> hashtags;  // sorted
  std::vector<BipartiteEdge> edges;   // sorted by (user, hashtag)

  double weight(const std::string& user, const std::string& hashtag) const;  // 0 when absent
};

// A hashtag repeated inside one post counts once for that post.
Bipartite build_bipartite(const std::vector<ingest::PostRecord>& posts);

enum class StanceLabel { Pro, Anti, Neutral };
const char* to_string(StanceLabel label);

// Pro if score > band, Anti if score < -band, else Neutral.
StanceLabel label_for(double score, double neutral_band);

struct StanceAssignment {
  double score = 0.0;
  StanceLabel label = StanceLabel::Neutral;
};

struct StanceOptions {
  int max_iter = 100;
  double tol = 1e-6;
  double neutral_band = 0.1;

  void validate() const;
};

struct StanceResult {
  std::map<std::string, StanceAssignment> users;
  std::map<std::string, StanceAssignment> hashtags;
  int iterations = 0;
  std::vector<double> residuals;  // max score change per sweep
  bool converged = false;         // last residual < tol
  std::vector<std::string> unused_seeds;  // seeds absent from the graph
};

StanceResult propagate_stance(const Bipartite& graph, const SeedLexicon& lexicon, const StanceOptions& options = {});

// Agents split by stance and class; Neutral agents and agents without a
// class are left out. Each list is sorted.
struct StanceStrata {
  std::vector<std::string> pro_cyborg;
  std::vector<std::string> pro_non_cyborg;
  std::vector<std::string> anti_cyborg;
  std::vector<std::string> anti_non_cyborg;
};

StanceStrata split_by_stance_and_class(const std::map<std::string, StanceAssignment>& users,
                                       const std::map<std::string, flips::AgentClass>& classes);

// Stratum names used in artifact file names, in StanceStrata field order.
const std::vector<std::string>& stratum_names();
const std::vector<std::string>& stratum(const StanceStrata& strata, std::size_t index);

// Posts whose author is in `agents` (sorted), in input order.
std::vector<ingest::PostRecord> posts_by(const std::vector<ingest::PostRecord>& posts,
                                         const std::vector<std::string>& agents);

}  // namespace cyborg::stance
