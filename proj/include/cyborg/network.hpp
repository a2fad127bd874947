#pragma once

// All-communication network and centrality measures.
//
// The graph is undirected: an edge {a, b} carries the number of retweets,
// quotes and mentions between a and b in either direction. Node values are
// returned as vectors aligned with CommGraph::nodes().

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cyborg/flips.hpp"
#include "cyborg/ingest.hpp"

namespace cyborg::network {

struct Edge {
  std::size_t u = 0;  // u < v
  std::size_t v = 0;
  double weight = 1.0;
};

struct Neighbor {
  std::size_t node = 0;
  double weight = 1.0;
};

class CommGraph {
 public:
  CommGraph() = default;

  // Nodes are sorted and deduplicated; edges refer to positions in the given
  // node list. Self-loops, weights < 1 and repeated pairs are rejected.
  CommGraph(std::vector<std::string> nodes, const std::vector<Edge>& edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }  // sorted by (u, v)
  const std::vector<Neighbor>& neighbors(std::size_t node) const { return adjacency_[node]; }
  std::optional<std::size_t> index_of(const std::string& id) const;
  double weight(const std::string& a, const std::string& b) const;  // 0 when absent

 private:
  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

// Nodes are every author and every interaction target; self-interactions are
// dropped. Independent of post order.
CommGraph build_comm_graph(const std::vector<ingest::PostRecord>& posts);

using NodeValues = std::vector<double>;

// Sum over unordered pairs {s, t} (s, t != v) of the fraction of shortest
// unweighted s-t paths through v.
NodeValues betweenness_raw(const CommGraph& graph, unsigned jobs = 1);

// betweenness_raw scaled by 2 / ((n-1)(n-2)); all zeros when n < 3.
NodeValues betweenness(const CommGraph& graph, unsigned jobs = 1);

struct EigenvectorResult {
  NodeValues values;       // unit norm on the component, 0 elsewhere
  double eigenvalue = 0.0;
  int iterations = 0;
  double residual = 0.0;   // ||A v - lambda v||_inf on the component
  std::size_t component_size = 0;
  bool largest_component_only = false;  // graph was disconnected
};

// Power iteration on (A + I) over the largest connected component (ties go to
// the component holding the smallest node id), starting from ones and
// normalizing each step. Converged when successive iterates differ by < tol
// in max-norm and the residual is < 10 * tol. Throws ConvergenceError
// carrying the last residual after max_iter steps, InvalidArgument on an
// empty graph.
EigenvectorResult eigenvector_centrality(const CommGraph& graph, double tol = 1e-8, int max_iter = 1000);

// Unweighted degree / (n - 1); zeros when n < 2.
NodeValues total_degree(const CommGraph& graph);

std::map<std::string, double> to_map(const CommGraph& graph, const NodeValues& values);

struct MetricColumn {
  std::string name;
  std::map<std::string, double> values;  // agent -> value
};

struct ComparisonRow {
  std::string metric;
  std::size_t n_cyborg = 0;
  std::size_t n_non_cyborg = 0;
  double cyborg_mean = 0.0;
  double non_cyborg_mean = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  bool significant = false;
  std::string higher;  // "Cyborg", "NonCyborg" or "" when not significant
};

// Welch t-test per metric between Cyborgs and all other classified agents.
// Agents without a class or without a value for a metric are left out of
// that row. Throws InvalidArgument when a group has fewer than 2 agents.
std::vector<ComparisonRow> compare_groups(const std::vector<MetricColumn>& metrics,
                                          const std::map<std::string, flips::AgentClass>& classes,
                                          double alpha = 0.001);

// Per-author profile metrics from the latest snapshot in the archive:
// "% verified accounts" (0 or 100), "Avg # retweets" (retweets authored),
// "Avg # followers", "Avg # friends".
std::vector<MetricColumn> profile_metrics(const std::vector<ingest::PostRecord>& posts);

}  // namespace cyborg::network
