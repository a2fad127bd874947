#include "cyborg/network.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "cyborg/error.hpp"
#include "cyborg/stats.hpp"

namespace cyborg::network {

CommGraph::CommGraph(std::vector<std::string> nodes, const std::vector<Edge>& edges) {
  std::vector<std::size_t> order(nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return nodes[a] < nodes[b]; });
  std::vector<std::size_t> remap(nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && nodes[order[i]] == nodes[order[i - 1]]) throw InvalidArgument("duplicate node id " + nodes[order[i]]);
    remap[order[i]] = i;
    nodes_.push_back(nodes[order[i]]);
  }
  for (const Edge& e : edges) {
    if (e.u >= nodes.size() || e.v >= nodes.size()) throw InvalidArgument("edge endpoint out of range");
    if (e.u == e.v) throw InvalidArgument("self-loop on " + nodes[e.u]);
    if (!(e.weight >= 1.0)) throw InvalidArgument("edge weight must be >= 1");
    std::size_t u = remap[e.u], v = remap[e.v];
    if (u > v) std::swap(u, v);
    edges_.push_back({u, v, e.weight});
  }
  std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
  for (std::size_t i = 1; i < edges_.size(); ++i)
    if (edges_[i].u == edges_[i - 1].u && edges_[i].v == edges_[i - 1].v)
      throw InvalidArgument("repeated edge {" + nodes_[edges_[i].u] + "," + nodes_[edges_[i].v] + "}");
  adjacency_.resize(nodes_.size());
  for (const Edge& e : edges_) {
    adjacency_[e.u].push_back({e.v, e.weight});
    adjacency_[e.v].push_back({e.u, e.weight});
  }
  for (auto& adj : adjacency_)
    std::sort(adj.begin(), adj.end(), [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
}

std::optional<std::size_t> CommGraph::index_of(const std::string& id) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id);
  if (it == nodes_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - nodes_.begin());
}

double CommGraph::weight(const std::string& a, const std::string& b) const {
  auto ia = index_of(a), ib = index_of(b);
  if (!ia || !ib) return 0.0;
  for (const Neighbor& nb : adjacency_[*ia])
    if (nb.node == *ib) return nb.weight;
  return 0.0;
}

CommGraph build_comm_graph(const std::vector<ingest::PostRecord>& posts) {
  std::map<std::string, std::size_t> ids;
  std::map<std::pair<std::string, std::string>, double> counts;
  auto touch = [&](const std::string& id) { ids.emplace(id, 0); };
  auto interact = [&](const std::string& a, const std::string& b) {
    touch(b);
    if (a == b) return;
    counts[a < b ? std::make_pair(a, b) : std::make_pair(b, a)] += 1.0;
  };
  for (const auto& p : posts) {
    touch(p.author_id);
    if (p.retweet_of) interact(p.author_id, *p.retweet_of);
    if (p.quote_of) interact(p.author_id, *p.quote_of);
    for (const auto& m : p.mentions) interact(p.author_id, m);
  }
  std::vector<std::string> nodes;
  nodes.reserve(ids.size());
  for (auto& [id, idx] : ids) {
    idx = nodes.size();
    nodes.push_back(id);
  }
  std::vector<Edge> edges;
  edges.reserve(counts.size());
  for (const auto& [pair, w] : counts) edges.push_back({ids[pair.first], ids[pair.second], w});
  return CommGraph(std::move(nodes), edges);
}

namespace {

// Brandes accumulation from one source; adds ordered-pair dependencies.
struct BrandesWorkspace {
  std::vector<long> dist;
  std::vector<double> sigma, delta;
  std::vector<std::size_t> order, queue;

  explicit BrandesWorkspace(std::size_t n) : dist(n), sigma(n), delta(n) {
    order.reserve(n);
    queue.reserve(n);
  }

  void run(const CommGraph& g, std::size_t s, std::vector<double>& acc) {
    std::fill(dist.begin(), dist.end(), -1L);
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    order.clear();
    queue.clear();
    dist[s] = 0;
    sigma[s] = 1.0;
    queue.push_back(s);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t u = queue[head];
      order.push_back(u);
      for (const Neighbor& nb : g.neighbors(u)) {
        const std::size_t w = nb.node;
        if (dist[w] < 0) {
          dist[w] = dist[u] + 1;
          queue.push_back(w);
        }
        if (dist[w] == dist[u] + 1) sigma[w] += sigma[u];
      }
    }
    for (std::size_t k = order.size(); k-- > 0;) {
      const std::size_t w = order[k];
      for (const Neighbor& nb : g.neighbors(w)) {
        const std::size_t v = nb.node;
        if (dist[v] == dist[w] - 1) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      }
      if (w != s) acc[w] += delta[w];
    }
  }
};

}  // namespace

NodeValues betweenness_raw(const CommGraph& graph, unsigned jobs) {
  const std::size_t n = graph.node_count();
  NodeValues total(n, 0.0);
  if (n == 0) return total;
  // Sources are split into fixed chunks reduced in chunk order, so the
  // floating-point result does not depend on the number of workers.
  const std::size_t chunks = std::min<std::size_t>(n, 64);
  const std::size_t chunk_size = (n + chunks - 1) / chunks;
  std::vector<NodeValues> partial(chunks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    BrandesWorkspace ws(n);
    for (std::size_t c = next++; c < chunks; c = next++) {
      partial[c].assign(n, 0.0);
      const std::size_t end = std::min(n, (c + 1) * chunk_size);
      for (std::size_t s = c * chunk_size; s < end; ++s) ws.run(graph, s, partial[c]);
    }
  };
  jobs = std::max(1u, jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (const auto& part : partial)
    for (std::size_t i = 0; i < part.size(); ++i) total[i] += part[i];
  // Each unordered pair was counted from both endpoints.
  for (double& x : total) x /= 2.0;
  return total;
}

NodeValues betweenness(const CommGraph& graph, unsigned jobs) {
  const std::size_t n = graph.node_count();
  if (n < 3) return NodeValues(n, 0.0);
  NodeValues b = betweenness_raw(graph, jobs);
  const double scale = 2.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
  for (double& x : b) x *= scale;
  return b;
}

EigenvectorResult eigenvector_centrality(const CommGraph& graph, double tol, int max_iter) {
  const std::size_t n = graph.node_count();
  if (n == 0) throw InvalidArgument("eigenvector_centrality: empty graph");

  std::vector<long> comp(n, -1);
  std::vector<std::size_t> best;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    std::vector<std::size_t> members{start};
    comp[start] = static_cast<long>(start);
    for (std::size_t head = 0; head < members.size(); ++head)
      for (const Neighbor& nb : graph.neighbors(members[head]))
        if (comp[nb.node] < 0) {
          comp[nb.node] = static_cast<long>(start);
          members.push_back(nb.node);
        }
    if (members.size() > best.size()) best = std::move(members);
  }
  std::sort(best.begin(), best.end());

  const std::size_t m = best.size();
  std::vector<std::size_t> local(n, std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < m; ++i) local[best[i]] = i;

  auto multiply = [&](const std::vector<double>& x, std::vector<double>& y) {  // y = A x
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (const Neighbor& nb : graph.neighbors(best[i])) s += nb.weight * x[local[nb.node]];
      y[i] = s;
    }
  };
  auto normalize = [](std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  };

  std::vector<double> x(m, 1.0), ax(m), next(m);
  normalize(x);
  EigenvectorResult r;
  r.component_size = m;
  r.largest_component_only = m < n;
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    multiply(x, ax);
    for (std::size_t i = 0; i < m; ++i) next[i] = ax[i] + x[i];
    normalize(next);
    double diff = 0.0;
    for (std::size_t i = 0; i < m; ++i) diff = std::max(diff, std::abs(next[i] - x[i]));
    x.swap(next);
    residual = diff;
    if (diff >= tol) continue;
    multiply(x, ax);
    double lambda = 0.0;
    for (std::size_t i = 0; i < m; ++i) lambda += x[i] * ax[i];
    double res = 0.0;
    for (std::size_t i = 0; i < m; ++i) res = std::max(res, std::abs(ax[i] - lambda * x[i]));
    residual = res;
    if (res < 10.0 * tol) {
      r.values.assign(n, 0.0);
      for (std::size_t i = 0; i < m; ++i) r.values[best[i]] = x[i];
      r.eigenvalue = lambda;
      r.iterations = it;
      r.residual = res;
      return r;
    }
  }
  throw ConvergenceError("eigenvector centrality did not converge in " + std::to_string(max_iter) +
                             " iterations (residual " + std::to_string(residual) + ")",
                         residual);
}

NodeValues total_degree(const CommGraph& graph) {
  const std::size_t n = graph.node_count();
  NodeValues d(n, 0.0);
  if (n < 2) return d;
  for (std::size_t i = 0; i < n; ++i)
    d[i] = static_cast<double>(graph.neighbors(i).size()) / static_cast<double>(n - 1);
  return d;
}

std::map<std::string, double> to_map(const CommGraph& graph, const NodeValues& values) {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < graph.node_count(); ++i) out.emplace(graph.nodes()[i], values.at(i));
  return out;
}

std::vector<ComparisonRow> compare_groups(const std::vector<MetricColumn>& metrics,
                                          const std::map<std::string, flips::AgentClass>& classes, double alpha) {
  std::vector<ComparisonRow> rows;
  for (const auto& metric : metrics) {
    std::vector<double> cyborg, other;
    for (const auto& [agent, cls] : classes) {
      auto it = metric.values.find(agent);
      if (it == metric.values.end()) continue;
      (cls == flips::AgentClass::Cyborg ? cyborg : other).push_back(it->second);
    }
    if (cyborg.size() < 2 || other.size() < 2)
      throw InvalidArgument("compare_groups: metric '" + metric.name + "' needs at least 2 agents per group");
    ComparisonRow row;
    row.metric = metric.name;
    row.n_cyborg = cyborg.size();
    row.n_non_cyborg = other.size();
    row.cyborg_mean = stats::mean(cyborg);
    row.non_cyborg_mean = stats::mean(other);
    if (stats::sample_variance(cyborg) == 0.0 && stats::sample_variance(other) == 0.0) {
      // Both groups constant: the difference is either none or exact.
      const bool same = row.cyborg_mean == row.non_cyborg_mean;
      row.p = same ? 1.0 : 0.0;
      row.t = same ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), row.cyborg_mean - row.non_cyborg_mean);
      row.df = static_cast<double>(cyborg.size() + other.size() - 2);
    } else {
      const auto t = stats::welch_t_test(cyborg, other);
      row.t = t.t;
      row.df = t.df;
      row.p = t.p;
    }
    row.significant = row.p < alpha;
    if (row.significant) row.higher = row.cyborg_mean > row.non_cyborg_mean ? "Cyborg" : "NonCyborg";
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<MetricColumn> profile_metrics(const std::vector<ingest::PostRecord>& posts) {
  std::map<std::string, const ingest::PostRecord*> latest;
  std::map<std::string, double> retweets;
  for (const auto& p : posts) {
    auto& slot = latest[p.author_id];
    if (!slot || std::tie(slot->created_at, slot->post_id) < std::tie(p.created_at, p.post_id)) slot = &p;
    retweets[p.author_id] += p.retweet_of ? 1.0 : 0.0;
  }
  MetricColumn verified{"% verified accounts", {}}, rts{"Avg # retweets", std::move(retweets)},
      followers{"Avg # followers", {}}, friends{"Avg # friends", {}};
  for (const auto& [agent, post] : latest) {
    const auto& prof = post->author_profile;
    verified.values[agent] = prof.is_verified ? 100.0 : 0.0;
    followers.values[agent] = static_cast<double>(prof.followers_count);
    friends.values[agent] = static_cast<double>(prof.friends_count);
  }
  return {verified, rts, followers, friends};
}

}  // namespace cyborg::network
