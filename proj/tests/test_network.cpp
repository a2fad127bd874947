#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cyborg/error.hpp"
#include "cyborg/network.hpp"
#include "cyborg/rng.hpp"
#include "oracles.hpp"

using namespace cyborg;
using namespace cyborg::network;
using doctest::Approx;

namespace {

std::string node_name(int i) { return "n" + std::to_string(i); }

CommGraph graph_of(int n, const std::vector<std::pair<int, int>>& pairs, const std::vector<double>& weights = {}) {
  std::vector<std::string> nodes;
  for (int i = 0; i < n; ++i) nodes.push_back(node_name(i));
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    auto [u, v] = pairs[k];
    edges.push_back({static_cast<std::size_t>(std::min(u, v)), static_cast<std::size_t>(std::max(u, v)),
                     weights.empty() ? 1.0 : weights[k]});
  }
  return CommGraph(nodes, edges);
}

// Random connected graph on n <= 9 nodes (names sort in index order).
struct RandomGraph {
  oracle::Adj adj;
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> weights;
};

RandomGraph random_connected(Rng& rng, int n, double p) {
  for (;;) {
    RandomGraph g;
    g.adj.assign(n, std::vector<int>(n, 0));
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
        if (rng.bernoulli(p)) {
          g.adj[u][v] = g.adj[v][u] = 1;
          g.pairs.push_back({u, v});
          g.weights.push_back(static_cast<double>(1 + rng.below(3)));
        }
    if (oracle::connected(g.adj)) return g;
  }
}

ingest::PostRecord post(const std::string& id, const std::string& author) {
  ingest::PostRecord p;
  p.post_id = id;
  p.author_id = author;
  return p;
}

}  // namespace

TEST_CASE("graph construction rules") {
  CHECK_THROWS_AS(graph_of(2, {{0, 0}}), InvalidArgument);
  CHECK_THROWS_AS(graph_of(2, {{0, 1}, {1, 0}}), InvalidArgument);
  CHECK_THROWS_AS(graph_of(2, {{0, 1}}, {0.5}), InvalidArgument);
  CHECK_THROWS_AS(graph_of(2, {{0, 5}}), InvalidArgument);
  CHECK_THROWS_AS(CommGraph({"a", "a"}, {}), InvalidArgument);
  auto g = graph_of(3, {{0, 1}, {1, 2}}, {2, 1});
  CHECK(g.weight("n0", "n1") == 2);
  CHECK(g.weight("n1", "n0") == 2);
  CHECK(g.weight("n0", "n2") == 0);
  CHECK(!g.index_of("zz"));
}

TEST_CASE("build_comm_graph aggregation") {
  SUBCASE("one retweet") {
    auto p = post("1", "A");
    p.retweet_of = "B";
    auto g = build_comm_graph({p});
    CHECK(g.node_count() == 2);
    CHECK(g.edge_count() == 1);
    CHECK(g.weight("A", "B") == 1);
  }
  SUBCASE("two mentions and a quote back") {
    auto p1 = post("1", "A");
    p1.mentions = {"B"};
    auto p2 = post("2", "A");
    p2.mentions = {"B"};
    auto p3 = post("3", "B");
    p3.quote_of = "A";
    auto g = build_comm_graph({p1, p2, p3});
    CHECK(g.edge_count() == 1);
    CHECK(g.weight("A", "B") == 3);
  }
  SUBCASE("self interactions dropped, lone authors kept") {
    auto p = post("1", "A");
    p.mentions = {"A"};
    p.retweet_of = "A";
    auto g = build_comm_graph({p, post("2", "C")});
    CHECK(g.node_count() == 2);
    CHECK(g.edge_count() == 0);
  }
}

TEST_CASE("build_comm_graph matches pair extraction and ignores order") {
  Rng rng(17);
  std::vector<ingest::PostRecord> posts;
  for (int i = 0; i < 200; ++i) {
    auto p = post("p" + std::to_string(i), "a" + std::to_string(rng.below(15)));
    if (rng.bernoulli(0.4)) p.retweet_of = "a" + std::to_string(rng.below(15));
    if (rng.bernoulli(0.2)) p.quote_of = "a" + std::to_string(rng.below(15));
    for (std::size_t k = rng.below(3); k > 0; --k) p.mentions.push_back("a" + std::to_string(rng.below(18)));
    posts.push_back(p);
  }
  std::map<std::pair<std::string, std::string>, double> expect;
  std::set<std::string> nodes;
  for (const auto& p : posts) {
    nodes.insert(p.author_id);
    std::vector<std::string> targets = p.mentions;
    if (p.retweet_of) targets.push_back(*p.retweet_of);
    if (p.quote_of) targets.push_back(*p.quote_of);
    for (const auto& t : targets) {
      nodes.insert(t);
      if (t != p.author_id) expect[std::minmax(p.author_id, t)] += 1;
    }
  }
  auto g = build_comm_graph(posts);
  CHECK(g.node_count() == nodes.size());
  std::map<std::pair<std::string, std::string>, double> got;
  for (const auto& e : g.edges()) got[{g.nodes()[e.u], g.nodes()[e.v]}] = e.weight;
  CHECK(got == expect);

  auto shuffled = posts;
  rng.shuffle(shuffled);
  auto h = build_comm_graph(shuffled);
  CHECK(h.nodes() == g.nodes());
  REQUIRE(h.edges().size() == g.edges().size());
  for (std::size_t i = 0; i < h.edges().size(); ++i) {
    CHECK(h.edges()[i].u == g.edges()[i].u);
    CHECK(h.edges()[i].v == g.edges()[i].v);
    CHECK(h.edges()[i].weight == g.edges()[i].weight);
  }
}

TEST_CASE("betweenness small cases") {
  auto path = betweenness(graph_of(3, {{0, 1}, {1, 2}}));
  CHECK(path[0] == 0.0);
  CHECK(path[1] == Approx(1.0));
  CHECK(path[2] == 0.0);
  auto star = betweenness(graph_of(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}));
  CHECK(star[0] == Approx(1.0));
  for (int i = 1; i < 5; ++i) CHECK(star[i] == 0.0);
  CHECK(betweenness(graph_of(2, {{0, 1}})) == std::vector<double>{0.0, 0.0});
  CHECK(betweenness(CommGraph{}).empty());
}

TEST_CASE("betweenness and degree match oracles on random small graphs") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));
    auto rg = random_connected(rng, n, rng.uniform(0.2, 0.9));
    auto g = graph_of(n, rg.pairs, rg.weights);
    auto raw = betweenness_raw(g, 1 + static_cast<unsigned>(rng.below(3)));
    auto expect = oracle::betweenness_by_paths(rg.adj);
    for (int v = 0; v < n; ++v) CHECK(std::fabs(raw[v] - expect[v]) < 1e-9);
    auto norm = betweenness(g);
    for (int v = 0; v < n; ++v)
      CHECK(std::fabs(norm[v] - (n > 2 ? 2.0 * expect[v] / ((n - 1.0) * (n - 2.0)) : 0.0)) < 1e-9);
    auto deg = total_degree(g);
    for (int v = 0; v < n; ++v) {
      int row = 0;
      for (int u = 0; u < n; ++u) row += rg.adj[v][u];
      CHECK(deg[v] == static_cast<double>(row) / (n - 1));
    }
  }
}

TEST_CASE("property: tree betweenness counts crossing pairs") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(9));
    std::vector<std::pair<int, int>> pairs;
    std::vector<int> parent(n, -1);
    for (int v = 1; v < n; ++v) {
      parent[v] = static_cast<int>(rng.below(v));
      pairs.push_back({parent[v], v});
    }
    auto raw = betweenness_raw(graph_of(n, pairs));
    // In a tree, removing v splits it into parts; crossing pairs = sum over part pairs.
    for (int v = 0; v < n; ++v) {
      std::vector<int> sizes;
      int below_total = 0;
      for (int c = 0; c < n; ++c) {
        if (parent[c] != v) continue;
        int size = 0;
        for (int x = 0; x < n; ++x) {
          int y = x;
          while (y != -1 && y != c) y = parent[y];
          if (y == c) ++size;
        }
        sizes.push_back(size);
        below_total += size;
      }
      if (v != 0) sizes.push_back(n - 1 - below_total);
      double pairs_through = 0;
      for (std::size_t i = 0; i < sizes.size(); ++i)
        for (std::size_t j = i + 1; j < sizes.size(); ++j) pairs_through += sizes[i] * sizes[j];
      CHECK(raw[v] == Approx(pairs_through));
    }
  }
}

TEST_CASE("property: total raw betweenness equals interior path mass") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(6));
    auto rg = random_connected(rng, n, 0.4);
    auto raw = betweenness_raw(graph_of(n, rg.pairs));
    double sum = 0;
    for (double b : raw) sum += b;
    double mass = 0;
    for (int s = 0; s < n; ++s)
      for (int t = s + 1; t < n; ++t) {
        std::vector<std::vector<int>> paths;
        oracle::shortest_paths(rg.adj, s, t, paths);
        for (const auto& p : paths) mass += static_cast<double>(p.size() - 2) / static_cast<double>(paths.size());
      }
    CHECK(sum == Approx(mass).epsilon(1e-12));
  }
}

TEST_CASE("betweenness is independent of jobs") {
  Rng rng(12);
  std::vector<std::pair<int, int>> pairs;
  const int n = 300;
  std::set<std::pair<int, int>> seen;
  for (int k = 0; k < 900; ++k) {
    int u = static_cast<int>(rng.below(n)), v = static_cast<int>(rng.below(n));
    if (u == v || !seen.insert(std::minmax(u, v)).second) continue;
    pairs.push_back({u, v});
  }
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("x" + std::to_string(1000 + i));
  std::vector<Edge> edges;
  for (auto [u, v] : pairs)
    edges.push_back({static_cast<std::size_t>(std::min(u, v)), static_cast<std::size_t>(std::max(u, v)), 1.0});
  CommGraph g(names, edges);
  CHECK(betweenness(g, 1) == betweenness(g, 4));
}

TEST_CASE("eigenvector hand cases") {
  auto k3 = eigenvector_centrality(graph_of(3, {{0, 1}, {1, 2}, {0, 2}}));
  for (double v : k3.values) CHECK(v == Approx(1.0 / std::sqrt(3.0)).epsilon(1e-6));
  CHECK(k3.eigenvalue == Approx(2.0).epsilon(1e-6));

  auto path = eigenvector_centrality(graph_of(3, {{0, 1}, {1, 2}}));
  CHECK(path.values[0] == Approx(0.5).epsilon(1e-6));
  CHECK(path.values[1] == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
  CHECK(path.values[2] == Approx(0.5).epsilon(1e-6));
  CHECK(path.eigenvalue == Approx(std::sqrt(2.0)).epsilon(1e-6));

  auto split = eigenvector_centrality(graph_of(3, {{0, 1}}));
  CHECK(split.values[2] == 0.0);
  CHECK(split.largest_component_only);
  CHECK(split.component_size == 2);
  CHECK(split.values[0] == Approx(1.0 / std::sqrt(2.0)));

  CHECK_THROWS_AS(eigenvector_centrality(CommGraph{}), InvalidArgument);
  CHECK_THROWS_AS(eigenvector_centrality(graph_of(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}), 1e-15, 3),
                  ConvergenceError);
}

TEST_CASE("property: eigenvector residual bound") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(8));
    auto rg = random_connected(rng, n, rng.uniform(0.2, 0.9));
    auto g = graph_of(n, rg.pairs, rg.weights);
    const double tol = 1e-8;
    auto r = eigenvector_centrality(g, tol, 5000);
    double norm = 0;
    for (double x : r.values) norm += x * x;
    CHECK(norm == Approx(1.0).epsilon(1e-12));
    std::vector<double> av(n, 0.0);
    for (std::size_t k = 0; k < rg.pairs.size(); ++k) {
      auto [u, v] = rg.pairs[k];
      av[u] += rg.weights[k] * r.values[v];
      av[v] += rg.weights[k] * r.values[u];
    }
    double res = 0;
    for (int i = 0; i < n; ++i) res = std::max(res, std::fabs(av[i] - r.eigenvalue * r.values[i]));
    CHECK(res < 10 * tol);
    for (double x : r.values) CHECK(x >= 0.0);
  }
}

TEST_CASE("total degree") {
  auto k4 = total_degree(graph_of(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}));
  for (double d : k4) CHECK(d == 1.0);
  auto star = total_degree(graph_of(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}));
  CHECK(star[0] == 1.0);
  for (int i = 1; i < 5; ++i) CHECK(star[i] == 0.25);
}

TEST_CASE("compare_groups") {
  using flips::AgentClass;
  std::map<std::string, AgentClass> classes{{"c1", AgentClass::Cyborg}, {"c2", AgentClass::Cyborg},
                                            {"c3", AgentClass::Cyborg}, {"h1", AgentClass::Human},
                                            {"h2", AgentClass::Human},  {"b1", AgentClass::Bot}};
  MetricColumn same{"same", {{"c1", 1}, {"c2", 2}, {"c3", 3}, {"h1", 1}, {"h2", 2}, {"b1", 3}}};
  MetricColumn split{"split",
                     {{"c1", 0.0}, {"c2", 0.001}, {"c3", -0.001}, {"h1", 1.0}, {"h2", 1.001}, {"b1", 0.999}}};
  MetricColumn flat{"flat", {{"c1", 5}, {"c2", 5}, {"c3", 5}, {"h1", 5}, {"h2", 5}, {"b1", 5}, {"x", 9}}};
  auto rows = compare_groups({same, split, flat}, classes, 0.001);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].p == Approx(1.0));
  CHECK(!rows[0].significant);
  CHECK(rows[0].higher.empty());
  CHECK(rows[1].significant);
  CHECK(rows[1].higher == "NonCyborg");
  CHECK(rows[1].n_cyborg == 3);
  CHECK(rows[1].n_non_cyborg == 3);
  CHECK(rows[2].p == 1.0);  // unclassified "x" is ignored
  CHECK(rows[2].higher.empty());

  MetricColumn thin{"thin", {{"c1", 1}, {"h1", 2}, {"h2", 3}}};
  CHECK_THROWS_AS(compare_groups({thin}, classes), InvalidArgument);
}

TEST_CASE("profile metrics use the latest snapshot") {
  auto a1 = post("1", "A");
  a1.created_at = *parse_timestamp("2020-06-01T00:00:00Z");
  a1.author_profile.followers_count = 10;
  auto a2 = post("2", "A");
  a2.created_at = *parse_timestamp("2020-06-03T00:00:00Z");
  a2.author_profile.followers_count = 30;
  a2.author_profile.is_verified = true;
  a2.retweet_of = "B";
  auto b = post("3", "B");
  b.created_at = *parse_timestamp("2020-06-02T00:00:00Z");
  auto m = profile_metrics({a2, a1, b});
  REQUIRE(m.size() == 4);
  CHECK(m[0].values.at("A") == 100.0);
  CHECK(m[0].values.at("B") == 0.0);
  CHECK(m[1].values.at("A") == 1.0);
  CHECK(m[1].values.at("B") == 0.0);
  CHECK(m[2].values.at("A") == 30.0);
}
