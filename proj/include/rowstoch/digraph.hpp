#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "rowstoch/errors.hpp"
#include "rowstoch/rng.hpp"

namespace rowstoch {

/// A directed communication graph over agents 0..n-1.
///
/// An edge (i, j) means "j sends to i", i.e. j is an in-neighbor of i.
/// Every agent is an in-neighbor of itself (self-loops are implicit and
/// always present).
struct DirectedGraph {
  int n = 0;
  std::vector<std::vector<int>> in_neighbors;   // sorted, includes self
  std::vector<std::vector<int>> out_neighbors;  // sorted, includes self
};

/// Row-stochastic mixing weights. entries(i, j) is the weight agent i puts
/// on the value received from agent j.
struct WeightMatrix {
  Eigen::MatrixXd entries;

  long size() const { return entries.rows(); }
};

/// True iff every agent can reach every other agent along directed edges.
///
/// Uses one forward and one backward traversal from agent 0: the graph is
/// strongly connected iff agent 0 reaches all agents and all agents reach
/// agent 0.
inline bool is_strongly_connected(const DirectedGraph& g) {
  if (g.n <= 0) return false;
  if (g.n == 1) return true;
  auto reaches_all = [&](const std::vector<std::vector<int>>& adj) {
    std::vector<char> seen(static_cast<std::size_t>(g.n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[static_cast<std::size_t>(v)]) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == g.n;
  };
  // Forward reachability follows out-edges; backward follows in-edges.
  return reaches_all(g.out_neighbors) && reaches_all(g.in_neighbors);
}

/// Builds a graph from an edge list. Edges are (receiver, sender) pairs;
/// self-loops are added for every agent whether or not listed.
///
/// Throws BadIndex for n < 1 or an out-of-range endpoint, and
/// NotStronglyConnected if the resulting graph is not strongly connected.
inline DirectedGraph build_graph(int n,
                                 const std::vector<std::pair<int, int>>& edges) {
  if (n < 1) throw BadIndex("build_graph: n must be at least 1");
  DirectedGraph g;
  g.n = n;
  g.in_neighbors.assign(static_cast<std::size_t>(n), {});
  g.out_neighbors.assign(static_cast<std::size_t>(n), {});
  std::vector<std::vector<char>> present(
      static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  for (int i = 0; i < n; ++i) present[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1;
  for (const auto& [i, j] : edges) {
    if (i < 0 || i >= n || j < 0 || j >= n) {
      throw BadIndex("build_graph: edge endpoint out of range");
    }
    present[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (present[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) {
        g.in_neighbors[static_cast<std::size_t>(i)].push_back(j);
        g.out_neighbors[static_cast<std::size_t>(j)].push_back(i);
      }
    }
  }
  if (!is_strongly_connected(g)) {
    throw NotStronglyConnected("build_graph: graph is not strongly connected");
  }
  return g;
}

/// Random strongly connected digraph: a random Hamiltonian directed cycle
/// guarantees strong connectivity, then every remaining ordered pair is
/// added independently with probability extra_edge_prob. Deterministic for
/// a fixed seed.
inline DirectedGraph random_strongly_connected(int n, double extra_edge_prob,
                                               std::uint64_t seed) {
  if (n < 1) throw BadIndex("random_strongly_connected: n must be at least 1");
  Rng rng(seed);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  rng.shuffle(perm);

  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<char>> cyc(
      static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  if (n > 1) {
    for (int t = 0; t < n; ++t) {
      const int sender = perm[static_cast<std::size_t>(t)];
      const int receiver = perm[static_cast<std::size_t>((t + 1) % n)];
      edges.emplace_back(receiver, sender);
      cyc[static_cast<std::size_t>(receiver)][static_cast<std::size_t>(sender)] = 1;
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || cyc[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
      if (rng.bernoulli(extra_edge_prob)) edges.emplace_back(i, j);
    }
  }
  return build_graph(n, edges);
}

/// Uniform in-neighbor weights: a_ij = 1/|N_i^in| for each in-neighbor j
/// (self included), 0 elsewhere. Every row sums to 1.
inline WeightMatrix row_stochastic_weights(const DirectedGraph& g) {
  if (g.n < 1) throw BadIndex("row_stochastic_weights: empty graph");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(g.n, g.n);
  for (int i = 0; i < g.n; ++i) {
    const auto& nbrs = g.in_neighbors[static_cast<std::size_t>(i)];
    const double w = 1.0 / static_cast<double>(nbrs.size());
    for (int j : nbrs) A(i, j) = w;
  }
  return WeightMatrix{std::move(A)};
}

/// Uniform out-degree weights: b_ij = 1/|N_j^out| when j sends to i
/// (self included), 0 elsewhere. Every column sums to 1.
inline WeightMatrix column_stochastic_weights(const DirectedGraph& g) {
  if (g.n < 1) throw BadIndex("column_stochastic_weights: empty graph");
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(g.n, g.n);
  for (int j = 0; j < g.n; ++j) {
    const auto& outs = g.out_neighbors[static_cast<std::size_t>(j)];
    const double w = 1.0 / static_cast<double>(outs.size());
    for (int i : outs) B(i, j) = w;
  }
  return WeightMatrix{std::move(B)};
}

// --- graph file format -----------------------------------------------------
//
// {"n": 5, "edges": [[i, j], ...]}   with [i, j] meaning "j sends to i".
// Self-loops are implied and need not be listed.

inline nlohmann::json graph_to_json(const DirectedGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (int i = 0; i < g.n; ++i) {
    for (int j : g.in_neighbors[static_cast<std::size_t>(i)]) {
      if (j != i) edges.push_back({i, j});
    }
  }
  return nlohmann::json{{"n", g.n}, {"edges", edges}};
}

inline DirectedGraph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("edges")) {
    throw MalformedTrace("graph_from_json: expected {\"n\": ..., \"edges\": [...]}");
  }
  const int n = j.at("n").get<int>();
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) {
      throw MalformedTrace("graph_from_json: each edge must be a pair [i, j]");
    }
    edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  return build_graph(n, edges);
}

inline DirectedGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedTrace("load_graph_file: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return graph_from_json(j);
}

inline void save_graph_file(const DirectedGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MalformedTrace("save_graph_file: cannot open " + path);
  out << graph_to_json(g).dump(2) << '\n';
}

}  // namespace rowstoch
