#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <type_traits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "rng.hpp"

namespace ising_lasso {

using Vertex = std::size_t;

/// Undirected edge stored once with r < t.
struct Edge {
  Vertex r = 0;
  Vertex t = 0;
  double coupling = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Ising interaction graph. One coupling J_e per unordered edge; the joint
/// distribution is exp(sum_{e=(r,t)} J_e x_r x_t) / Z, so an isolated edge
/// has correlation tanh(J_e).
///
/// A freshly generated graph carries topology only (`couplings_assigned()` is
/// false). Once assigned, every edge coupling is nonzero; pairs that are not
/// edges have coupling zero.
class SignedGraph {
 public:
  SignedGraph() = default;
  explicit SignedGraph(std::size_t p) : adjacency_(p) {}

  std::size_t p() const noexcept { return adjacency_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  bool couplings_assigned() const noexcept { return assigned_ || edges_.empty(); }

  void add_edge(Vertex a, Vertex b) {
    if (a >= p() || b >= p()) throw InvalidArgument("edge endpoint out of range");
    if (a == b) throw InvalidArgument("self-loops are not allowed");
    if (has_edge(a, b)) throw InvalidArgument("duplicate edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
    if (assigned_) throw InvalidArgument("cannot add edges after couplings are assigned");
    auto [r, t] = std::minmax(a, b);
    std::size_t idx = edges_.size();
    edges_.push_back({r, t, 0.0});
    adjacency_[r].push_back({t, idx});
    adjacency_[t].push_back({r, idx});
  }

  /// Assigns every edge coupling at once; values must be nonzero.
  void set_couplings(const std::vector<double>& couplings) {
    if (couplings.size() != edges_.size()) throw InvalidArgument("coupling count does not match edge count");
    for (double c : couplings) {
      if (c == 0.0 || !std::isfinite(c)) throw InvalidArgument("edge couplings must be finite and nonzero");
    }
    for (std::size_t i = 0; i < edges_.size(); ++i) edges_[i].coupling = couplings[i];
    assigned_ = true;
  }

  std::size_t degree(Vertex r) const { return adjacency_.at(r).size(); }

  std::size_t max_degree() const noexcept {
    std::size_t d = 0;
    for (const auto& a : adjacency_) d = std::max(d, a.size());
    return d;
  }

  std::vector<Vertex> neighbors(Vertex r) const {
    std::vector<Vertex> out;
    out.reserve(adjacency_.at(r).size());
    for (const auto& [t, idx] : adjacency_[r]) out.push_back(t);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// (neighbor, edge index) pairs in insertion order.
  const std::vector<std::pair<Vertex, std::size_t>>& incident(Vertex r) const { return adjacency_.at(r); }

  std::optional<std::size_t> edge_index(Vertex a, Vertex b) const {
    if (a >= p() || b >= p()) return std::nullopt;
    const auto& list = adjacency_[a].size() <= adjacency_[b].size() ? adjacency_[a] : adjacency_[b];
    Vertex other = adjacency_[a].size() <= adjacency_[b].size() ? b : a;
    for (const auto& [t, idx] : list)
      if (t == other) return idx;
    return std::nullopt;
  }

  bool has_edge(Vertex a, Vertex b) const { return edge_index(a, b).has_value(); }

  double coupling(Vertex a, Vertex b) const {
    auto idx = edge_index(a, b);
    return idx ? edges_[*idx].coupling : 0.0;
  }

  /// True when the graph has no cycle (a forest; isolated vertices allowed).
  bool is_acyclic() const {
    std::vector<std::size_t> parent(p());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& e : edges_) {
      auto a = find(e.r), b = find(e.t);
      if (a == b) return false;
      parent[a] = b;
    }
    return true;
  }

  double theta_min() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& e : edges_) m = std::min(m, std::abs(e.coupling));
    return m;
  }
  double theta_max() const {
    double m = 0.0;
    for (const auto& e : edges_) m = std::max(m, std::abs(e.coupling));
    return m;
  }

  /// Edges sorted by (r, t); used for canonical serialization.
  std::vector<Edge> sorted_edges() const {
    auto out = edges_;
    std::sort(out.begin(), out.end(), [](const Edge& a, const Edge& b) { return std::pair(a.r, a.t) < std::pair(b.r, b.t); });
    return out;
  }

 private:
  std::vector<Edge> edges_;
  std::vector<std::vector<std::pair<Vertex, std::size_t>>> adjacency_;
  bool assigned_ = false;
};

// ---------------------------------------------------------------------------
// Generators

/// Random d-regular simple graph via the pairing (configuration) model with
/// rejection of self-loops and multi-edges.
inline SignedGraph generate_random_regular(std::size_t p, std::size_t d, std::uint64_t seed,
                                           std::size_t max_attempts = 1000) {
  if ((p * d) % 2 != 0) throw InvalidArgument("p·d must be even for a d-regular graph");
  if (d >= p) throw InvalidArgument("degree d must be smaller than p");
  if (d < 3) throw InvalidArgument("degree d must be at least 3");
  Rng rng(seed);
  std::vector<Vertex> points(p * d);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    for (std::size_t i = 0; i < points.size(); ++i) points[i] = i / d;
    shuffle(std::span<Vertex>(points), rng);
    std::vector<std::pair<Vertex, Vertex>> pairs;
    pairs.reserve(points.size() / 2);
    bool simple = true;
    for (std::size_t i = 0; i < points.size() && simple; i += 2) {
      auto [a, b] = std::minmax(points[i], points[i + 1]);
      if (a == b) simple = false;
      pairs.emplace_back(a, b);
    }
    if (!simple) continue;
    std::sort(pairs.begin(), pairs.end());
    if (std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end()) continue;
    SignedGraph g(p);
    for (auto [a, b] : pairs) g.add_edge(a, b);
    return g;
  }
  throw Error("random regular generation exceeded the retry limit of " + std::to_string(max_attempts) + " attempts");
}

/// rows × cols square lattice with periodic boundaries (torus); every vertex
/// has degree 4. Vertex id = i·cols + j.
inline SignedGraph generate_grid_periodic(std::size_t rows, std::size_t cols) {
  if (rows < 3 || cols < 3) throw InvalidArgument("periodic grid needs rows >= 3 and cols >= 3");
  SignedGraph g(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      Vertex v = i * cols + j;
      g.add_edge(v, i * cols + (j + 1) % cols);
      g.add_edge(v, ((i + 1) % rows) * cols + j);
    }
  }
  return g;
}

/// Star: hub 0 joined to vertices 1..d; vertices d+1..p-1 stay isolated.
inline SignedGraph generate_star(std::size_t p, std::size_t d) {
  if (d < 1 || d >= p) throw InvalidArgument("star degree must satisfy 1 <= d <= p-1");
  SignedGraph g(p);
  for (Vertex t = 1; t <= d; ++t) g.add_edge(0, t);
  return g;
}

/// Random recursive tree: vertex v attaches to a uniformly chosen earlier
/// vertex whose degree is still below d_max.
inline SignedGraph generate_random_tree(std::size_t p, std::size_t d_max, std::uint64_t seed) {
  if (p < 2) throw InvalidArgument("tree needs p >= 2");
  if (d_max < 2) throw InvalidArgument("tree needs d_max >= 2");
  Rng rng(seed);
  SignedGraph g(p);
  std::vector<Vertex> open{0};
  for (Vertex v = 1; v < p; ++v) {
    std::size_t k = uniform_index(rng, open.size());
    Vertex u = open[k];
    g.add_edge(u, v);
    if (g.degree(u) >= d_max) {
      open[k] = open.back();
      open.pop_back();
    }
    open.push_back(v);
  }
  return g;
}

/// Breadth-first tree in which every internal vertex has degree d (the last
/// internal vertex may be short when p does not fit exactly). This is the
/// finite piece of a Bethe lattice used as an acyclic stand-in for a
/// random regular graph of degree d.
inline SignedGraph generate_bethe_tree(std::size_t p, std::size_t d) {
  if (p < 2) throw InvalidArgument("tree needs p >= 2");
  if (d < 2) throw InvalidArgument("tree degree must be >= 2");
  SignedGraph g(p);
  Vertex next = 1;
  for (Vertex u = 0; u < p && next < p; ++u) {
    while (g.degree(u) < d && next < p) g.add_edge(u, next++);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Couplings

struct UniformPositive {
  double theta0;
};
struct MixedSign {
  double theta0;
};
/// coupling = amplitude / sqrt(max degree)
struct DegreeScaled {
  double amplitude;
};
using CouplingScheme = std::variant<UniformPositive, MixedSign, DegreeScaled>;

inline SignedGraph assign_couplings(SignedGraph graph, const CouplingScheme& scheme, std::uint64_t seed) {
  if (graph.num_edges() == 0) throw InvalidArgument("cannot assign couplings to a graph without edges");
  Rng rng(seed);
  std::vector<double> values(graph.num_edges());
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, UniformPositive>) {
          if (!(s.theta0 > 0)) throw InvalidArgument("theta0 must be positive");
          std::fill(values.begin(), values.end(), s.theta0);
        } else if constexpr (std::is_same_v<S, MixedSign>) {
          if (!(s.theta0 > 0)) throw InvalidArgument("theta0 must be positive");
          for (auto& v : values) v = (rng() >> 63) ? s.theta0 : -s.theta0;
        } else {
          if (!(s.amplitude > 0)) throw InvalidArgument("amplitude must be positive");
          std::fill(values.begin(), values.end(), s.amplitude / std::sqrt(static_cast<double>(graph.max_degree())));
        }
      },
      scheme);
  graph.set_couplings(values);
  return graph;
}

/// sign(J_e) keyed by (r, t) with r < t.
inline std::map<std::pair<Vertex, Vertex>, int> signed_edge_set(const SignedGraph& graph) {
  if (!graph.couplings_assigned()) throw InvalidArgument("couplings are not assigned");
  std::map<std::pair<Vertex, Vertex>, int> out;
  for (const auto& e : graph.edges()) out[{e.r, e.t}] = e.coupling > 0 ? 1 : -1;
  return out;
}

/// sign(J_rt) for each neighbor t of r.
inline std::map<Vertex, int> true_signed_neighborhood(const SignedGraph& graph, Vertex r) {
  std::map<Vertex, int> out;
  for (const auto& [t, idx] : graph.incident(r)) out[t] = graph.edges()[idx].coupling > 0 ? 1 : -1;
  return out;
}

/// Shortest-path edge count; nullopt when t is unreachable from r.
inline std::optional<std::size_t> path_length(const SignedGraph& graph, Vertex r, Vertex t) {
  if (r == t) throw InvalidArgument("path_length needs distinct vertices");
  if (r >= graph.p() || t >= graph.p()) throw InvalidArgument("vertex out of range");
  std::vector<std::size_t> dist(graph.p(), std::size_t(-1));
  std::queue<Vertex> queue;
  dist[r] = 0;
  queue.push(r);
  while (!queue.empty()) {
    Vertex u = queue.front();
    queue.pop();
    for (const auto& [v, idx] : graph.incident(u)) {
      if (dist[v] != std::size_t(-1)) continue;
      dist[v] = dist[u] + 1;
      if (v == t) return dist[v];
      queue.push(v);
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Serialization: {"p": p, "edges": [[r, t, coupling], ...]}, r < t, sorted.
// Unassigned graphs write null couplings.

inline nlohmann::json to_json(const SignedGraph& graph) {
  nlohmann::json edges = nlohmann::json::array();
  bool assigned = graph.couplings_assigned();
  for (const auto& e : graph.sorted_edges()) {
    edges.push_back({e.r, e.t, assigned ? nlohmann::json(e.coupling) : nlohmann::json(nullptr)});
  }
  return {{"p", graph.p()}, {"edges", edges}};
}

inline SignedGraph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("p") || !j.contains("edges")) throw InvalidArgument("graph JSON needs fields p and edges");
  if (!j["p"].is_number_unsigned()) throw InvalidArgument("graph field p must be a non-negative integer");
  SignedGraph g(j["p"].get<std::size_t>());
  std::vector<double> couplings;
  std::size_t nulls = 0;
  for (const auto& e : j["edges"]) {
    if (!e.is_array() || e.size() != 3) throw InvalidArgument("graph field edges must hold [r, t, coupling] triples");
    auto a = e[0].get<Vertex>(), b = e[1].get<Vertex>();
    if (a >= b) throw InvalidArgument("graph edges must be listed with r < t");
    g.add_edge(a, b);
    if (e[2].is_null()) {
      ++nulls;
      couplings.push_back(0.0);
    } else {
      couplings.push_back(e[2].get<double>());
    }
  }
  if (nulls != 0 && nulls != couplings.size()) throw InvalidArgument("graph couplings must be all present or all null");
  if (nulls == 0 && !couplings.empty()) g.set_couplings(couplings);
  return g;
}

}  // namespace ising_lasso
