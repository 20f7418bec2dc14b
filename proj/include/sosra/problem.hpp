#pragma once

// Rotation-averaging instances: the measurement graph, the synthetic
// generator and the canonical text format.
//
// Vertices are 0-based in memory and 1-based on disk. Vertex 0 is the
// anchored vertex (fixed to the identity quaternion downstream).

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sosra/quat.hpp"
#include "sosra/rng.hpp"

namespace sosra {

/// Malformed instance file. line() is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Structurally invalid graph (e.g. disconnected).
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Directed measurement q_j = q_i o measurement, stored with i < j.
struct Edge {
  int i = 0;
  int j = 0;
  UnitQuaternion measurement;
};

struct SpanningTree {
  std::vector<int> edges;        // indices into MeasurementGraph::edges(), discovery order
  std::vector<int> parent;       // parent vertex, -1 at the root
  std::vector<int> parent_edge;  // edge joining a vertex to its parent, -1 at the root
  std::vector<int> order;        // vertices in BFS order, root first
};

class MeasurementGraph {
 public:
  MeasurementGraph() = default;

  // Edges given as (j, i) with j > i are flipped and their measurement
  // conjugated. Edges end up sorted by (i, j). Throws InvalidInput on
  // out-of-range vertices, self loops, duplicates or a disconnected graph.
  MeasurementGraph(int num_vertices, std::vector<Edge> edges,
                   std::optional<std::vector<UnitQuaternion>> truth = std::nullopt)
      : n_(num_vertices), edges_(std::move(edges)), truth_(std::move(truth)) {
    if (n_ < 2) throw InvalidInput("graph needs at least 2 vertices");
    for (auto& e : edges_) {
      if (e.i < 0 || e.j < 0 || e.i >= n_ || e.j >= n_) throw InvalidInput("edge vertex out of range");
      if (e.i == e.j) throw InvalidInput("self loop on vertex " + std::to_string(e.i + 1));
      if (e.i > e.j) {
        std::swap(e.i, e.j);
        e.measurement = e.measurement.conj();
      }
    }
    std::stable_sort(edges_.begin(), edges_.end(),
                     [](const Edge& a, const Edge& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); });
    for (std::size_t k = 1; k < edges_.size(); ++k) {
      if (edges_[k].i == edges_[k - 1].i && edges_[k].j == edges_[k - 1].j) {
        throw InvalidInput("duplicate edge (" + std::to_string(edges_[k].i + 1) + ", " +
                           std::to_string(edges_[k].j + 1) + ")");
      }
    }
    if (truth_ && static_cast<int>(truth_->size()) != n_) throw InvalidInput("ground truth size mismatch");
    adjacency_.assign(n_, {});
    for (int k = 0; k < num_edges(); ++k) {
      adjacency_[edges_[k].i].emplace_back(edges_[k].j, k);
      adjacency_[edges_[k].j].emplace_back(edges_[k].i, k);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
    if (!is_connected()) throw InvalidInput("measurement graph is disconnected");
  }

  int num_vertices() const { return n_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int k) const { return edges_[k]; }
  const std::optional<std::vector<UnitQuaternion>>& truth() const { return truth_; }

  // (neighbor, edge index) sorted by neighbor.
  const std::vector<std::pair<int, int>>& neighbors(int v) const { return adjacency_[v]; }

  // Index of edge {a, b}, or -1.
  int find_edge(int a, int b) const {
    for (const auto& [nb, k] : adjacency_[a]) {
      if (nb == b) return k;
    }
    return -1;
  }

 private:
  bool is_connected() const {
    std::vector<char> seen(n_, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const auto& [nb, k] : adjacency_[v]) {
        if (!seen[nb]) {
          seen[nb] = 1;
          ++count;
          stack.push_back(nb);
        }
      }
    }
    return count == n_;
  }

  int n_ = 0;
  std::vector<Edge> edges_;
  std::optional<std::vector<UnitQuaternion>> truth_;
  std::vector<std::vector<std::pair<int, int>>> adjacency_;
};

struct InstanceConfig {
  int num_vertices = 2;
  int num_loop_closures = 0;
  double theta_max = 0.0;  // radians
  std::uint64_t seed = 0;
};

inline int max_loop_closures(int num_vertices) {
  return num_vertices * (num_vertices - 1) / 2 - (num_vertices - 1);
}

// Draw order: ground truth for vertices 1..N-1, then the loop-closure pairs
// (partial Fisher-Yates over the non-chain pairs in lexicographic order),
// then per sorted edge the perturbation followed by a random global sign.
inline MeasurementGraph generate_synthetic(const InstanceConfig& cfg) {
  const int n = cfg.num_vertices;
  if (n < 2) throw std::invalid_argument("generate_synthetic: need N >= 2");
  if (cfg.num_loop_closures < 0 || cfg.num_loop_closures > max_loop_closures(n)) {
    throw std::invalid_argument("generate_synthetic: " + std::to_string(cfg.num_loop_closures) +
                                " loop closures requested but only " + std::to_string(max_loop_closures(n)) +
                                " non-chain pairs exist");
  }
  if (!(cfg.theta_max >= 0.0 && cfg.theta_max <= std::numbers::pi)) {
    throw std::invalid_argument("generate_synthetic: theta_max must lie in [0, pi]");
  }
  Rng rng(cfg.seed);
  std::vector<UnitQuaternion> truth(n);
  for (int v = 1; v < n; ++v) truth[v] = random_rotation(rng);

  std::vector<std::pair<int, int>> candidates;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 2; j < n; ++j) candidates.emplace_back(i, j);
  }
  std::vector<std::pair<int, int>> pairs;
  for (int v = 0; v + 1 < n; ++v) pairs.emplace_back(v, v + 1);
  for (int k = 0; k < cfg.num_loop_closures; ++k) {
    const auto pick = k + static_cast<int>(rng.uniform_int(candidates.size() - k));
    std::swap(candidates[k], candidates[pick]);
    pairs.push_back(candidates[k]);
  }
  std::sort(pairs.begin(), pairs.end());

  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    const UnitQuaternion exact = multiply(truth[i].conj(), truth[j]);
    UnitQuaternion meas = perturb(exact, cfg.theta_max, rng);
    if (rng.sign() < 0) meas = -meas;
    edges.push_back({i, j, meas});
  }
  return MeasurementGraph(n, std::move(edges), std::move(truth));
}

/// BFS from vertex 0, neighbors visited in increasing index order.
inline SpanningTree spanning_tree(const MeasurementGraph& g) {
  const int n = g.num_vertices();
  SpanningTree t;
  t.parent.assign(n, -1);
  t.parent_edge.assign(n, -1);
  std::vector<char> seen(n, 0);
  std::queue<int> queue;
  queue.push(0);
  seen[0] = 1;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop();
    t.order.push_back(v);
    for (const auto& [nb, k] : g.neighbors(v)) {
      if (seen[nb]) continue;
      seen[nb] = 1;
      t.parent[nb] = v;
      t.parent_edge[nb] = k;
      t.edges.push_back(k);
      queue.push(nb);
    }
  }
  if (static_cast<int>(t.order.size()) != n) throw InvalidInput("spanning_tree: graph is disconnected");
  return t;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void append_quat(std::string& out, const UnitQuaternion& q) {
  for (int c = 0; c < 4; ++c) {
    out += ' ';
    out += format_double(q[c]);
  }
}

}  // namespace detail

/// Canonical text form: `N`, then `EDGE_QUAT i j qw qx qy qz` lines, then
/// optional `TRUTH i qw qx qy qz` lines. 1-based indices, 17 significant digits.
inline std::string to_text(const MeasurementGraph& g) {
  std::string out = "N " + std::to_string(g.num_vertices()) + "\n";
  for (const auto& e : g.edges()) {
    out += "EDGE_QUAT " + std::to_string(e.i + 1) + " " + std::to_string(e.j + 1);
    detail::append_quat(out, e.measurement);
    out += '\n';
  }
  if (g.truth()) {
    for (int v = 0; v < g.num_vertices(); ++v) {
      out += "TRUTH " + std::to_string(v + 1);
      detail::append_quat(out, (*g.truth())[v]);
      out += '\n';
    }
  }
  return out;
}

inline MeasurementGraph parse_text(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  int n = -1;
  std::vector<Edge> edges;
  std::vector<int> edge_lines;
  std::vector<std::optional<UnitQuaternion>> truth;
  int truth_count = 0;

  auto parse_int = [&](const std::string& tok) {
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &pos);
    } catch (const std::exception&) {
      throw ParseError(line_no, "expected integer, got '" + tok + "'");
    }
    if (pos != tok.size()) throw ParseError(line_no, "expected integer, got '" + tok + "'");
    return v;
  };
  auto parse_real = [&](const std::string& tok) {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      throw ParseError(line_no, "expected number, got '" + tok + "'");
    }
    if (pos != tok.size()) throw ParseError(line_no, "expected number, got '" + tok + "'");
    return v;
  };
  auto parse_vertex = [&](const std::string& tok) {
    if (n < 0) throw ParseError(line_no, "record before the N header");
    const int v = parse_int(tok);
    if (v < 1 || v > n) throw ParseError(line_no, "vertex index " + tok + " outside [1, " + std::to_string(n) + "]");
    return v - 1;
  };
  auto parse_quat = [&](const std::vector<std::string>& tok, std::size_t first) {
    try {
      return UnitQuaternion(parse_real(tok[first]), parse_real(tok[first + 1]), parse_real(tok[first + 2]),
                            parse_real(tok[first + 3]));
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
  };

  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string& kind = tok[0];
    if (kind == "N") {
      if (tok.size() != 2) throw ParseError(line_no, "N takes exactly one value");
      if (n >= 0) throw ParseError(line_no, "repeated N header");
      n = parse_int(tok[1]);
      if (n < 2) throw ParseError(line_no, "N must be at least 2");
      truth.assign(n, std::nullopt);
    } else if (kind == "EDGE_QUAT") {
      if (tok.size() != 7) throw ParseError(line_no, "EDGE_QUAT takes i j qw qx qy qz");
      const int i = parse_vertex(tok[1]);
      const int j = parse_vertex(tok[2]);
      if (i == j) throw ParseError(line_no, "self loop");
      const auto key = std::minmax(i, j);
      for (std::size_t k = 0; k < edges.size(); ++k) {
        if (std::minmax(edges[k].i, edges[k].j) == key) {
          throw ParseError(line_no, "duplicate edge (" + tok[1] + ", " + tok[2] + "), first given on line " +
                                        std::to_string(edge_lines[k]));
        }
      }
      edges.push_back({i, j, parse_quat(tok, 3)});
      edge_lines.push_back(line_no);
    } else if (kind == "TRUTH") {
      if (tok.size() != 6) throw ParseError(line_no, "TRUTH takes i qw qx qy qz");
      const int v = parse_vertex(tok[1]);
      if (truth[v]) throw ParseError(line_no, "repeated TRUTH for vertex " + tok[1]);
      truth[v] = parse_quat(tok, 2);
      ++truth_count;
    } else {
      throw ParseError(line_no, "unknown record '" + kind + "'");
    }
  }
  if (n < 0) throw ParseError(0, "missing N header");
  if (truth_count != 0 && truth_count != n) throw ParseError(0, "TRUTH must be given for all vertices or none");
  std::optional<std::vector<UnitQuaternion>> gt;
  if (truth_count == n) {
    gt.emplace();
    for (const auto& q : truth) gt->push_back(*q);
  }
  return MeasurementGraph(n, std::move(edges), std::move(gt));
}

inline MeasurementGraph load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

inline void save(const MeasurementGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << to_text(g);
}

}  // namespace sosra
