#pragma once

// Variable/constraint partitions satisfying the running intersection
// property (RIP), built through a junction tree over the measurement graph.

#include <algorithm>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "sosra/problem.hpp"

namespace sosra {

/// Unit-norm pair plus the eight redundant box constraints per quaternion.
inline constexpr int kConstraintsPerVertex = 10;
inline constexpr int kNormConstraintsPerVertex = 2;

struct VariablePartition {
  std::vector<std::vector<int>> blocks;       // I_l, sorted vertex indices
  std::vector<std::vector<int>> constraints;  // J_l, sorted constraint indices
  int constraints_per_vertex = kConstraintsPerVertex;

  int size() const { return static_cast<int>(blocks.size()); }
};

struct RipReport {
  bool ok = true;
  std::string violation;

  explicit operator bool() const { return ok; }
};

/// Constraint j belongs to vertex j / constraints_per_vertex.
inline std::vector<std::vector<int>> map_to_constraints(const std::vector<std::vector<int>>& blocks,
                                                        int constraints_per_vertex) {
  std::vector<std::vector<int>> out;
  out.reserve(blocks.size());
  for (const auto& block : blocks) {
    std::vector<int> j;
    for (const int v : block) {
      for (int k = 0; k < constraints_per_vertex; ++k) j.push_back(v * constraints_per_vertex + k);
    }
    out.push_back(std::move(j));
  }
  return out;
}

inline VariablePartition make_partition(std::vector<std::vector<int>> blocks,
                                        int constraints_per_vertex = kConstraintsPerVertex) {
  for (auto& b : blocks) std::sort(b.begin(), b.end());
  VariablePartition p;
  p.constraints = map_to_constraints(blocks, constraints_per_vertex);
  p.blocks = std::move(blocks);
  p.constraints_per_vertex = constraints_per_vertex;
  return p;
}

/// p = 1, I_1 = all vertices.
inline VariablePartition single_block_partition(const MeasurementGraph& g,
                                                int constraints_per_vertex = kConstraintsPerVertex) {
  std::vector<int> all(g.num_vertices());
  for (int v = 0; v < g.num_vertices(); ++v) all[v] = v;
  return make_partition({all}, constraints_per_vertex);
}

namespace detail {

inline bool is_subset(const std::vector<int>& a, const std::vector<int>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline int intersection_size(const std::vector<int>& a, const std::vector<int>& b) {
  int n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

// Drops every set contained in another one; among equal sets the first wins.
inline std::vector<std::vector<int>> make_proper_sequence(const std::vector<std::vector<int>>& sets) {
  std::vector<std::vector<int>> out;
  for (std::size_t a = 0; a < sets.size(); ++a) {
    bool drop = false;
    for (std::size_t b = 0; b < sets.size() && !drop; ++b) {
      if (a == b || !is_subset(sets[a], sets[b])) continue;
      drop = sets[a].size() < sets[b].size() || b < a;
    }
    if (!drop) out.push_back(sets[a]);
  }
  return out;
}

}  // namespace detail

// Cover sets are the edges, sorted by (min vertex, max vertex). Sets sharing
// their smallest element are merged; eliminating vertices in index order adds
// the fill that makes the merged sets the cliques of a chordal graph. The
// maximal cliques are joined by a maximum-weight spanning tree (Prim, weight
// = intersection size, ties to the lower index) and emitted in insertion
// order, which puts every block after its tree parent.
inline VariablePartition junction_tree_partition(const MeasurementGraph& g,
                                                 int constraints_per_vertex = kConstraintsPerVertex) {
  const int n = g.num_vertices();
  std::vector<std::set<int>> higher(n);
  for (const auto& e : g.edges()) higher[e.i].insert(e.j);  // edges are stored with i < j

  std::vector<std::vector<int>> merged;
  for (int v = 0; v < n; ++v) {
    if (higher[v].empty()) continue;
    std::vector<int> clique{v};
    clique.insert(clique.end(), higher[v].begin(), higher[v].end());
    merged.push_back(clique);
    const int p = *higher[v].begin();
    for (auto it = std::next(higher[v].begin()); it != higher[v].end(); ++it) higher[p].insert(*it);
  }
  const auto cliques = detail::make_proper_sequence(merged);

  const int k = static_cast<int>(cliques.size());
  std::vector<char> in_tree(k, 0);
  std::vector<int> best_weight(k, -1);
  std::vector<std::vector<int>> ordered;
  int next = 0;
  for (int step = 0; step < k; ++step) {
    in_tree[next] = 1;
    ordered.push_back(cliques[next]);
    int pick = -1;
    for (int c = 0; c < k; ++c) {
      if (in_tree[c]) continue;
      best_weight[c] = std::max(best_weight[c], detail::intersection_size(cliques[c], cliques[next]));
      if (pick < 0 || best_weight[c] > best_weight[pick]) pick = c;
    }
    next = pick;
  }
  return make_partition(detail::make_proper_sequence(ordered), constraints_per_vertex);
}

/// Checks cost decomposability, constraint containment, variable cover,
/// constraint cover and the running-intersection ordering, in that order.
inline RipReport verify_rip(const MeasurementGraph& g, const VariablePartition& part) {
  const int n = g.num_vertices();
  const int cpv = part.constraints_per_vertex;
  auto fail = [](std::string msg) { return RipReport{false, std::move(msg)}; };
  if (part.blocks.size() != part.constraints.size()) return fail("block and constraint set counts differ");
  if (part.blocks.empty()) return fail("empty partition");
  std::vector<std::vector<int>> blocks = part.blocks;
  for (auto& b : blocks) std::sort(b.begin(), b.end());

  for (const auto& e : g.edges()) {
    const bool covered = std::any_of(blocks.begin(), blocks.end(), [&](const std::vector<int>& b) {
      return std::binary_search(b.begin(), b.end(), e.i) && std::binary_search(b.begin(), b.end(), e.j);
    });
    if (!covered) {
      return fail("cost term of edge (" + std::to_string(e.i + 1) + ", " + std::to_string(e.j + 1) +
                  ") lies in no block");
    }
  }
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    for (const int j : part.constraints[l]) {
      if (j < 0 || j >= n * cpv) return fail("constraint index " + std::to_string(j) + " out of range");
      if (!std::binary_search(blocks[l].begin(), blocks[l].end(), j / cpv)) {
        return fail("constraint " + std::to_string(j) + " of J_" + std::to_string(l + 1) +
                    " involves a vertex outside I_" + std::to_string(l + 1));
      }
    }
  }
  std::vector<char> seen_v(n, 0);
  for (const auto& b : blocks) {
    for (const int v : b) {
      if (v < 0 || v >= n) return fail("vertex index " + std::to_string(v) + " out of range");
      seen_v[v] = 1;
    }
  }
  for (int v = 0; v < n; ++v) {
    if (!seen_v[v]) return fail("vertex " + std::to_string(v + 1) + " is in no block");
  }
  std::vector<char> seen_c(n * cpv, 0);
  for (const auto& jl : part.constraints) {
    for (const int j : jl) seen_c[j] = 1;
  }
  for (int j = 0; j < n * cpv; ++j) {
    if (!seen_c[j]) return fail("constraint " + std::to_string(j) + " is in no J_l");
  }
  std::vector<int> seen_before;
  for (std::size_t l = 0; l + 1 < blocks.size(); ++l) {
    std::vector<int> merged;
    std::set_union(seen_before.begin(), seen_before.end(), blocks[l].begin(), blocks[l].end(),
                   std::back_inserter(merged));
    seen_before = std::move(merged);
    std::vector<int> overlap;
    std::set_intersection(blocks[l + 1].begin(), blocks[l + 1].end(), seen_before.begin(), seen_before.end(),
                          std::back_inserter(overlap));
    bool ok = false;
    for (std::size_t s = 0; s <= l && !ok; ++s) ok = detail::is_subset(overlap, blocks[s]);
    if (!ok) {
      std::string set = "{";
      for (std::size_t a = 0; a < overlap.size(); ++a) set += (a ? "," : "") + std::to_string(overlap[a] + 1);
      set += "}";
      return fail("running intersection fails at block " + std::to_string(l + 2) + ": overlap " + set +
                  " is not inside any earlier block");
    }
  }
  return {};
}

}  // namespace sosra
