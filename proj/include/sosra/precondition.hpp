#pragma once

// Quaternion sign selection. Fixing one sign per measurement turns the
// quaternionic cost into a single polynomial.

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sosra/problem.hpp"
#include "sosra/quat.hpp"

namespace sosra {

/// One sign (+1 / -1) per edge, indexed like MeasurementGraph::edges().
using EdgeSigns = std::vector<int>;

struct SignSelection {
  EdgeSigns signs;
  std::vector<UnitQuaternion> chained;  // q_0 = e, propagated along the tree
  SpanningTree tree;
};

/// Tree edges get +1 and define the chained estimate. Every other edge takes
/// the sign minimizing |q_i o (s * m_ij) - q_j|; ties go to +1.
inline SignSelection quaternion_signs(const MeasurementGraph& g) {
  SignSelection out;
  out.tree = spanning_tree(g);
  out.signs.assign(g.num_edges(), 0);
  out.chained.assign(g.num_vertices(), UnitQuaternion::identity());
  for (const int v : out.tree.order) {
    if (v == 0) continue;
    const int p = out.tree.parent[v];
    const Edge& e = g.edge(out.tree.parent_edge[v]);
    out.chained[v] = (e.i == p) ? multiply(out.chained[p], e.measurement)
                                : multiply(out.chained[p], e.measurement.conj());
    out.signs[out.tree.parent_edge[v]] = 1;
  }
  for (int k = 0; k < g.num_edges(); ++k) {
    if (out.signs[k] != 0) continue;
    const Edge& e = g.edge(k);
    const Eigen::Vector4d pred = multiply(out.chained[e.i], e.measurement).vec();
    const Eigen::Vector4d& qj = out.chained[e.j].vec();
    out.signs[k] = ((-pred - qj).norm() < (pred - qj).norm()) ? -1 : 1;
  }
  return out;
}

struct ExhaustiveSignResult {
  EdgeSigns best_signs;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<double> costs;  // indexed by the bit pattern, bit k set <=> sign_k = -1
};

/// Enumerates all 2^M sign vectors and scores each with `optimal_cost`,
/// a callable (const EdgeSigns&) -> double. Intended for test oracles.
template <typename CostFn>
ExhaustiveSignResult exhaustive_sign_search(const MeasurementGraph& g, CostFn&& optimal_cost) {
  const int m = g.num_edges();
  if (m > 12) throw std::invalid_argument("exhaustive_sign_search: at most 12 edges");
  ExhaustiveSignResult out;
  out.costs.resize(std::size_t{1} << m);
  EdgeSigns signs(m);
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    for (int k = 0; k < m; ++k) signs[k] = (mask >> k) & 1u ? -1 : 1;
    const double c = optimal_cost(signs);
    out.costs[mask] = c;
    if (c < out.best_cost) {
      out.best_cost = c;
      out.best_signs = signs;
    }
  }
  return out;
}

}  // namespace sosra
