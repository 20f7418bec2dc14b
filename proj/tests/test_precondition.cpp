#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sosra/baselines.hpp"
#include "sosra/polycost.hpp"
#include "sosra/precondition.hpp"

using sosra::MeasurementGraph;
using sosra::UnitQuaternion;

namespace {

constexpr double kPi = std::numbers::pi;

MeasurementGraph flip_measurement(const MeasurementGraph& g, int k) {
  std::vector<sosra::Edge> edges = g.edges();
  edges[k].measurement = -edges[k].measurement;
  return MeasurementGraph(g.num_vertices(), edges, g.truth());
}

}  // namespace

TEST(QuaternionSigns, IdentityMeasurementsGiveAllPlus) {
  std::vector<sosra::Edge> edges;
  for (const auto& [i, j] : std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {0, 2}, {2, 3}, {0, 3}}) {
    edges.push_back({i, j, UnitQuaternion::identity()});
  }
  const auto sel = sosra::quaternion_signs(MeasurementGraph(4, edges));
  for (const int s : sel.signs) EXPECT_EQ(s, 1);
  for (const auto& q : sel.chained) EXPECT_EQ(q.vec(), UnitQuaternion::identity().vec());
}

TEST(QuaternionSigns, NegatedLoopClosureOnExactTriangle) {
  const UnitQuaternion q2 = sosra::random_rotation(1);
  const UnitQuaternion q3 = sosra::random_rotation(2);
  const UnitQuaternion e = UnitQuaternion::identity();
  // The breadth-first tree is {(1,2), (1,3)}, so (2,3) closes the loop.
  const std::vector<sosra::Edge> edges{{0, 1, sosra::multiply(e.conj(), q2)},
                                       {0, 2, sosra::multiply(e.conj(), q3)},
                                       {1, 2, -sosra::multiply(q2.conj(), q3)}};
  const MeasurementGraph g(3, edges);
  const auto sel = sosra::quaternion_signs(g);
  EXPECT_EQ(sel.signs[g.find_edge(0, 1)], 1);
  EXPECT_EQ(sel.signs[g.find_edge(0, 2)], 1);
  EXPECT_EQ(sel.signs[g.find_edge(1, 2)], -1);
  EXPECT_LE(sosra::assemble_cost(g, sel.signs).evaluate(sosra::to_point(sel.chained)), 1e-24);
}

TEST(QuaternionSigns, ChainedEstimateFollowsTreeMeasurements) {
  const MeasurementGraph g = sosra::generate_synthetic({7, 5, 1.0, 3});
  const auto sel = sosra::quaternion_signs(g);
  EXPECT_EQ(sel.chained[0].vec(), UnitQuaternion::identity().vec());
  for (const int k : sel.tree.edges) {
    const auto& e = g.edge(k);
    EXPECT_EQ(sel.signs[k], 1);
    EXPECT_LE((oracle::hamilton(sel.chained[e.i], e.measurement) - sel.chained[e.j].vec()).norm(), 1e-12);
  }
}

TEST(QuaternionSigns, NonTreeSignMinimizesResidual) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MeasurementGraph g = sosra::generate_synthetic({8, 6, 2.5, seed});
    const auto sel = sosra::quaternion_signs(g);
    for (int k = 0; k < g.num_edges(); ++k) {
      const auto& e = g.edge(k);
      const Eigen::Vector4d pred = oracle::hamilton(sel.chained[e.i], e.measurement);
      const double chosen = (sel.signs[k] * pred - sel.chained[e.j].vec()).norm();
      const double other = (-sel.signs[k] * pred - sel.chained[e.j].vec()).norm();
      EXPECT_LE(chosen, other + 1e-12);
    }
  }
}

TEST(QuaternionSigns, DeterministicAndExactOnZeroNoise) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MeasurementGraph g = sosra::generate_synthetic({9, 6, 0.0, seed});
    const auto a = sosra::quaternion_signs(g);
    const auto b = sosra::quaternion_signs(g);
    EXPECT_EQ(a.signs, b.signs);
    std::vector<UnitQuaternion> truth = *g.truth();
    for (std::size_t v = 0; v < truth.size(); ++v) {
      EXPECT_NEAR(std::abs(truth[v].vec().dot(a.chained[v].vec())), 1.0, 1e-12);
      if (truth[v].vec().dot(a.chained[v].vec()) < 0.0) truth[v] = -truth[v];
    }
    EXPECT_LE(sosra::assemble_cost(g, a.signs).evaluate(sosra::to_point(truth)), 1e-12);
  }
}

TEST(QuaternionSigns, CostInvariantToStoredSigns) {
  sosra::Rng rng(77);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MeasurementGraph g = sosra::generate_synthetic({6, 4, 1.5, seed});
    const auto sel = sosra::quaternion_signs(g);
    const auto base = sosra::assemble_cost(g, sel.signs);
    for (int k = 0; k < g.num_edges(); ++k) {
      const MeasurementGraph flipped = flip_measurement(g, k);
      const auto fsel = sosra::quaternion_signs(flipped);
      const auto cost = sosra::assemble_cost(flipped, fsel.signs);
      const bool tree_edge = sel.tree.parent_edge[g.edge(k).j] == k || sel.tree.parent_edge[g.edge(k).i] == k;
      if (!tree_edge) {
        EXPECT_EQ(fsel.signs[k], -sel.signs[k]);
        EXPECT_LE(cost.polynomial().distance(base.polynomial()), 1e-12);
        continue;
      }
      // A flipped tree edge negates the chained estimate below it; the cost
      // is the same polynomial after that change of variables.
      std::vector<int> below(g.num_vertices(), 0);
      for (const int v : sel.tree.order) {
        if (v == 0) continue;
        below[v] = sel.tree.parent_edge[v] == k || below[sel.tree.parent[v]];
      }
      for (int trial = 0; trial < 5; ++trial) {
        std::vector<UnitQuaternion> q(g.num_vertices());
        for (int v = 1; v < g.num_vertices(); ++v) q[v] = sosra::random_rotation(rng);
        std::vector<UnitQuaternion> qf = q;
        for (int v = 1; v < g.num_vertices(); ++v) {
          if (below[v]) qf[v] = -q[v];
        }
        EXPECT_NEAR(cost.evaluate(sosra::to_point(qf)), base.evaluate(sosra::to_point(q)), 1e-10);
      }
    }
  }
}

TEST(ExhaustiveSignSearch, RejectsLargeEdgeSets) {
  const MeasurementGraph g = sosra::generate_synthetic({6, 8, 0.1, 0});
  EXPECT_THROW(sosra::exhaustive_sign_search(g, [](const sosra::EdgeSigns&) { return 0.0; }), std::invalid_argument);
}

TEST(ExhaustiveSignSearch, EnumeratesAllPatterns) {
  const MeasurementGraph g = sosra::generate_synthetic({4, 1, 0.1, 0});
  int calls = 0;
  const auto r = sosra::exhaustive_sign_search(g, [&](const sosra::EdgeSigns& s) {
    ++calls;
    int negatives = 0;
    for (const int x : s) negatives += x < 0;
    return static_cast<double>(negatives == 2 ? -1 : negatives);
  });
  EXPECT_EQ(calls, 16);
  EXPECT_EQ(r.costs.size(), 16u);
  EXPECT_EQ(r.best_cost, -1.0);
  EXPECT_EQ(r.best_signs, (sosra::EdgeSigns{-1, -1, 1, 1}));
}

TEST(QuaternionSigns, MatchesExhaustiveSearchOnHighNoiseSmallInstance) {
  // N = 4 with all 6 pairs connected.
  const MeasurementGraph g = sosra::generate_synthetic({4, 3, 0.9 * kPi, 2024});
  ASSERT_EQ(g.num_edges(), 6);
  auto best_local = [&](const sosra::EdgeSigns& s) { return sosra::multi_start(g, s, 20, 5).cost; };
  const auto exhaustive = sosra::exhaustive_sign_search(g, best_local);
  const double chosen = best_local(sosra::quaternion_signs(g).signs);
  EXPECT_NEAR(chosen, exhaustive.best_cost, 1e-6);
}
