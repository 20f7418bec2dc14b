#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sosra/baselines.hpp"
#include "sosra/bench.hpp"
#include "sosra/sbsos.hpp"

using sosra::MeasurementGraph;
using sosra::UnitQuaternion;

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST(TangentBasis, OrthonormalAndTangent) {
  sosra::Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Vector4d q = sosra::random_rotation(rng).vec();
    const auto b = sosra::detail::tangent_basis(q);
    EXPECT_LE((b.transpose() * b - Eigen::Matrix3d::Identity()).norm(), 1e-12);
    EXPECT_LE((b.transpose() * q).norm(), 1e-12);
    // Columns are q o i, q o j, q o k.
    const UnitQuaternion uq = UnitQuaternion::normalized(q);
    EXPECT_LE((b.col(0) - oracle::hamilton(uq, UnitQuaternion(0, 1, 0, 0))).norm(), 1e-12);
    EXPECT_LE((b.col(2) - oracle::hamilton(uq, UnitQuaternion(0, 0, 0, 1))).norm(), 1e-12);
  }
}

TEST(LocalSolve, ZeroNoiseFromTruthNeedsNoSteps) {
  const MeasurementGraph g = sosra::generate_synthetic({6, 3, 0.0, 1});
  const auto sel = sosra::quaternion_signs(g);
  std::vector<UnitQuaternion> truth = *g.truth();
  for (std::size_t v = 0; v < truth.size(); ++v) {
    if (truth[v].vec().dot(sel.chained[v].vec()) < 0.0) truth[v] = -truth[v];
  }
  const auto r = sosra::local_solve(g, sel.signs, truth);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_LE(r.cost, 1e-12);
}

TEST(LocalSolve, ZeroNoiseFromChainedInitRecoversTruth) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MeasurementGraph g = sosra::generate_synthetic({8, 5, 0.0, seed});
    const auto sel = sosra::quaternion_signs(g);
    const auto r = sosra::local_solve(g, sel.signs, sosra::chained_initialization(g, sel.signs));
    EXPECT_TRUE(r.converged);
    EXPECT_LE(sosra::mean_quaternion_norm_error(r.solution, *g.truth()), 1e-6);
  }
}

TEST(LocalSolve, ChainedInitializationMatchesSignSelection) {
  const MeasurementGraph g = sosra::generate_synthetic({7, 4, 1.0, 2});
  const auto sel = sosra::quaternion_signs(g);
  const auto init = sosra::chained_initialization(g, sel.signs);
  for (int v = 0; v < g.num_vertices(); ++v) EXPECT_LE((init[v].vec() - sel.chained[v].vec()).norm(), 1e-15);
}

TEST(LocalSolve, IteratesStayFeasibleAndCostDecreases) {
  sosra::Rng rng(3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MeasurementGraph g = sosra::generate_synthetic({6, 4, 2.5, seed});
    const auto sel = sosra::quaternion_signs(g);
    std::vector<UnitQuaternion> init(g.num_vertices());
    for (int v = 1; v < g.num_vertices(); ++v) init[v] = sosra::random_rotation(rng);
    const auto r = sosra::local_solve(g, sel.signs, init);
    EXPECT_TRUE(r.converged) << "seed " << seed << " grad " << r.grad_norm;
    ASSERT_EQ(static_cast<int>(r.cost_history.size()), r.iterations + 1);
    for (std::size_t k = 1; k < r.cost_history.size(); ++k) EXPECT_LE(r.cost_history[k], r.cost_history[k - 1]);
    for (const auto& q : r.solution) EXPECT_NEAR(q.vec().norm(), 1.0, 1e-12);
    EXPECT_EQ(r.solution[0].vec(), UnitQuaternion::identity().vec());
    EXPECT_NEAR(r.cost, sosra::assemble_cost(g, sel.signs).evaluate(sosra::to_point(r.solution)), 1e-9);
  }
}

TEST(LocalSolve, RejectsWrongInitSize) {
  const MeasurementGraph g = sosra::generate_synthetic({4, 0, 0.1, 0});
  EXPECT_THROW(sosra::local_solve(g, {1, 1, 1}, std::vector<UnitQuaternion>(3)), std::invalid_argument);
}

TEST(LocalSolve, NeverBelowCertifiedBound) {
  sosra::Rng rng(4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MeasurementGraph g = sosra::generate_synthetic({6, 3, 0.9 * kPi, 200 + seed});
    const auto sb = sosra::solve_sbsos(g);
    for (int s = 0; s < 10; ++s) {
      std::vector<UnitQuaternion> init(g.num_vertices());
      for (int v = 1; v < g.num_vertices(); ++v) init[v] = sosra::random_rotation(rng);
      EXPECT_GE(sosra::local_solve(g, sb.signs.signs, init).cost, sb.certificate.t_star - 1e-7);
    }
  }
}

TEST(MultiStart, SingleStartIsChainedLocalSolve) {
  const MeasurementGraph g = sosra::generate_synthetic({6, 3, 2.0, 5});
  const auto sel = sosra::quaternion_signs(g);
  const auto one = sosra::multi_start(g, sel.signs, 1, 99);
  const auto direct = sosra::local_solve(g, sel.signs, sosra::chained_initialization(g, sel.signs));
  EXPECT_EQ(one.cost, direct.cost);
  EXPECT_THROW(sosra::multi_start(g, sel.signs, 0, 1), std::invalid_argument);
}

TEST(MultiStart, MonotoneInCountAndDeterministic) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MeasurementGraph g = sosra::generate_synthetic({6, 4, 0.9 * kPi, 300 + seed});
    const auto signs = sosra::quaternion_signs(g).signs;
    double prev = std::numeric_limits<double>::infinity();
    for (const int count : {1, 2, 5, 10, 30}) {
      const double c = sosra::multi_start(g, signs, count, seed).cost;
      EXPECT_LE(c, prev);
      prev = c;
    }
    EXPECT_EQ(sosra::multi_start(g, signs, 10, 7).cost, sosra::multi_start(g, signs, 10, 7).cost);
  }
}

TEST(LocalVsGlobal, HighNoiseOrdering) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MeasurementGraph g = sosra::generate_synthetic({8, 4, 0.9 * kPi, seed});
    const auto sb = sosra::solve_sbsos(g);
    ASSERT_EQ(sb.certificate.verdict, sosra::Verdict::kCertifiedOptimal);
    const auto local = sosra::local_solve(g, sb.signs.signs, sb.signs.chained);
    EXPECT_LE(sb.certificate.cost, local.cost + 1e-9);
  }
  // Strict improvement on some seed is reported by the acceptance run.
}
