#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sosra/precondition.hpp"
#include "sosra/problem.hpp"

using sosra::InstanceConfig;
using sosra::MeasurementGraph;
using sosra::UnitQuaternion;

namespace {

constexpr double kPi = std::numbers::pi;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sosra_test_problem_" + name);
}

MeasurementGraph graph_from_pairs(int n, const std::vector<std::pair<int, int>>& pairs) {
  std::vector<sosra::Edge> edges;
  for (const auto& [i, j] : pairs) edges.push_back({i, j, UnitQuaternion::identity()});
  return MeasurementGraph(n, edges);
}

std::set<std::pair<int, int>> tree_pairs(const MeasurementGraph& g) {
  std::set<std::pair<int, int>> out;
  for (const int k : sosra::spanning_tree(g).edges) out.emplace(g.edge(k).i, g.edge(k).j);
  return out;
}

}  // namespace

TEST(GenerateSynthetic, EdgeCounts) {
  EXPECT_EQ(sosra::generate_synthetic({5, 0, 0.3, 1}).num_edges(), 4);
  EXPECT_EQ(sosra::generate_synthetic({10, 5, 0.3, 1}).num_edges(), 14);
}

TEST(GenerateSynthetic, RejectsBadConfig) {
  EXPECT_THROW(sosra::generate_synthetic({4, 4, 0.1, 0}), std::invalid_argument);  // only 3 non-chain pairs
  EXPECT_NO_THROW(sosra::generate_synthetic({4, 3, 0.1, 0}));
  EXPECT_THROW(sosra::generate_synthetic({1, 0, 0.1, 0}), std::invalid_argument);
  EXPECT_THROW(sosra::generate_synthetic({4, 0, -0.1, 0}), std::invalid_argument);
  EXPECT_THROW(sosra::generate_synthetic({4, 0, 4.0, 0}), std::invalid_argument);
}

TEST(GenerateSynthetic, ZeroNoiseTruthHasZeroCostUnderOptimalSigns) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MeasurementGraph g = sosra::generate_synthetic({6, 4, 0.0, seed});
    const auto& truth = *g.truth();
    std::vector<int> signs(g.num_edges());
    for (int k = 0; k < g.num_edges(); ++k) {
      const auto& e = g.edge(k);
      const Eigen::Vector4d pred = oracle::hamilton(truth[e.i], e.measurement);
      signs[k] = (pred - truth[e.j].vec()).norm() < (pred + truth[e.j].vec()).norm() ? 1 : -1;
    }
    EXPECT_LE(oracle::edge_cost(g, signs, truth), 1e-24);
  }
}

TEST(GenerateSynthetic, StructuralProperties) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int n = 3 + static_cast<int>(seed % 8);
    const int loops = static_cast<int>(seed % (sosra::max_loop_closures(n) + 1));
    const double theta = 0.9 * kPi * static_cast<double>(seed % 5) / 4.0;
    const MeasurementGraph g = sosra::generate_synthetic({n, loops, theta, seed});
    ASSERT_EQ(g.num_edges(), n - 1 + loops);
    for (int v = 0; v + 1 < n; ++v) EXPECT_GE(g.find_edge(v, v + 1), 0);
    const auto& truth = *g.truth();
    EXPECT_EQ(truth[0].vec(), UnitQuaternion::identity().vec());
    for (const auto& e : g.edges()) {
      EXPECT_LT(e.i, e.j);
      EXPECT_NEAR(e.measurement.vec().norm(), 1.0, 1e-12);
      const UnitQuaternion exact = sosra::multiply(truth[e.i].conj(), truth[e.j]);
      EXPECT_LE(oracle::geodesic_angle(exact, e.measurement), theta + 1e-7);
    }
    const MeasurementGraph again = sosra::generate_synthetic({n, loops, theta, seed});
    EXPECT_EQ(sosra::to_text(g), sosra::to_text(again));
  }
}

TEST(GenerateSynthetic, StoredSignsAreRandomized) {
  int negative_w_relative = 0;
  int total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MeasurementGraph g = sosra::generate_synthetic({8, 4, 0.0, seed});
    const auto& truth = *g.truth();
    for (const auto& e : g.edges()) {
      const Eigen::Vector4d exact = sosra::multiply(truth[e.i].conj(), truth[e.j]).vec();
      negative_w_relative += exact.dot(e.measurement.vec()) < 0.0;
      ++total;
    }
  }
  EXPECT_GT(negative_w_relative, total / 4);
  EXPECT_LT(negative_w_relative, 3 * total / 4);
}

TEST(TextFormat, RoundTripIsBitIdentical) {
  const MeasurementGraph g = sosra::generate_synthetic({5, 2, 0.7, 17});
  const auto a = temp_path("a.txt");
  const auto b = temp_path("b.txt");
  sosra::save(g, a.string());
  sosra::save(sosra::load(a.string()), b.string());
  EXPECT_EQ(read_file(a), read_file(b));
  const MeasurementGraph back = sosra::load(a.string());
  for (int k = 0; k < g.num_edges(); ++k) EXPECT_EQ(back.edge(k).measurement.vec(), g.edge(k).measurement.vec());
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST(TextFormat, CommentsAndReversedEdges) {
  const std::string text =
      "# header comment\n"
      "N 3   # three vertices\n"
      "\n"
      "EDGE_QUAT 2 1 0 1 0 0\n"
      "EDGE_QUAT 2 3 1 0 0 0\n";
  const MeasurementGraph g = sosra::parse_text(text);
  ASSERT_EQ(g.num_edges(), 2);
  EXPECT_EQ(g.edge(0).i, 0);
  EXPECT_EQ(g.edge(0).j, 1);
  EXPECT_EQ(g.edge(0).measurement.vec(), Eigen::Vector4d(0, -1, 0, 0));
  EXPECT_FALSE(g.truth().has_value());
}

TEST(TextFormat, DuplicateEdgeErrorNamesLine) {
  const std::string text = "N 3\nEDGE_QUAT 1 2 1 0 0 0\nEDGE_QUAT 2 3 1 0 0 0\nEDGE_QUAT 2 1 1 0 0 0\n";
  try {
    sosra::parse_text(text);
    FAIL() << "expected ParseError";
  } catch (const sosra::ParseError& e) {
    EXPECT_EQ(e.line(), 4);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
}

TEST(TextFormat, VertexOutOfRange) {
  for (const std::string bad : {"N 3\nEDGE_QUAT 0 2 1 0 0 0\n", "N 3\nEDGE_QUAT 1 4 1 0 0 0\n"}) {
    try {
      sosra::parse_text(bad);
      FAIL() << "expected ParseError";
    } catch (const sosra::ParseError& e) {
      EXPECT_EQ(e.line(), 2);
    }
  }
}

TEST(TextFormat, OtherMalformedInput) {
  EXPECT_THROW(sosra::parse_text(""), sosra::ParseError);
  EXPECT_THROW(sosra::parse_text("EDGE_QUAT 1 2 1 0 0 0\n"), sosra::ParseError);
  EXPECT_THROW(sosra::parse_text("N 2\nEDGE_QUAT 1 2 1 0 0\n"), sosra::ParseError);
  EXPECT_THROW(sosra::parse_text("N 2\nEDGE_QUAT 1 2 1 0 0 zero\n"), sosra::ParseError);
  EXPECT_THROW(sosra::parse_text("N 2\nEDGE_QUAT 1 2 2 0 0 0\n"), sosra::ParseError);
  EXPECT_THROW(sosra::parse_text("N 2\nEDGE_QUAT 1 1 1 0 0 0\n"), sosra::ParseError);
  EXPECT_THROW(sosra::parse_text("N 2\nBOGUS 1\n"), sosra::ParseError);
  EXPECT_THROW(sosra::parse_text("N 2\nEDGE_QUAT 1 2 1 0 0 0\nTRUTH 1 1 0 0 0\n"), sosra::ParseError);
  EXPECT_THROW(sosra::parse_text("N 3\nEDGE_QUAT 1 2 1 0 0 0\n"), sosra::InvalidInput);
  EXPECT_THROW(sosra::load("/nonexistent/instance.txt"), std::exception);
}

TEST(SpanningTree, ChainIsItsOwnTree) {
  const MeasurementGraph g = graph_from_pairs(4, {{0, 1}, {1, 2}, {2, 3}});
  EXPECT_EQ(tree_pairs(g), (std::set<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}}));
}

TEST(SpanningTree, TriangleUnderBreadthFirstByIndex) {
  // Breadth-first from vertex 1 reaches 2 and 3 directly.
  const MeasurementGraph g = graph_from_pairs(3, {{0, 1}, {1, 2}, {0, 2}});
  EXPECT_EQ(tree_pairs(g), (std::set<std::pair<int, int>>{{0, 1}, {0, 2}}));
}

TEST(SpanningTree, TreeInputReturnedUnchanged) {
  const MeasurementGraph g = graph_from_pairs(6, {{0, 3}, {3, 1}, {3, 5}, {1, 2}, {2, 4}});
  std::set<std::pair<int, int>> all;
  for (const auto& e : g.edges()) all.emplace(e.i, e.j);
  EXPECT_EQ(tree_pairs(g), all);
}

TEST(SpanningTree, DisconnectedGraphRejected) {
  EXPECT_THROW(graph_from_pairs(4, {{0, 1}, {2, 3}}), sosra::InvalidInput);
}

TEST(SpanningTree, PropertiesOnRandomGraphs) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const int n = 3 + static_cast<int>(seed % 12);
    const MeasurementGraph g =
        sosra::generate_synthetic({n, static_cast<int>(seed % (sosra::max_loop_closures(n) + 1)), 0.2, seed});
    const auto t = sosra::spanning_tree(g);
    ASSERT_EQ(static_cast<int>(t.edges.size()), n - 1);
    EXPECT_EQ(t.order.front(), 0);
    EXPECT_EQ(t.parent[0], -1);
    for (int v = 1; v < n; ++v) {
      const auto& e = g.edge(t.parent_edge[v]);
      EXPECT_TRUE((e.i == v && e.j == t.parent[v]) || (e.j == v && e.i == t.parent[v]));
    }
    // Parents precede children in the visiting order.
    std::vector<int> pos(n);
    for (int k = 0; k < n; ++k) pos[t.order[k]] = k;
    for (int v = 1; v < n; ++v) EXPECT_LT(pos[t.parent[v]], pos[v]);
  }
}
