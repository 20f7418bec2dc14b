#pragma once

/**
 * @file sbsos.hpp
 * @brief Sparse bounded-degree SOS relaxation (multiplier degree 1, SOS
 *        degree 1) of the anchored rotation averaging problem, moment-based
 *        extraction, certification, and the dense Shor relaxation baseline.
 *
 * Certificate searched for:
 *
 *   f(x) - t = sum_l m_l(x)' G_l m_l(x)
 *            + sum_l sum_{j in J_l} ( lp_lj g_j(x) + lm_lj (1 - g_j(x)) ),
 *
 * with G_l PSD over the basis m_l = (1, scalars of block l), lp, lm >= 0 and
 * t free; maximize t. The constant multiplier is folded into t. Constraints
 * of the anchored vertex are constants and are left out.
 */

#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sosra/baselines.hpp"
#include "sosra/partition.hpp"
#include "sosra/polycost.hpp"
#include "sosra/polynomial.hpp"
#include "sosra/precondition.hpp"
#include "sosra/problem.hpp"
#include "sosra/quat.hpp"
#include "sosra/sdp.hpp"

namespace sosra {

class UnsupportedLevel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BsosLevel {
  int d = 1;  // multiplier degree bound
  int k = 1;  // SOS degree bound
};

struct RelaxationOptions {
  bool upper_norm = true;  // keep 0 <= 2 - q'q <= 1; dropping it relaxes the sphere to the ball
};

struct GramBlock {
  std::vector<int> vertices;  // free vertices of the partition block
  std::vector<int> scalars;   // basis after the leading 1
  int psd_block = 0;
  int size() const { return 1 + static_cast<int>(scalars.size()); }
};

struct Multiplier {
  int block = 0;
  int vertex = 0;
  int constraint = 0;       // per-vertex constraint index
  bool complement = false;  // multiplies 1 - g instead of g
  int column = 0;           // nonnegative variable in the SDP
};

struct RelaxationSDP {
  SdpProblem sdp;
  int t_column = 0;
  std::vector<GramBlock> gram;
  std::vector<Multiplier> multipliers;
  std::vector<Monomial> row_monomial;
  std::map<Monomial, int> monomial_row;
  Polynomial target;
  int num_vertices = 0;
  RelaxationOptions options;

  int multipliers_in_block(int l) const {
    int n = 0;
    for (const auto& m : multipliers) n += (m.block == l);
    return n;
  }

  /// t + h(x, lambda) + sum_l m_l' G_l m_l, assembled term by term.
  Polynomial reconstruct(double t, const Eigen::VectorXd& lambda, const std::vector<Eigen::MatrixXd>& grams) const {
    Polynomial p(t);
    for (std::size_t i = 0; i < multipliers.size(); ++i) {
      const auto& m = multipliers[i];
      Polynomial g = constraint_polynomial(m.vertex, m.constraint);
      if (m.complement) g = Polynomial(1.0) - g;
      p += lambda[static_cast<Eigen::Index>(i)] * g;
    }
    for (std::size_t l = 0; l < gram.size(); ++l) {
      const auto& blk = gram[l];
      std::vector<Monomial> basis{Monomial::constant()};
      for (const int s : blk.scalars) basis.push_back(Monomial::linear(s));
      for (int a = 0; a < blk.size(); ++a) {
        for (int b = 0; b < blk.size(); ++b) p.add(Monomial::product(basis[a], basis[b]), grams[l](a, b));
      }
    }
    return p;
  }
};

inline RelaxationSDP build_relaxation(const MeasurementGraph& g, const EdgeSigns& signs,
                                      const VariablePartition& part, const BsosLevel& level = {},
                                      const RelaxationOptions& opts = {}) {
  if (level.d < 1 || level.k < 1) throw std::invalid_argument("build_relaxation: level bounds must be >= 1");
  if (level.d != 1 || level.k != 1) {
    throw UnsupportedLevel("build_relaxation: only level (d, k) = (1, 1) is supported");
  }
  if (const RipReport rip = verify_rip(g, part); !rip) {
    throw std::invalid_argument("build_relaxation: partition violates RIP: " + rip.violation);
  }
  const int cpv = part.constraints_per_vertex;
  if (cpv != kConstraintsPerVertex && cpv != kNormConstraintsPerVertex) {
    throw std::invalid_argument("build_relaxation: unsupported constraints per vertex");
  }

  RelaxationSDP r;
  r.num_vertices = g.num_vertices();
  r.options = opts;
  r.target = assemble_cost(g, signs).polynomial();
  SdpProblem& sdp = r.sdp;
  std::map<Monomial, SdpRow> rows;

  r.t_column = sdp.add_free(-1.0);
  rows[Monomial::constant()].free.push_back({r.t_column, 1.0});

  for (int l = 0; l < part.size(); ++l) {
    GramBlock blk;
    for (const int v : part.blocks[l]) {
      if (v == 0) continue;
      blk.vertices.push_back(v);
      for (int c = 0; c < 4; ++c) blk.scalars.push_back(scalar_index(v, c));
    }
    blk.psd_block = sdp.add_psd_block(blk.size());
    std::vector<Monomial> basis{Monomial::constant()};
    for (const int s : blk.scalars) basis.push_back(Monomial::linear(s));
    for (int a = 0; a < blk.size(); ++a) {
      for (int b = a; b < blk.size(); ++b) {
        rows[Monomial::product(basis[a], basis[b])].psd.push_back({blk.psd_block, a, b, 1.0});
      }
    }
    for (const int j : part.constraints[l]) {
      const int v = j / cpv;
      const int k = j % cpv;
      if (v == 0 || (k == 1 && !opts.upper_norm)) continue;
      const Polynomial gj = constraint_polynomial(v, k);
      for (const bool complement : {false, true}) {
        const Polynomial h = complement ? Polynomial(1.0) - gj : gj;
        const int col = sdp.add_nonneg(0.0);
        r.multipliers.push_back({l, v, k, complement, col});
        for (const auto& [mono, coef] : h.terms()) rows[mono].nonneg.push_back({col, coef});
      }
    }
    r.gram.push_back(std::move(blk));
  }
  for (const auto& [mono, coef] : r.target.terms()) {
    const auto it = rows.find(mono);
    if (it == rows.end()) throw std::logic_error("build_relaxation: cost monomial " + mono.to_string() + " not covered");
    it->second.rhs = coef;
  }
  for (auto& [mono, row] : rows) {
    r.monomial_row[mono] = static_cast<int>(r.row_monomial.size());
    r.row_monomial.push_back(mono);
    sdp.rows.push_back(std::move(row));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Certification.

enum class Verdict { kCertifiedOptimal, kGapTooLarge, kSolverFailure };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kCertifiedOptimal:
      return "certified-optimal";
    case Verdict::kGapTooLarge:
      return "gap-too-large";
    case Verdict::kSolverFailure:
      return "solver-failure";
  }
  return "unknown";
}

inline constexpr double kDefaultCertTolerance = 1e-6;

struct Certificate {
  double t_star = 0.0;
  double cost = 0.0;
  double gap_abs = 0.0;  // cost - t_star
  double gap_rel = 0.0;  // gap_abs / max(1, |cost|)
  Verdict verdict = Verdict::kSolverFailure;
  int solver_iters = 0;
  double wall_time_ms = 0.0;
  bool low_confidence_extraction = false;
  std::vector<UnitQuaternion> quaternions;
  std::string solver_message;
};

inline Certificate certify(double t_star, const std::vector<UnitQuaternion>& candidate, const QuadraticCost& cost,
                           double cert_tol = kDefaultCertTolerance, bool solver_ok = true) {
  Certificate c;
  c.t_star = t_star;
  c.quaternions = candidate;
  c.cost = cost.evaluate(to_point(candidate));
  c.gap_abs = c.cost - t_star;
  c.gap_rel = c.gap_abs / std::max(1.0, std::abs(c.cost));
  if (!solver_ok || !std::isfinite(t_star)) {
    c.verdict = Verdict::kSolverFailure;
  } else {
    c.verdict = std::abs(c.gap_abs) <= cert_tol * std::max(1.0, std::abs(c.cost)) ? Verdict::kCertifiedOptimal
                                                                                  : Verdict::kGapTooLarge;
  }
  return c;
}

inline nlohmann::json to_json(const Certificate& c) {
  nlohmann::json quats = nlohmann::json::array();
  for (const auto& q : c.quaternions) quats.push_back({q.w(), q.x(), q.y(), q.z()});
  return {{"t_star", c.t_star},
          {"cost", c.cost},
          {"gap_abs", c.gap_abs},
          {"gap_rel", c.gap_rel},
          {"verdict", to_string(c.verdict)},
          {"solver_iters", c.solver_iters},
          {"wall_time_ms", c.wall_time_ms},
          {"low_confidence_extraction", c.low_confidence_extraction},
          {"per_vertex_quaternions", quats}};
}

// ---------------------------------------------------------------------------
// Extraction.

struct Extraction {
  std::vector<UnitQuaternion> raw;        // normalized, sign-reconciled moments
  std::vector<UnitQuaternion> candidate;  // after local polish
  bool low_confidence = false;
};

inline constexpr double kLowConfidenceMomentNorm = 0.1;

/// Normalizes per-vertex first moments, aligns their signs with the
/// measurements along the BFS tree (kept only when that lowers the cost),
/// then polishes with the local solver.
inline Extraction extract_from_moments(const Eigen::VectorXd& moments, const MeasurementGraph& g,
                                       const EdgeSigns& signs, const QuadraticCost& cost,
                                       const LocalOptions& local = {}) {
  Extraction ex;
  const int n = g.num_vertices();
  const std::vector<UnitQuaternion> fallback = chained_initialization(g, signs);
  std::vector<UnitQuaternion> q(n);
  for (int v = 1; v < n; ++v) {
    const Eigen::Vector4d m = moments.segment<4>(scalar_index(v, 0));
    const double norm = m.norm();
    if (!(norm >= kLowConfidenceMomentNorm)) ex.low_confidence = true;
    q[v] = (norm > 1e-12 && std::isfinite(norm)) ? UnitQuaternion::normalized(m) : fallback[v];
  }
  const SpanningTree tree = spanning_tree(g);
  std::vector<UnitQuaternion> aligned = q;
  for (const int v : tree.order) {
    if (v == 0) continue;
    const int p = tree.parent[v];
    const Edge& e = g.edge(tree.parent_edge[v]);
    const UnitQuaternion m = signs[tree.parent_edge[v]] < 0 ? -e.measurement : e.measurement;
    const Eigen::Vector4d pred = (e.i == p ? multiply(aligned[p], m) : multiply(aligned[p], m.conj())).vec();
    if ((pred + aligned[v].vec()).norm() < (pred - aligned[v].vec()).norm()) aligned[v] = -aligned[v];
  }
  ex.raw = cost.evaluate(to_point(aligned)) < cost.evaluate(to_point(q)) ? aligned : q;
  ex.candidate = local_solve(cost, ex.raw, local).solution;
  return ex;
}

struct PipelineOptions {
  double cert_tol = kDefaultCertTolerance;
  bool junction_tree = true;  // false: one block holding every vertex
  bool redundant_boxes = true;
  RelaxationOptions relaxation;
  SdpOptions sdp;
  LocalOptions local;
};

struct PipelineResult {
  Certificate certificate;
  SdpSolution sdp;
  SignSelection signs;
  Extraction extraction;
  std::vector<int> psd_dims;
};

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

inline PipelineResult solve_sbsos_with_signs(const MeasurementGraph& g, const SignSelection& sel,
                                             const PipelineOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  const int cpv = opts.redundant_boxes ? kConstraintsPerVertex : kNormConstraintsPerVertex;
  const VariablePartition part = opts.junction_tree ? junction_tree_partition(g, cpv) : single_block_partition(g, cpv);
  const RelaxationSDP relax = build_relaxation(g, sel.signs, part, {}, opts.relaxation);
  const QuadraticCost cost = assemble_cost(g, sel.signs);

  PipelineResult out;
  out.signs = sel;
  out.psd_dims = relax.sdp.psd_dims;
  out.sdp = solve(relax.sdp, opts.sdp);
  const bool ok = out.sdp.status == SdpStatus::kOptimal;
  const double t_star = out.sdp.x_free.size() > 0 ? out.sdp.x_free[relax.t_column] : std::nan("");

  Eigen::VectorXd moments = Eigen::VectorXd::Zero(cost.dim());
  const double y0 = out.sdp.y.size() > 0 ? out.sdp.y[relax.monomial_row.at(Monomial::constant())] : 0.0;
  for (int s = 0; s < cost.dim(); ++s) {
    const auto it = relax.monomial_row.find(Monomial::linear(s));
    if (it != relax.monomial_row.end() && y0 != 0.0) moments[s] = out.sdp.y[it->second] / y0;
  }
  out.extraction = extract_from_moments(moments, g, sel.signs, cost, opts.local);
  out.certificate = certify(t_star, out.extraction.candidate, cost, opts.cert_tol, ok);
  out.certificate.solver_iters = out.sdp.iterations;
  out.certificate.low_confidence_extraction = out.extraction.low_confidence;
  out.certificate.solver_message = to_string(out.sdp.status);
  out.certificate.wall_time_ms = elapsed_ms(start);
  return out;
}

/// Sign selection, partition, relaxation, extraction and certification.
inline PipelineResult solve_sbsos(const MeasurementGraph& g, const PipelineOptions& opts = {}) {
  return solve_sbsos_with_signs(g, quaternion_signs(g), opts);
}

// ---------------------------------------------------------------------------
// Dense Shor relaxation of the anchored QCQP.

struct FredrikssonSDP {
  SdpProblem sdp;
  int dim = 0;
};

/// One PSD matrix X over (1, x): X_00 = 1, unit block traces, objective
/// <[r p'; p P], X>.
inline FredrikssonSDP build_fredriksson_sdp(const MeasurementGraph& g, const EdgeSigns& signs) {
  const QuadraticCost cost = assemble_cost(g, signs);
  const Eigen::MatrixXd c = cost.augmented_matrix();
  FredrikssonSDP f;
  f.dim = static_cast<int>(c.rows());
  const int blk = f.sdp.add_psd_block(f.dim);
  for (int a = 0; a < f.dim; ++a) {
    for (int b = a; b < f.dim; ++b) {
      if (c(a, b) != 0.0) f.sdp.objective_psd.push_back({blk, a, b, c(a, b)});
    }
  }
  f.sdp.add_row(1.0).psd.push_back({blk, 0, 0, 1.0});
  for (int v = 1; v < g.num_vertices(); ++v) {
    SdpRow& row = f.sdp.add_row(1.0);
    for (int k = 0; k < 4; ++k) {
      const int s = 1 + scalar_index(v, k);
      row.psd.push_back({blk, s, s, 1.0});
    }
  }
  return f;
}

inline PipelineResult solve_fredriksson_with_signs(const MeasurementGraph& g, const SignSelection& sel,
                                                   const PipelineOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  const FredrikssonSDP f = build_fredriksson_sdp(g, sel.signs);
  const QuadraticCost cost = assemble_cost(g, sel.signs);
  PipelineResult out;
  out.signs = sel;
  out.psd_dims = f.sdp.psd_dims;
  out.sdp = solve(f.sdp, opts.sdp);
  const bool ok = out.sdp.status == SdpStatus::kOptimal;
  Eigen::VectorXd moments = Eigen::VectorXd::Zero(cost.dim());
  if (!out.sdp.x.empty() && out.sdp.x[0](0, 0) > 0.0) {
    moments = out.sdp.x[0].block(0, 1, 1, cost.dim()).transpose() / out.sdp.x[0](0, 0);
  }
  out.extraction = extract_from_moments(moments, g, sel.signs, cost, opts.local);
  out.certificate = certify(out.sdp.dual_objective, out.extraction.candidate, cost, opts.cert_tol, ok);
  out.certificate.solver_iters = out.sdp.iterations;
  out.certificate.low_confidence_extraction = out.extraction.low_confidence;
  out.certificate.solver_message = to_string(out.sdp.status);
  out.certificate.wall_time_ms = elapsed_ms(start);
  return out;
}

inline PipelineResult solve_fredriksson(const MeasurementGraph& g, const PipelineOptions& opts = {}) {
  return solve_fredriksson_with_signs(g, quaternion_signs(g), opts);
}

}  // namespace sosra
