#pragma once

// Local baseline: Newton-type descent on the product of unit spheres with
// projection back onto the spheres after every step, plus a multi-start
// wrapper used as a brute-force oracle.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "sosra/polycost.hpp"
#include "sosra/precondition.hpp"
#include "sosra/problem.hpp"
#include "sosra/quat.hpp"
#include "sosra/rng.hpp"

namespace sosra {

struct LocalOptions {
  int max_iter = 500;
  double grad_tol = 1e-10;
  double armijo_c = 1e-4;
  double shrink = 0.5;
};

struct LocalResult {
  std::vector<UnitQuaternion> solution;
  double cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  bool precision_limited = false;  // stopped because no step could decrease the cost in floating point
  std::vector<double> cost_history;  // cost after every accepted step, starting with the initial cost
};

namespace detail {

// Orthonormal basis of the tangent space at unit q: q o i, q o j, q o k.
inline Eigen::Matrix<double, 4, 3> tangent_basis(const Eigen::Vector4d& q) {
  Eigen::Matrix<double, 4, 3> b;
  b.col(0) << -q[1], q[0], q[3], -q[2];
  b.col(1) << -q[2], -q[3], q[0], q[1];
  b.col(2) << -q[3], q[2], -q[1], q[0];
  return b;
}

inline void project_to_spheres(Eigen::VectorXd& x) {
  for (Eigen::Index v = 0; v < x.size() / 4; ++v) x.segment<4>(4 * v).normalize();
}

}  // namespace detail

/// Minimizes the anchored cost from `init`; init[0] is ignored and vertex 0
/// stays at the identity.
inline LocalResult local_solve(const QuadraticCost& cost, const std::vector<UnitQuaternion>& init,
                               const LocalOptions& opts = {}) {
  if (static_cast<int>(init.size()) != cost.num_vertices()) {
    throw std::invalid_argument("local_solve: init has " + std::to_string(init.size()) + " quaternions, expected " +
                                std::to_string(cost.num_vertices()));
  }
  const int nfree = cost.num_vertices() - 1;
  const int d = cost.dim();
  Eigen::VectorXd x = to_point(init);
  detail::project_to_spheres(x);
  const Eigen::MatrixXd hess = cost.hessian();
  double f = cost.evaluate(x);

  LocalResult out;
  out.cost_history.push_back(f);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(d, 3 * nfree);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Eigen::VectorXd grad = cost.gradient(x);
    for (int v = 0; v < nfree; ++v) basis.block<4, 3>(4 * v, 3 * v) = detail::tangent_basis(x.segment<4>(4 * v));
    const Eigen::VectorXd rgrad = basis.transpose() * grad;
    out.grad_norm = rgrad.norm();
    if (out.grad_norm <= opts.grad_tol) {
      out.converged = true;
      break;
    }
    Eigen::MatrixXd rhess = basis.transpose() * hess * basis;
    for (int v = 0; v < nfree; ++v) {
      const double mu = 0.5 * x.segment<4>(4 * v).dot(grad.segment<4>(4 * v));
      rhess.block<3, 3>(3 * v, 3 * v).diagonal().array() -= 2.0 * mu;
    }
    // Saddle-free Newton: invert |eigenvalues|, and step along the most
    // negative curvature direction when there is one.
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rhess);
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const Eigen::MatrixXd& vecs = eig.eigenvectors();
    const double floor = 1e-10 * std::max(1.0, lam.cwiseAbs().maxCoeff());
    const Eigen::VectorXd coeff = vecs.transpose() * rgrad;
    Eigen::VectorXd dir = -vecs * coeff.cwiseQuotient(lam.cwiseAbs().cwiseMax(floor));
    if (lam[0] < -floor) {
      const double side = coeff[0] > 0.0 ? -1.0 : 1.0;
      dir += side * vecs.col(0);
    }
    const double slope = rgrad.dot(dir);
    const Eigen::VectorXd step = basis * dir;

    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    double f_trial = f;
    while (alpha > 1e-14) {
      trial = x + alpha * step;
      detail::project_to_spheres(trial);
      f_trial = cost.evaluate(trial);
      if (f_trial <= f + opts.armijo_c * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= opts.shrink;
    }
    if (!accepted) {
      out.precision_limited = true;
      break;
    }
    x = trial;
    f = f_trial;
    out.cost_history.push_back(f);
    out.iterations = iter + 1;
  }
  if (!out.converged) {
    // Gradient may have dropped below tolerance on the final accepted step.
    const Eigen::VectorXd grad = cost.gradient(x);
    for (int v = 0; v < nfree; ++v) basis.block<4, 3>(4 * v, 3 * v) = detail::tangent_basis(x.segment<4>(4 * v));
    out.grad_norm = (basis.transpose() * grad).norm();
    out.converged = out.grad_norm <= opts.grad_tol ||
                    (out.precision_limited && out.grad_norm <= 1e-7 * (1.0 + std::abs(f)));
  }
  out.solution = to_quaternions(x);
  out.cost = f;
  return out;
}

inline LocalResult local_solve(const MeasurementGraph& g, const EdgeSigns& signs,
                               const std::vector<UnitQuaternion>& init, const LocalOptions& opts = {}) {
  return local_solve(assemble_cost(g, signs), init, opts);
}

/// Propagates signed measurements along the BFS spanning tree from q_0 = e.
inline std::vector<UnitQuaternion> chained_initialization(const MeasurementGraph& g, const EdgeSigns& signs) {
  const SpanningTree tree = spanning_tree(g);
  std::vector<UnitQuaternion> q(g.num_vertices());
  for (const int v : tree.order) {
    if (v == 0) continue;
    const int p = tree.parent[v];
    const Edge& e = g.edge(tree.parent_edge[v]);
    const UnitQuaternion m = signs[tree.parent_edge[v]] < 0 ? -e.measurement : e.measurement;
    q[v] = (e.i == p) ? multiply(q[p], m) : multiply(q[p], m.conj());
  }
  return q;
}

/// Start 0 is the chained initialization; starts 1..count-1 draw every free
/// quaternion uniformly from one Rng(seed) stream. Ties keep the earlier start.
inline LocalResult multi_start(const MeasurementGraph& g, const EdgeSigns& signs, int count, std::uint64_t seed,
                               const LocalOptions& opts = {}) {
  if (count < 1) throw std::invalid_argument("multi_start: count must be at least 1");
  const QuadraticCost cost = assemble_cost(g, signs);
  LocalResult best = local_solve(cost, chained_initialization(g, signs), opts);
  Rng rng(seed);
  std::vector<UnitQuaternion> init(g.num_vertices());
  for (int s = 1; s < count; ++s) {
    for (int v = 1; v < g.num_vertices(); ++v) init[v] = random_rotation(rng);
    LocalResult r = local_solve(cost, init, opts);
    if (r.cost < best.cost) best = std::move(r);
  }
  return best;
}

}  // namespace sosra
