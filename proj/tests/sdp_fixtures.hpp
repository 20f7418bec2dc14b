#pragma once

// Random strictly feasible SDPs and an independent residual check, shared by
// the solver unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "sosra/rng.hpp"
#include "sosra/sdp.hpp"

namespace sdp_fixtures {

using sosra::SdpProblem;
using sosra::SdpSolution;


inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

// Dense symmetric coefficient matrix of a list of symmetric entries.
inline Eigen::MatrixXd dense(const std::vector<sosra::SdpMatrixEntry>& entries, int block, int dim) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& e : entries) {
    if (e.block != block) continue;
    m(e.row, e.col) = e.value;
    m(e.col, e.row) = e.value;
  }
  return m;
}

inline void add_dense_entries(std::vector<sosra::SdpMatrixEntry>& out, int block, const Eigen::MatrixXd& m) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = r; c < m.cols(); ++c) {
      if (m(r, c) != 0.0) out.push_back({block, r, c, m(r, c)});
    }
  }
}

inline Eigen::MatrixXd random_symmetric(sosra::Rng& rng, int n) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return 0.5 * (m + m.transpose());
}

inline Eigen::MatrixXd random_pd(sosra::Rng& rng, int n) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m * m.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
};

// Recomputes feasibility, objectives and complementarity from the raw problem.
inline Residuals check(const SdpProblem& p, const SdpSolution& s) {
  Residuals r;
  const int nb = static_cast<int>(p.psd_dims.size());
  std::vector<Eigen::MatrixXd> slack(nb);
  for (int k = 0; k < nb; ++k) {
    slack[k] = dense(p.objective_psd, k, p.psd_dims[k]);
    r.primal_objective += (slack[k].array() * s.x[k].array()).sum();
  }
  Eigen::VectorXd zl = Eigen::Map<const Eigen::VectorXd>(p.objective_nonneg.data(), p.num_nonneg);
  Eigen::VectorXd zf = Eigen::Map<const Eigen::VectorXd>(p.objective_free.data(), p.num_free);
  r.primal_objective += zl.dot(s.x_nonneg) + zf.dot(s.x_free);
  double bnorm = 0.0;
  for (int i = 0; i < p.num_rows(); ++i) {
    const auto& row = p.rows[i];
    double ax = 0.0;
    for (int k = 0; k < nb; ++k) {
      const Eigen::MatrixXd a = dense(row.psd, k, p.psd_dims[k]);
      ax += (a.array() * s.x[k].array()).sum();
      slack[k] -= s.y[i] * a;
    }
    for (const auto& e : row.nonneg) {
      ax += e.value * s.x_nonneg[e.index];
      zl[e.index] -= e.value * s.y[i];
    }
    for (const auto& e : row.free) {
      ax += e.value * s.x_free[e.index];
      zf[e.index] -= e.value * s.y[i];
    }
    r.primal = std::max(r.primal, std::abs(ax - row.rhs));
    r.dual_objective += row.rhs * s.y[i];
    bnorm = std::max(bnorm, std::abs(row.rhs));
  }
  // Dual slack must be PSD / nonnegative, free columns must be matched exactly.
  for (int k = 0; k < nb; ++k) {
    r.dual = std::max(r.dual, std::max(0.0, -min_eigenvalue(slack[k])));
    r.complementarity += (slack[k].array() * s.x[k].array()).sum();
  }
  for (int j = 0; j < p.num_nonneg; ++j) {
    r.dual = std::max(r.dual, std::max(0.0, -zl[j]));
    r.complementarity += zl[j] * s.x_nonneg[j];
  }
  if (p.num_free > 0) r.dual = std::max(r.dual, zf.cwiseAbs().maxCoeff());
  return r;
}

// Strictly feasible primal and dual by construction: b = A(X0), C = A'(y0) + Z0.
inline SdpProblem random_feasible_sdp(sosra::Rng& rng) {
  SdpProblem p;
  const int nb = 1 + static_cast<int>(rng.uniform_int(2));
  std::vector<Eigen::MatrixXd> x0, z0;
  for (int k = 0; k < nb; ++k) {
    const int dim = 1 + static_cast<int>(rng.uniform_int(4));
    p.add_psd_block(dim);
    x0.push_back(random_pd(rng, dim));
    z0.push_back(random_pd(rng, dim));
  }
  const int nl = static_cast<int>(rng.uniform_int(3));
  const int nf = static_cast<int>(rng.uniform_int(2));
  Eigen::VectorXd xl0(nl), zl0(nl);
  for (int j = 0; j < nl; ++j) {
    xl0[j] = rng.uniform(0.5, 2.0);
    zl0[j] = rng.uniform(0.5, 2.0);
  }
  Eigen::VectorXd xf0(nf);
  for (int j = 0; j < nf; ++j) xf0[j] = rng.normal();

  int total = nl + nf;
  for (const int d : p.psd_dims) total += d * (d + 1) / 2;
  const int m = std::max(1, static_cast<int>(rng.uniform_int(total)) + nf);
  Eigen::VectorXd y0(m);
  for (int i = 0; i < m; ++i) y0[i] = rng.normal();

  std::vector<Eigen::MatrixXd> c = z0;
  Eigen::VectorXd cl = zl0;
  Eigen::VectorXd cf = Eigen::VectorXd::Zero(nf);
  for (int i = 0; i < m; ++i) {
    auto& row = p.add_row(0.0);
    double rhs = 0.0;
    for (int k = 0; k < nb; ++k) {
      const Eigen::MatrixXd a = random_symmetric(rng, p.psd_dims[k]);
      add_dense_entries(row.psd, k, a);
      rhs += (a.array() * x0[k].array()).sum();
      c[k] += y0[i] * a;
    }
    for (int j = 0; j < nl; ++j) {
      const double v = rng.normal();
      row.nonneg.push_back({j, v});
      rhs += v * xl0[j];
      cl[j] += y0[i] * v;
    }
    for (int j = 0; j < nf; ++j) {
      const double v = rng.normal();
      row.free.push_back({j, v});
      rhs += v * xf0[j];
      cf[j] += y0[i] * v;
    }
    row.rhs = rhs;
  }
  for (int k = 0; k < nb; ++k) add_dense_entries(p.objective_psd, k, c[k]);
  for (int j = 0; j < nl; ++j) p.add_nonneg(cl[j]);
  for (int j = 0; j < nf; ++j) p.add_free(cf[j]);
  return p;
}

}  // namespace sdp_fixtures
