#pragma once

/**
 * @file polycost.hpp
 * @brief The quaternionic cost f = sum_ij |Q_ij q_i - q_j|^2, its constraint
 *        set, and the SOS-convexity checks that back the exactness argument.
 *
 * After anchoring q_0 = (1, 0, 0, 0) the decision vector x holds the 4(N-1)
 * scalars of vertices 1..N-1; vertex v occupies x[4(v-1) .. 4(v-1)+3].
 * In that space f(x) = x' P x + 2 p' x + r.
 */

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sosra/partition.hpp"
#include "sosra/polynomial.hpp"
#include "sosra/precondition.hpp"
#include "sosra/problem.hpp"
#include "sosra/quat.hpp"

namespace sosra {

inline int scalar_index(int vertex, int component) { return 4 * (vertex - 1) + component; }

struct EdgeCostTerm {
  int i = 0;
  int j = 0;
  Eigen::Matrix4d q;                // sign-corrected right multiplication matrix
  Eigen::Matrix<double, 8, 8> a;    // [Q -I]'[Q -I]
};

class QuadraticCost {
 public:
  QuadraticCost(int num_vertices, std::vector<EdgeCostTerm> terms) : n_(num_vertices), terms_(std::move(terms)) {
    const int d = dim();
    p_ = Eigen::MatrixXd::Zero(d, d);
    lin_ = Eigen::VectorXd::Zero(d);
    for (const auto& t : terms_) {
      const int bj = scalar_index(t.j, 0);
      p_.block<4, 4>(bj, bj) += Eigen::Matrix4d::Identity();
      if (t.i == 0) {
        // |Q e - q_j|^2 = q_j'q_j - 2 (Q e)' q_j + 1
        lin_.segment<4>(bj) -= t.q.col(0);
        constant_ += 1.0;
      } else {
        const int bi = scalar_index(t.i, 0);
        p_.block<4, 4>(bi, bi) += t.q.transpose() * t.q;
        p_.block<4, 4>(bi, bj) -= t.q.transpose();
        p_.block<4, 4>(bj, bi) -= t.q;
      }
    }
  }

  int num_vertices() const { return n_; }
  int dim() const { return 4 * (n_ - 1); }
  const std::vector<EdgeCostTerm>& terms() const { return terms_; }
  const Eigen::MatrixXd& quadratic() const { return p_; }
  const Eigen::VectorXd& linear() const { return lin_; }
  double constant() const { return constant_; }

  double evaluate(const Eigen::VectorXd& x) const {
    check_dim(x);
    return x.dot(p_ * x) + 2.0 * lin_.dot(x) + constant_;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    check_dim(x);
    return 2.0 * (p_ * x + lin_);
  }

  /// Constant Hessian 2P.
  Eigen::MatrixXd hessian() const { return 2.0 * p_; }

  /// [r p'; p P], so that f(x) = [1; x]' C [1; x].
  Eigen::MatrixXd augmented_matrix() const {
    const int d = dim();
    Eigen::MatrixXd c(d + 1, d + 1);
    c(0, 0) = constant_;
    c.block(1, 0, d, 1) = lin_;
    c.block(0, 1, 1, d) = lin_.transpose();
    c.block(1, 1, d, d) = p_;
    return c;
  }

  Polynomial polynomial() const {
    Polynomial f(constant_);
    const int d = dim();
    for (int a = 0; a < d; ++a) {
      f.add(Monomial::linear(a), 2.0 * lin_[a]);
      f.add(Monomial::quadratic(a, a), p_(a, a));
      for (int b = a + 1; b < d; ++b) f.add(Monomial::quadratic(a, b), 2.0 * p_(a, b));
    }
    return f;
  }

  /// Sum over edges of |Q_ij q_i - q_j|^2 on full (unanchored) quaternions.
  double evaluate_terms(const std::vector<Eigen::Vector4d>& q) const {
    if (static_cast<int>(q.size()) != n_) throw std::invalid_argument("evaluate_terms: wrong vertex count");
    double f = 0.0;
    for (const auto& t : terms_) f += (t.q * q[t.i] - q[t.j]).squaredNorm();
    return f;
  }

 private:
  void check_dim(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) {
      throw std::invalid_argument("cost: point has dimension " + std::to_string(x.size()) + ", expected " +
                                  std::to_string(dim()));
    }
  }

  int n_;
  std::vector<EdgeCostTerm> terms_;
  Eigen::MatrixXd p_;
  Eigen::VectorXd lin_;
  double constant_ = 0.0;
};

inline QuadraticCost assemble_cost(const MeasurementGraph& g, const EdgeSigns& signs) {
  if (static_cast<int>(signs.size()) != g.num_edges()) throw std::invalid_argument("assemble_cost: sign count");
  std::vector<EdgeCostTerm> terms;
  terms.reserve(g.num_edges());
  for (int k = 0; k < g.num_edges(); ++k) {
    const Edge& e = g.edge(k);
    EdgeCostTerm t;
    t.i = e.i;
    t.j = e.j;
    t.q = right_mult_matrix(e.measurement, signs[k]).matrix();
    Eigen::Matrix<double, 4, 8> block;
    block << t.q, -Eigen::Matrix4d::Identity();
    t.a = block.transpose() * block;
    terms.push_back(t);
  }
  return QuadraticCost(g.num_vertices(), std::move(terms));
}

/// Stacks vertices 1..N-1; vertex 0 is dropped (anchored).
inline Eigen::VectorXd to_point(const std::vector<UnitQuaternion>& q) {
  Eigen::VectorXd x(4 * (static_cast<int>(q.size()) - 1));
  for (std::size_t v = 1; v < q.size(); ++v) x.segment<4>(4 * (v - 1)) = q[v].vec();
  return x;
}

/// Inverse of to_point; each block is renormalized, vertex 0 set to identity.
inline std::vector<UnitQuaternion> to_quaternions(const Eigen::VectorXd& x) {
  std::vector<UnitQuaternion> q(x.size() / 4 + 1);
  for (std::size_t v = 1; v < q.size(); ++v) q[v] = UnitQuaternion::normalized(x.segment<4>(4 * (v - 1)));
  return q;
}

// ---------------------------------------------------------------------------
// Constraint set. Per free quaternion, index k:
//   0: 1 - q'q        1: 2 - q'q        2 + 2c: (1 + q_c)/2   3 + 2c: (1 - q_c)/2
// On the unit sphere each one takes values in [0, 1]; the first two hold
// together exactly when q'q = 1.

inline Polynomial constraint_polynomial(int vertex, int k) {
  if (vertex < 1) throw std::invalid_argument("constraint_polynomial: anchored vertex has no constraints");
  if (k < 0 || k >= kConstraintsPerVertex) throw std::invalid_argument("constraint_polynomial: bad index");
  Polynomial g;
  if (k < 2) {
    g = Polynomial(k == 0 ? 1.0 : 2.0);
    for (int c = 0; c < 4; ++c) {
      const int s = scalar_index(vertex, c);
      g.add(Monomial::quadratic(s, s), -1.0);
    }
  } else {
    const int c = (k - 2) / 2;
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    g = Polynomial(0.5);
    g.add(Monomial::linear(scalar_index(vertex, c)), 0.5 * sign);
  }
  return g;
}

inline double evaluate_constraint(const Eigen::Vector4d& q, int k) {
  if (k == 0) return 1.0 - q.squaredNorm();
  if (k == 1) return 2.0 - q.squaredNorm();
  const int c = (k - 2) / 2;
  return 0.5 * (1.0 + ((k % 2 == 0) ? q[c] : -q[c]));
}

// ---------------------------------------------------------------------------
// SOS-convexity.

enum class SosVerdict { kSos, kNotSos };

inline constexpr double kSosEigenTolerance = 1e-9;

/// z' H z is a sum of squares iff H is PSD; decided on the smallest eigenvalue.
inline SosVerdict sos_check_quadratic_form(const Eigen::MatrixXd& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("sos_check_quadratic_form: matrix not square");
  if ((h - h.transpose()).norm() > 1e-12 * (1.0 + h.norm())) {
    throw std::invalid_argument("sos_check_quadratic_form: matrix not symmetric");
  }
  if (h.rows() == 0) return SosVerdict::kSos;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -kSosEigenTolerance ? SosVerdict::kSos : SosVerdict::kNotSos;
}

struct SosConvexCertificate {
  Eigen::MatrixXd factor;  // L with hessian == L L'
  double residual = 0.0;   // Frobenius norm of hessian - L L'
};

/// Hessian of f as L L' with one 4-column block sqrt(2) [Q -I]' per edge,
/// restricted to the free coordinates.
inline SosConvexCertificate soscvx_certificate_for_cost(const QuadraticCost& cost) {
  const int d = cost.dim();
  SosConvexCertificate cert;
  cert.factor = Eigen::MatrixXd::Zero(d, 4 * static_cast<int>(cost.terms().size()));
  const double s = std::sqrt(2.0);
  for (std::size_t e = 0; e < cost.terms().size(); ++e) {
    const auto& t = cost.terms()[e];
    const int col = 4 * static_cast<int>(e);
    if (t.i > 0) cert.factor.block<4, 4>(scalar_index(t.i, 0), col) = s * t.q.transpose();
    cert.factor.block<4, 4>(scalar_index(t.j, 0), col) = -s * Eigen::Matrix4d::Identity();
  }
  cert.residual = (cost.hessian() - cert.factor * cert.factor.transpose()).norm();
  return cert;
}

}  // namespace sosra
