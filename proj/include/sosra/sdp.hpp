#pragma once

/**
 * @file sdp.hpp
 * @brief Small-scale conic solver: PSD blocks, a nonnegative orthant and free
 *        scalars, coupled by linear equalities.
 *
 *   minimize    sum_k <C_k, X_k> + c_l' x_l + c_f' x_f
 *   subject to  sum_k <A_ik, X_k> + a_il' x_l + a_if' x_f = b_i
 *               X_k PSD, x_l >= 0, x_f free
 *
 * Dual: maximize b'y s.t. C_k - sum_i y_i A_ik = Z_k PSD, c_l - A_l'y = z_l >= 0,
 * A_f'y = c_f.
 *
 * Infeasible-start primal-dual path following with the HKM search direction
 * and Mehrotra's predictor-corrector. The Schur complement is assembled on a
 * fixed sparse pattern and factored with a sparse Cholesky; free variables
 * are eliminated through a small dense system instead of being split.
 *
 * Presolve: empty columns are removed; nonnegative columns that coincide
 * (same entries and cost) are fused; pairs that are exact negatives of each
 * other are fused into one free variable; linearly dependent rows are
 * dropped, or reported infeasible when inconsistent.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace sosra {

/// Symmetric matrix entry; (row, col) and (col, row) both hold `value`.
struct SdpMatrixEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

struct SdpLinearEntry {
  int index = 0;
  double value = 0.0;
};

struct SdpRow {
  std::vector<SdpMatrixEntry> psd;
  std::vector<SdpLinearEntry> nonneg;
  std::vector<SdpLinearEntry> free;
  double rhs = 0.0;
};

struct SdpProblem {
  std::vector<int> psd_dims;
  int num_nonneg = 0;
  int num_free = 0;
  std::vector<SdpMatrixEntry> objective_psd;
  std::vector<double> objective_nonneg;
  std::vector<double> objective_free;
  std::vector<SdpRow> rows;

  int add_psd_block(int dim) {
    psd_dims.push_back(dim);
    return static_cast<int>(psd_dims.size()) - 1;
  }
  int add_nonneg(double cost = 0.0) {
    objective_nonneg.push_back(cost);
    return num_nonneg++;
  }
  int add_free(double cost = 0.0) {
    objective_free.push_back(cost);
    return num_free++;
  }
  SdpRow& add_row(double rhs) {
    rows.emplace_back();
    rows.back().rhs = rhs;
    return rows.back();
  }
  int num_rows() const { return static_cast<int>(rows.size()); }

  void validate() const {
    auto bad = [](const std::string& m) { throw std::invalid_argument("SdpProblem: " + m); };
    for (const int d : psd_dims) {
      if (d <= 0) bad("PSD block dimension must be positive");
    }
    if (static_cast<int>(objective_nonneg.size()) != num_nonneg) bad("objective_nonneg size");
    if (static_cast<int>(objective_free.size()) != num_free) bad("objective_free size");
    auto check_entry = [&](const SdpMatrixEntry& e) {
      if (e.block < 0 || e.block >= static_cast<int>(psd_dims.size())) bad("PSD entry block out of range");
      const int d = psd_dims[e.block];
      if (e.row < 0 || e.col < 0 || e.row >= d || e.col >= d) bad("PSD entry index out of range");
      if (!std::isfinite(e.value)) bad("non-finite coefficient");
    };
    for (const auto& e : objective_psd) check_entry(e);
    for (const auto& r : rows) {
      for (const auto& e : r.psd) check_entry(e);
      for (const auto& e : r.nonneg) {
        if (e.index < 0 || e.index >= num_nonneg) bad("nonneg index out of range");
      }
      for (const auto& e : r.free) {
        if (e.index < 0 || e.index >= num_free) bad("free index out of range");
      }
      if (!std::isfinite(r.rhs)) bad("non-finite right-hand side");
    }
  }
};

enum class SdpStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kOptimal:
      return "optimal";
    case SdpStatus::kInfeasible:
      return "infeasible";
    case SdpStatus::kUnbounded:
      return "unbounded";
    case SdpStatus::kNumericalFailure:
      return "numerical-failure";
  }
  return "unknown";
}

struct SdpOptions {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  double compl_tol = 1e-7;  // absolute bound on <X, Z> + x'z at termination
  int max_iter = 200;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::kNumericalFailure;
  int iterations = 0;
  std::vector<Eigen::MatrixXd> x;  // primal PSD blocks
  std::vector<Eigen::MatrixXd> z;  // dual slack PSD blocks
  Eigen::VectorXd x_nonneg, z_nonneg, x_free;
  Eigen::VectorXd y;  // one multiplier per equality row
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;  // |b - A(x)| / (1 + |b|)
  double dual_residual = 0.0;    // |C - A'(y) - Z| / (1 + |C|)
  double gap = 0.0;              // relative duality gap
  std::string message;
};

namespace detail {

struct OrderedEntry {
  int p;
  int q;
  double v;
};

struct BlockRow {
  int row;
  std::vector<OrderedEntry> entries;  // symmetric entries expanded into ordered pairs
};

// Presolved problem in solver form.
struct ConicData {
  std::vector<int> dims;
  int m = 0;
  int nl = 0;
  int nf = 0;
  std::vector<Eigen::MatrixXd> c;
  Eigen::VectorXd cl, cf, b;
  std::vector<std::vector<BlockRow>> block_rows;
  Eigen::SparseMatrix<double> al;  // m x nl
  Eigen::SparseMatrix<double> af;  // m x nf
};

inline void add_ordered(std::vector<OrderedEntry>& out, int p, int q, double v) {
  out.push_back({p, q, v});
  if (p != q) out.push_back({q, p, v});
}

inline Eigen::VectorXd apply_a(const ConicData& d, const std::vector<Eigen::MatrixXd>& x, const Eigen::VectorXd& xl,
                               const Eigen::VectorXd& xf) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d.m);
  for (std::size_t k = 0; k < d.dims.size(); ++k) {
    for (const auto& br : d.block_rows[k]) {
      double s = 0.0;
      for (const auto& e : br.entries) s += e.v * x[k](e.p, e.q);
      out[br.row] += s;
    }
  }
  if (d.nl > 0) out += d.al * xl;
  if (d.nf > 0) out += d.af * xf;
  return out;
}

inline std::vector<Eigen::MatrixXd> apply_at_psd(const ConicData& d, const Eigen::VectorXd& y) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(d.dims.size());
  for (std::size_t k = 0; k < d.dims.size(); ++k) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d.dims[k], d.dims[k]);
    for (const auto& br : d.block_rows[k]) {
      const double yi = y[br.row];
      if (yi == 0.0) continue;
      for (const auto& e : br.entries) s(e.p, e.q) += yi * e.v;
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline double inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a.array() * b.array()).sum(); }

inline Eigen::MatrixXd sym(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

// Largest alpha with X + alpha dX PSD (infinity when unbounded). X must be PD.
inline double max_step_psd(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dx) {
  Eigen::LLT<Eigen::MatrixXd> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  const Eigen::MatrixXd l = llt.matrixL();
  Eigen::MatrixXd t = llt.matrixL().solve(dx);
  t = llt.matrixL().solve(t.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(t), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

inline double max_step_lp(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (dx[i] < 0.0) a = std::min(a, -x[i] / dx[i]);
  }
  return a;
}

// Sparse lower-triangular Schur pattern with precomputed value slots.
class SchurSystem {
 public:
  explicit SchurSystem(const ConicData& d) : d_(d) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < d.m; ++i) trip.emplace_back(i, i, 1.0);
    for (std::size_t k = 0; k < d.dims.size(); ++k) {
      const auto& rows = d.block_rows[k];
      for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = a; b < rows.size(); ++b) add_pair(trip, rows[a].row, rows[b].row);
      }
    }
    for (int j = 0; j < d.nl; ++j) {
      for (Eigen::SparseMatrix<double>::InnerIterator a(d.al, j); a; ++a) {
        for (Eigen::SparseMatrix<double>::InnerIterator b(d.al, j); b; ++b) {
          if (b.row() >= a.row()) add_pair(trip, a.row(), b.row());
        }
      }
    }
    m_.resize(d.m, d.m);
    m_.setFromTriplets(trip.begin(), trip.end());
    m_.makeCompressed();
    for (std::size_t k = 0; k < d.dims.size(); ++k) {
      const auto& rows = d.block_rows[k];
      for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = a; b < rows.size(); ++b) psd_slots_.push_back(slot(rows[a].row, rows[b].row));
      }
    }
    for (int j = 0; j < d.nl; ++j) {
      for (Eigen::SparseMatrix<double>::InnerIterator a(d.al, j); a; ++a) {
        for (Eigen::SparseMatrix<double>::InnerIterator b(d.al, j); b; ++b) {
          if (b.row() >= a.row()) lp_slots_.push_back(slot(a.row(), b.row()));
        }
      }
    }
    for (int i = 0; i < d.m; ++i) diag_slots_.push_back(slot(i, i));
    chol_.analyzePattern(m_);
  }

  // Assembles M = A (X . Zinv) A' + A_l diag(d) A_l' and factors it. A small
  // diagonal shift is added when the factorization breaks down.
  bool factor(const std::vector<Eigen::MatrixXd>& x, const std::vector<Eigen::MatrixXd>& zinv,
              const Eigen::VectorXd& dl) {
    double* val = m_.valuePtr();
    std::fill(val, val + m_.nonZeros(), 0.0);
    std::size_t s = 0;
    for (std::size_t k = 0; k < d_.dims.size(); ++k) {
      const auto& rows = d_.block_rows[k];
      const Eigen::MatrixXd& xk = x[k];
      const Eigen::MatrixXd& zk = zinv[k];
      for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = a; b < rows.size(); ++b) {
          double v = 0.0;
          for (const auto& ea : rows[a].entries) {
            for (const auto& eb : rows[b].entries) v += ea.v * eb.v * xk(ea.q, eb.p) * zk(eb.q, ea.p);
          }
          val[psd_slots_[s++]] += v;
        }
      }
    }
    s = 0;
    for (int j = 0; j < d_.nl; ++j) {
      for (Eigen::SparseMatrix<double>::InnerIterator a(d_.al, j); a; ++a) {
        for (Eigen::SparseMatrix<double>::InnerIterator b(d_.al, j); b; ++b) {
          if (b.row() >= a.row()) val[lp_slots_[s++]] += a.value() * b.value() * dl[j];
        }
      }
    }
    exact_ = m_;
    double max_diag = 0.0;
    for (const int slot_i : diag_slots_) max_diag = std::max(max_diag, val[slot_i]);
    double shift = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      chol_.factorize(m_);
      if (chol_.info() == Eigen::Success) break;
      const double add = (shift == 0.0 ? 1e-14 : shift * 99.0) * std::max(1.0, max_diag);
      for (const int slot_i : diag_slots_) val[slot_i] += add;
      shift = (shift == 0.0 ? 1e-14 : shift * 100.0);
    }
    if (chol_.info() != Eigen::Success) return false;
    if (d_.nf > 0) {
      const Eigen::MatrixXd af = Eigen::MatrixXd(d_.af);
      minv_af_ = chol_.solve(af);
      Eigen::MatrixXd schur_f = af.transpose() * minv_af_;
      free_lu_.compute(sym(schur_f));
    }
    return true;
  }

  // Solves [M A_f; A_f' 0] [dy; dxf] = [r; rf], refined against the unshifted M.
  void solve(const Eigen::VectorXd& r, const Eigen::VectorXd& rf, Eigen::VectorXd& dy, Eigen::VectorXd& dxf) const {
    solve_once(r, rf, dy, dxf);
    double res_norm = residual_norm(r, rf, dy, dxf);
    for (int pass = 0; pass < 3 && res_norm > 0.0; ++pass) {
      const Eigen::VectorXd er = r - apply(dy, dxf);
      const Eigen::VectorXd erf = d_.nf > 0 ? Eigen::VectorXd(rf - d_.af.transpose() * dy) : Eigen::VectorXd();
      Eigen::VectorXd cy, cf;
      solve_once(er, erf, cy, cf);
      Eigen::VectorXd ny = dy + cy;
      Eigen::VectorXd nf = d_.nf > 0 ? Eigen::VectorXd(dxf + cf) : dxf;
      const double nres = residual_norm(r, rf, ny, nf);
      if (!(nres < res_norm)) break;
      dy = std::move(ny);
      dxf = std::move(nf);
      res_norm = nres;
    }
  }

 private:
  void solve_once(const Eigen::VectorXd& r, const Eigen::VectorXd& rf, Eigen::VectorXd& dy,
                  Eigen::VectorXd& dxf) const {
    Eigen::VectorXd minv_r = chol_.solve(r);
    if (d_.nf > 0) {
      const Eigen::VectorXd rhs = minv_af_.transpose() * r - rf;
      dxf = free_lu_.solve(rhs);
      dy = minv_r - minv_af_ * dxf;
    } else {
      dxf.resize(0);
      dy = std::move(minv_r);
    }
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& dy, const Eigen::VectorXd& dxf) const {
    Eigen::VectorXd out = exact_.selfadjointView<Eigen::Lower>() * dy;
    if (d_.nf > 0) out += d_.af * dxf;
    return out;
  }

  double residual_norm(const Eigen::VectorXd& r, const Eigen::VectorXd& rf, const Eigen::VectorXd& dy,
                       const Eigen::VectorXd& dxf) const {
    double s = (r - apply(dy, dxf)).squaredNorm();
    if (d_.nf > 0) s += (rf - d_.af.transpose() * dy).squaredNorm();
    return std::sqrt(s);
  }

  static void add_pair(std::vector<Eigen::Triplet<double>>& trip, int i, int j) {
    trip.emplace_back(std::max(i, j), std::min(i, j), 1.0);
  }

  int slot(int i, int j) const {
    const int r = std::max(i, j);
    const int c = std::min(i, j);
    const int* inner = m_.innerIndexPtr();
    const int* begin = inner + m_.outerIndexPtr()[c];
    const int* end = inner + m_.outerIndexPtr()[c + 1];
    const int* it = std::lower_bound(begin, end, r);
    return static_cast<int>(it - inner);
  }

  const ConicData& d_;
  Eigen::SparseMatrix<double> m_;
  Eigen::SparseMatrix<double> exact_;
  std::vector<int> psd_slots_, lp_slots_, diag_slots_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower> chol_;
  Eigen::MatrixXd minv_af_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> free_lu_;
};

// Maps presolved variables back onto the caller's problem.
struct PresolveMap {
  // For each original nonneg variable: (kind, index, share). kind 0 = dropped
  // (value 0), 1 = presolved nonneg, 2 = positive part of a presolved free,
  // 3 = negative part of a presolved free.
  struct Link {
    int kind = 0;
    int index = 0;
    double share = 1.0;
  };
  std::vector<Link> nonneg;
  std::vector<int> free_index;  // original free -> presolved free (-1 if dropped)
  std::vector<int> kept_rows;   // presolved row -> original row
  bool infeasible = false;
  bool unbounded = false;
  std::string message;
};

inline bool has_singleton_per_row(const SdpProblem& p) {
  // A column touching exactly one row makes that row independent of the rest.
  const int m = p.num_rows();
  std::map<std::tuple<int, int, int>, int> psd_owner;  // (block, row, col) -> row or -2
  std::vector<int> nn_owner(p.num_nonneg, -1), fr_owner(p.num_free, -1);
  auto touch = [](int& owner, int row) {
    if (owner == -1) {
      owner = row;
    } else if (owner != row) {
      owner = -2;
    }
  };
  for (int i = 0; i < m; ++i) {
    for (const auto& e : p.rows[i].psd) {
      auto key = std::make_tuple(e.block, std::min(e.row, e.col), std::max(e.row, e.col));
      auto [it, inserted] = psd_owner.emplace(key, i);
      if (!inserted && it->second != i) it->second = -2;
    }
    for (const auto& e : p.rows[i].nonneg) touch(nn_owner[e.index], i);
    for (const auto& e : p.rows[i].free) touch(fr_owner[e.index], i);
  }
  std::vector<char> has(m, 0);
  for (const auto& [key, owner] : psd_owner) {
    if (owner >= 0) has[owner] = 1;
  }
  for (const int o : nn_owner) {
    if (o >= 0) has[o] = 1;
  }
  for (const int o : fr_owner) {
    if (o >= 0) has[o] = 1;
  }
  return std::all_of(has.begin(), has.end(), [](char c) { return c != 0; });
}

inline ConicData presolve(const SdpProblem& p, PresolveMap& map) {
  const int m0 = p.num_rows();
  // Column views of the linear variables.
  std::vector<std::map<int, double>> nn_cols(p.num_nonneg), fr_cols(p.num_free);
  for (int i = 0; i < m0; ++i) {
    for (const auto& e : p.rows[i].nonneg) nn_cols[e.index][i] += e.value;
    for (const auto& e : p.rows[i].free) fr_cols[e.index][i] += e.value;
  }
  auto strip_zeros = [](std::map<int, double>& col) {
    for (auto it = col.begin(); it != col.end();) it = (it->second == 0.0) ? col.erase(it) : std::next(it);
  };
  using Key = std::vector<std::pair<int, double>>;
  auto make_key = [](const std::map<int, double>& col, double cost, double sign) {
    Key k;
    k.reserve(col.size() + 1);
    k.emplace_back(-1, sign * cost);
    for (const auto& [r, v] : col) k.emplace_back(r, sign * v);
    return k;
  };

  map.nonneg.assign(p.num_nonneg, {});
  std::map<Key, int> groups;  // key -> group id
  std::vector<std::vector<int>> members;
  std::vector<Key> group_keys;
  for (int j = 0; j < p.num_nonneg; ++j) {
    strip_zeros(nn_cols[j]);
    if (nn_cols[j].empty()) {
      if (p.objective_nonneg[j] < 0.0) {
        map.unbounded = true;
        map.message = "nonnegative variable with negative cost appears in no constraint";
      }
      map.nonneg[j].kind = 0;
      continue;
    }
    Key key = make_key(nn_cols[j], p.objective_nonneg[j], 1.0);
    auto [it, inserted] = groups.emplace(key, static_cast<int>(members.size()));
    if (inserted) {
      members.emplace_back();
      group_keys.push_back(std::move(key));
    }
    members[it->second].push_back(j);
  }
  const int ng = static_cast<int>(members.size());
  std::vector<int> partner(ng, -1);
  for (int gi = 0; gi < ng; ++gi) {
    if (partner[gi] >= 0) continue;
    Key neg = group_keys[gi];
    for (auto& kv : neg) kv.second = -kv.second;
    if (neg == group_keys[gi]) continue;
    const auto it = groups.find(neg);
    if (it != groups.end() && partner[it->second] < 0 && it->second != gi) {
      partner[gi] = it->second;
      partner[it->second] = gi;
    }
  }

  ConicData d;
  d.dims = p.psd_dims;
  std::vector<double> cl, cf;
  std::vector<std::map<int, double>> l_cols, f_cols;
  for (int gi = 0; gi < ng; ++gi) {
    const double share = 1.0 / static_cast<double>(members[gi].size());
    const int rep = members[gi].front();
    if (partner[gi] < 0) {
      const int idx = static_cast<int>(cl.size());
      cl.push_back(p.objective_nonneg[rep]);
      l_cols.push_back(nn_cols[rep]);
      for (const int j : members[gi]) map.nonneg[j] = {1, idx, share};
    } else if (partner[gi] > gi) {
      const int idx = static_cast<int>(cf.size());
      cf.push_back(p.objective_nonneg[rep]);
      f_cols.push_back(nn_cols[rep]);
      for (const int j : members[gi]) map.nonneg[j] = {2, idx, share};
      const double pshare = 1.0 / static_cast<double>(members[partner[gi]].size());
      for (const int j : members[partner[gi]]) map.nonneg[j] = {3, idx, pshare};
    }
  }
  map.free_index.assign(p.num_free, -1);
  for (int j = 0; j < p.num_free; ++j) {
    strip_zeros(fr_cols[j]);
    if (fr_cols[j].empty()) {
      if (p.objective_free[j] != 0.0) {
        map.unbounded = true;
        map.message = "free variable with nonzero cost appears in no constraint";
      }
      continue;
    }
    map.free_index[j] = static_cast<int>(cf.size());
    cf.push_back(p.objective_free[j]);
    f_cols.push_back(fr_cols[j]);
  }

  // Row rank: cheap structural test first, dense rank-revealing QR otherwise.
  std::vector<int> kept(m0);
  for (int i = 0; i < m0; ++i) kept[i] = i;
  if (!has_singleton_per_row(p)) {
    std::vector<int> offsets;
    int ncol = 0;
    for (const int dim : p.psd_dims) {
      offsets.push_back(ncol);
      ncol += dim * (dim + 1) / 2;
    }
    const int lp_off = ncol;
    ncol += static_cast<int>(l_cols.size() + f_cols.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m0, std::max(ncol, 1));
    Eigen::VectorXd b(m0);
    for (int i = 0; i < m0; ++i) {
      b[i] = p.rows[i].rhs;
      for (const auto& e : p.rows[i].psd) {
        const int r = std::min(e.row, e.col);
        const int c = std::max(e.row, e.col);
        const int dim = p.psd_dims[e.block];
        const int idx = offsets[e.block] + r * dim - r * (r - 1) / 2 + (c - r);
        a(i, idx) += (r == c ? 1.0 : 2.0) * e.value;
      }
    }
    for (std::size_t j = 0; j < l_cols.size(); ++j) {
      for (const auto& [r, v] : l_cols[j]) a(r, lp_off + static_cast<int>(j)) = v;
    }
    for (std::size_t j = 0; j < f_cols.size(); ++j) {
      for (const auto& [r, v] : f_cols[j]) a(r, lp_off + static_cast<int>(l_cols.size() + j)) = v;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.transpose());
    qr.setThreshold(1e-12);
    const int rank = static_cast<int>(qr.rank());
    if (rank < m0) {
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
      const Eigen::VectorXd xls = cod.solve(b);
      if ((a * xls - b).norm() > 1e-9 * (1.0 + b.norm())) {
        map.infeasible = true;
        map.message = "equality constraints are inconsistent";
      }
      kept.clear();
      for (int r = 0; r < rank; ++r) kept.push_back(static_cast<int>(qr.colsPermutation().indices()[r]));
      std::sort(kept.begin(), kept.end());
    }
  }
  map.kept_rows = kept;
  std::vector<int> new_row(m0, -1);
  for (std::size_t r = 0; r < kept.size(); ++r) new_row[kept[r]] = static_cast<int>(r);

  d.m = static_cast<int>(kept.size());
  d.nl = static_cast<int>(cl.size());
  d.nf = static_cast<int>(cf.size());
  d.cl = Eigen::Map<Eigen::VectorXd>(cl.data(), d.nl);
  d.cf = Eigen::Map<Eigen::VectorXd>(cf.data(), d.nf);
  d.b.resize(d.m);
  for (int r = 0; r < d.m; ++r) d.b[r] = p.rows[kept[r]].rhs;
  d.c.clear();
  for (const int dim : p.psd_dims) d.c.push_back(Eigen::MatrixXd::Zero(dim, dim));
  for (const auto& e : p.objective_psd) {
    d.c[e.block](e.row, e.col) += e.value;
    if (e.row != e.col) d.c[e.block](e.col, e.row) += e.value;
  }
  d.block_rows.assign(p.psd_dims.size(), {});
  for (int r = 0; r < d.m; ++r) {
    const auto& row = p.rows[kept[r]];
    std::map<int, std::vector<OrderedEntry>> by_block;
    for (const auto& e : row.psd) add_ordered(by_block[e.block], e.row, e.col, e.value);
    for (auto& [blk, entries] : by_block) d.block_rows[blk].push_back({r, std::move(entries)});
  }
  auto build = [&](const std::vector<std::map<int, double>>& cols, Eigen::SparseMatrix<double>& out) {
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      for (const auto& [r, v] : cols[j]) {
        if (new_row[r] >= 0) t.emplace_back(new_row[r], static_cast<int>(j), v);
      }
    }
    out.resize(d.m, static_cast<int>(cols.size()));
    out.setFromTriplets(t.begin(), t.end());
    out.makeCompressed();
  };
  build(l_cols, d.al);
  build(f_cols, d.af);
  return d;
}

struct Iterate {
  std::vector<Eigen::MatrixXd> x, z;
  Eigen::VectorXd xl, zl, xf, y;
};

inline double block_norm(const std::vector<Eigen::MatrixXd>& v) {
  double s = 0.0;
  for (const auto& m : v) s += m.squaredNorm();
  return std::sqrt(s);
}

}  // namespace detail

inline SdpSolution solve(const SdpProblem& problem, const SdpOptions& opts = {}) {
  using detail::inner;
  using detail::sym;
  problem.validate();
  detail::PresolveMap map;
  const detail::ConicData d = detail::presolve(problem, map);
  const int nb = static_cast<int>(d.dims.size());

  SdpSolution out;
  auto finish = [&](const detail::Iterate& it, SdpStatus status, int iters, std::string msg) {
    out.status = status;
    out.iterations = iters;
    out.message = std::move(msg);
    out.x = it.x;
    out.z = it.z;
    out.x_nonneg = Eigen::VectorXd::Zero(problem.num_nonneg);
    out.z_nonneg = Eigen::VectorXd::Zero(problem.num_nonneg);
    out.x_free = Eigen::VectorXd::Zero(problem.num_free);
    out.y = Eigen::VectorXd::Zero(problem.num_rows());
    for (std::size_t r = 0; r < map.kept_rows.size() && it.y.size() > 0; ++r) out.y[map.kept_rows[r]] = it.y[r];
    for (int j = 0; j < problem.num_nonneg; ++j) {
      const auto& link = map.nonneg[j];
      if (link.kind == 1 && it.xl.size() > 0) {
        out.x_nonneg[j] = link.share * it.xl[link.index];
      } else if (link.kind == 2 && it.xf.size() > 0) {
        out.x_nonneg[j] = link.share * std::max(0.0, it.xf[link.index]);
      } else if (link.kind == 3 && it.xf.size() > 0) {
        out.x_nonneg[j] = link.share * std::max(0.0, -it.xf[link.index]);
      }
    }
    for (int j = 0; j < problem.num_free; ++j) {
      if (map.free_index[j] >= 0 && it.xf.size() > 0) out.x_free[j] = it.xf[map.free_index[j]];
    }
    // Objectives and residuals on the caller's problem.
    double pobj = 0.0;
    for (const auto& e : problem.objective_psd) {
      if (out.x.empty()) break;
      pobj += (e.row == e.col ? 1.0 : 2.0) * e.value * out.x[e.block](e.row, e.col);
    }
    for (int j = 0; j < problem.num_nonneg; ++j) pobj += problem.objective_nonneg[j] * out.x_nonneg[j];
    for (int j = 0; j < problem.num_free; ++j) pobj += problem.objective_free[j] * out.x_free[j];
    double dobj = 0.0;
    double bnorm = 0.0;
    double rp2 = 0.0;
    std::vector<Eigen::MatrixXd> aty;
    for (const int dim : problem.psd_dims) aty.push_back(Eigen::MatrixXd::Zero(dim, dim));
    Eigen::VectorXd atyl = Eigen::VectorXd::Zero(problem.num_nonneg);
    Eigen::VectorXd atyf = Eigen::VectorXd::Zero(problem.num_free);
    for (int i = 0; i < problem.num_rows(); ++i) {
      const auto& row = problem.rows[i];
      dobj += row.rhs * out.y[i];
      bnorm += row.rhs * row.rhs;
      double ax = 0.0;
      for (const auto& e : row.psd) {
        if (!out.x.empty()) ax += (e.row == e.col ? 1.0 : 2.0) * e.value * out.x[e.block](e.row, e.col);
        aty[e.block](e.row, e.col) += out.y[i] * e.value;
        if (e.row != e.col) aty[e.block](e.col, e.row) += out.y[i] * e.value;
      }
      for (const auto& e : row.nonneg) {
        ax += e.value * out.x_nonneg[e.index];
        atyl[e.index] += e.value * out.y[i];
      }
      for (const auto& e : row.free) {
        ax += e.value * out.x_free[e.index];
        atyf[e.index] += e.value * out.y[i];
      }
      rp2 += (row.rhs - ax) * (row.rhs - ax);
    }
    for (int j = 0; j < problem.num_nonneg; ++j) out.z_nonneg[j] = problem.objective_nonneg[j] - atyl[j];
    double rd2 = 0.0;
    double cnorm2 = 0.0;
    if (!out.z.empty()) {
      for (int k = 0; k < nb; ++k) {
        rd2 += (d.c[k] - aty[k] - out.z[k]).squaredNorm();
        cnorm2 += d.c[k].squaredNorm();
      }
    }
    for (int j = 0; j < problem.num_free; ++j) {
      rd2 += std::pow(problem.objective_free[j] - atyf[j], 2);
      cnorm2 += std::pow(problem.objective_free[j], 2);
    }
    for (int j = 0; j < problem.num_nonneg; ++j) {
      rd2 += std::pow(std::min(0.0, out.z_nonneg[j]), 2);
      cnorm2 += std::pow(problem.objective_nonneg[j], 2);
    }
    out.primal_objective = pobj;
    out.dual_objective = dobj;
    out.primal_residual = std::sqrt(rp2) / (1.0 + std::sqrt(bnorm));
    out.dual_residual = std::sqrt(rd2) / (1.0 + std::sqrt(cnorm2));
    double compl_gap = 0.0;
    for (std::size_t k = 0; k < out.x.size() && k < out.z.size(); ++k) compl_gap += inner(out.x[k], out.z[k]);
    if (it.xl.size() > 0) compl_gap += it.xl.dot(it.zl);
    out.gap = std::max(std::abs(pobj - dobj), std::abs(compl_gap)) / (1.0 + std::abs(pobj) + std::abs(dobj));
    return out;
  };

  detail::Iterate it;
  if (map.infeasible) return finish(it, SdpStatus::kInfeasible, 0, map.message);
  if (map.unbounded) return finish(it, SdpStatus::kUnbounded, 0, map.message);

  // Starting point: scaled identities, sized from the data.
  double max_row_norm = 0.0;
  double ratio = 0.0;
  {
    Eigen::VectorXd row_norm2 = Eigen::VectorXd::Zero(d.m);
    for (int k = 0; k < nb; ++k) {
      for (const auto& br : d.block_rows[k]) {
        for (const auto& e : br.entries) row_norm2[br.row] += e.v * e.v;
      }
    }
    for (int j = 0; j < d.nl; ++j) {
      for (Eigen::SparseMatrix<double>::InnerIterator a(d.al, j); a; ++a) row_norm2[a.row()] += a.value() * a.value();
    }
    for (int j = 0; j < d.nf; ++j) {
      for (Eigen::SparseMatrix<double>::InnerIterator a(d.af, j); a; ++a) row_norm2[a.row()] += a.value() * a.value();
    }
    for (int i = 0; i < d.m; ++i) {
      const double rn = std::sqrt(row_norm2[i]);
      max_row_norm = std::max(max_row_norm, rn);
      ratio = std::max(ratio, (1.0 + std::abs(d.b[i])) / (1.0 + rn));
    }
  }
  double cnorm = detail::block_norm(d.c);
  cnorm = std::sqrt(cnorm * cnorm + d.cl.squaredNorm() + d.cf.squaredNorm());
  int nu = d.nl;
  for (const int dim : d.dims) nu += dim;
  for (int k = 0; k < nb; ++k) {
    const double n = d.dims[k];
    const double xi = std::max({10.0, std::sqrt(n), n * ratio});
    const double eta = std::max({10.0, std::sqrt(n), max_row_norm, cnorm});
    it.x.push_back(xi * Eigen::MatrixXd::Identity(d.dims[k], d.dims[k]));
    it.z.push_back(eta * Eigen::MatrixXd::Identity(d.dims[k], d.dims[k]));
  }
  it.xl = Eigen::VectorXd::Constant(d.nl, std::max(10.0, ratio));
  it.zl = Eigen::VectorXd::Constant(d.nl, std::max({10.0, max_row_norm, cnorm}));
  it.xf = Eigen::VectorXd::Zero(d.nf);
  it.y = Eigen::VectorXd::Zero(d.m);
  if (nu == 0 && d.nf == 0) return finish(it, SdpStatus::kOptimal, 0, "empty problem");

  detail::SchurSystem schur(d);
  const double bnorm = d.b.norm();
  detail::Iterate best = it;
  double best_merit = std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // Residuals.
    const Eigen::VectorXd rp = d.b - detail::apply_a(d, it.x, it.xl, it.xf);
    std::vector<Eigen::MatrixXd> aty = detail::apply_at_psd(d, it.y);
    std::vector<Eigen::MatrixXd> rd(nb);
    for (int k = 0; k < nb; ++k) rd[k] = d.c[k] - aty[k] - it.z[k];
    const Eigen::VectorXd atyl = d.nl > 0 ? Eigen::VectorXd(d.al.transpose() * it.y) : Eigen::VectorXd();
    const Eigen::VectorXd rdl = d.nl > 0 ? Eigen::VectorXd(d.cl - atyl - it.zl) : Eigen::VectorXd();
    const Eigen::VectorXd rdf = d.nf > 0 ? Eigen::VectorXd(d.cf - d.af.transpose() * it.y) : Eigen::VectorXd();

    double pobj = d.cl.dot(it.xl) + d.cf.dot(it.xf);
    double xz = it.xl.dot(it.zl);
    for (int k = 0; k < nb; ++k) {
      pobj += inner(d.c[k], it.x[k]);
      xz += inner(it.x[k], it.z[k]);
    }
    const double dobj = d.b.dot(it.y);
    const double mu = nu > 0 ? xz / nu : 0.0;
    const double pres = rp.norm() / (1.0 + bnorm);
    const double dres = std::sqrt(detail::block_norm(rd) * detail::block_norm(rd) + rdl.squaredNorm() +
                                  rdf.squaredNorm()) /
                        (1.0 + cnorm);
    const double relgap = std::max(std::abs(pobj - dobj), xz) / (1.0 + std::abs(pobj) + std::abs(dobj));

    const double merit = std::max({pres, dres, relgap});
    if (merit < best_merit) {
      best_merit = merit;
      best = it;
      stall = 0;
    } else {
      ++stall;
    }
    if (pres <= opts.feas_tol && dres <= opts.feas_tol && relgap <= opts.gap_tol && xz <= opts.compl_tol) {
      return finish(it, SdpStatus::kOptimal, iter, "converged");
    }
    // Infeasibility / unboundedness certificates along diverging iterates.
    {
      if (dobj > 1e-12 && dobj > 1e8 * (1.0 + cnorm) && (cnorm + dres * (1.0 + cnorm)) / dobj < 1e-8) {
        return finish(it, SdpStatus::kInfeasible, iter, "primal infeasibility certificate");
      }
      const double ax = (d.b - rp).norm();
      if (pobj < 0.0 && -pobj > 1e8 * (1.0 + bnorm) && (ax + 1e-300) / (-pobj) < 1e-8) {
        return finish(it, SdpStatus::kUnbounded, iter, "dual infeasibility certificate");
      }
    }
    if (stall > 30) break;

    // Scaling data.
    std::vector<Eigen::MatrixXd> zinv(nb);
    bool ok = true;
    for (int k = 0; k < nb && ok; ++k) {
      Eigen::LLT<Eigen::MatrixXd> llt(it.z[k]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      zinv[k] = llt.solve(Eigen::MatrixXd::Identity(d.dims[k], d.dims[k]));
      zinv[k] = sym(zinv[k]);
    }
    if (!ok) break;
    const Eigen::VectorXd dl = d.nl > 0 ? Eigen::VectorXd(it.xl.cwiseQuotient(it.zl)) : Eigen::VectorXd();
    if (!schur.factor(it.x, zinv, dl)) break;

    // Direction for complementarity target sigma*mu and optional corrector.
    std::vector<Eigen::MatrixXd> xrdzi(nb);
    for (int k = 0; k < nb; ++k) xrdzi[k] = it.x[k] * rd[k] * zinv[k];
    auto direction = [&](double target, const std::vector<Eigen::MatrixXd>* corr_x,
                         const std::vector<Eigen::MatrixXd>* corr_z, const Eigen::VectorXd* corr_l,
                         detail::Iterate& dir) {
      std::vector<Eigen::MatrixXd> h(nb), g(nb);
      for (int k = 0; k < nb; ++k) {
        h[k] = target * zinv[k] - it.x[k];
        if (corr_x) h[k] -= sym((*corr_x)[k] * (*corr_z)[k] * zinv[k]);
        g[k] = h[k] - xrdzi[k];
      }
      Eigen::VectorXd hl;
      if (d.nl > 0) {
        hl = (Eigen::VectorXd::Constant(d.nl, target) - it.xl.cwiseProduct(it.zl));
        if (corr_l) hl -= *corr_l;
        hl = hl.cwiseQuotient(it.zl);
      }
      Eigen::VectorXd r = rp - detail::apply_a(d, g, d.nl > 0 ? Eigen::VectorXd(hl - dl.cwiseProduct(rdl)) : hl,
                                               Eigen::VectorXd::Zero(d.nf));
      Eigen::VectorXd dxf;
      schur.solve(r, rdf, dir.y, dxf);
      dir.xf = dxf;
      const std::vector<Eigen::MatrixXd> atdy = detail::apply_at_psd(d, dir.y);
      dir.x.resize(nb);
      dir.z.resize(nb);
      for (int k = 0; k < nb; ++k) {
        dir.z[k] = rd[k] - atdy[k];
        dir.x[k] = h[k] - sym(it.x[k] * dir.z[k] * zinv[k]);
      }
      if (d.nl > 0) {
        dir.zl = rdl - d.al.transpose() * dir.y;
        dir.xl = hl - dl.cwiseProduct(dir.zl);
      } else {
        dir.zl.resize(0);
        dir.xl.resize(0);
      }
    };
    auto step_lengths = [&](const detail::Iterate& dir, double& ap, double& ad) {
      ap = detail::max_step_lp(it.xl, dir.xl);
      ad = detail::max_step_lp(it.zl, dir.zl);
      for (int k = 0; k < nb; ++k) {
        ap = std::min(ap, detail::max_step_psd(it.x[k], dir.x[k]));
        ad = std::min(ad, detail::max_step_psd(it.z[k], dir.z[k]));
      }
    };

    detail::Iterate pred;
    direction(0.0, nullptr, nullptr, nullptr, pred);
    double ap = 0.0, ad = 0.0;
    step_lengths(pred, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double xz_aff = 0.0;
    for (int k = 0; k < nb; ++k) xz_aff += inner(it.x[k] + ap * pred.x[k], it.z[k] + ad * pred.z[k]);
    if (d.nl > 0) xz_aff += (it.xl + ap * pred.xl).dot(it.zl + ad * pred.zl);
    const double mu_aff = nu > 0 ? xz_aff / nu : 0.0;
    const double expon = std::max(1.0, 3.0 * std::min(ap, ad) * std::min(ap, ad));
    const double sigma = mu > 0 ? std::min(1.0, std::pow(std::max(0.0, mu_aff / mu), expon)) : 0.0;

    detail::Iterate dir;
    Eigen::VectorXd corr_l = d.nl > 0 ? Eigen::VectorXd(pred.xl.cwiseProduct(pred.zl)) : Eigen::VectorXd();
    direction(sigma * mu, &pred.x, &pred.z, d.nl > 0 ? &corr_l : nullptr, dir);
    step_lengths(dir, ap, ad);
    const double gamma = 0.9 + 0.09 * std::min(1.0, std::min(ap, ad));
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (!std::isfinite(ap) || !std::isfinite(ad)) break;

    for (int k = 0; k < nb; ++k) {
      it.x[k] = sym(it.x[k] + ap * dir.x[k]);
      it.z[k] = sym(it.z[k] + ad * dir.z[k]);
    }
    if (d.nl > 0) {
      it.xl += ap * dir.xl;
      it.zl += ad * dir.zl;
    }
    if (d.nf > 0) it.xf += ap * dir.xf;
    it.y += ad * dir.y;
    if (!it.y.allFinite() || !it.xf.allFinite()) break;
    if (std::getenv("SOSRA_SDP_TRACE")) {
      std::fprintf(stderr, "it %3d pres %.2e dres %.2e gap %.2e mu %.2e ap %.3f ad %.3f sig %.2e\n", iter, pres, dres,
                   relgap, mu, ap, ad, sigma);
    }
    if (ap < 1e-10 && ad < 1e-10) break;
  }
  return finish(best, SdpStatus::kNumericalFailure, opts.max_iter, "did not reach the requested tolerances");
}

/// Writes the problem in SDPA sparse format as its dual: max <-C, X> s.t.
/// <A_i, X> = b_i. Nonnegative variables become one diagonal block; each
/// free variable is written as a difference of two diagonal entries.
inline void write_sdpa(const SdpProblem& p, std::ostream& out) {
  p.validate();
  const int lp_size = p.num_nonneg + 2 * p.num_free;
  const int nblocks = static_cast<int>(p.psd_dims.size()) + (lp_size > 0 ? 1 : 0);
  auto fmt = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "* sosra SDP export: min <C,X> s.t. <A_i,X> = b_i, written in SDPA dual form\n";
  out << p.num_rows() << "\n" << nblocks << "\n";
  for (const int d : p.psd_dims) out << d << " ";
  if (lp_size > 0) out << -lp_size;
  out << "\n";
  for (int i = 0; i < p.num_rows(); ++i) out << fmt(p.rows[i].rhs) << (i + 1 < p.num_rows() ? " " : "");
  out << "\n";
  const int lp_block = static_cast<int>(p.psd_dims.size()) + 1;
  auto write_entry = [&](int mat, int blk, int r, int c, double v) {
    if (v == 0.0) return;
    out << mat << " " << blk << " " << r << " " << c << " " << fmt(v) << "\n";
  };
  for (const auto& e : p.objective_psd) {
    write_entry(0, e.block + 1, std::min(e.row, e.col) + 1, std::max(e.row, e.col) + 1, -e.value);
  }
  for (int j = 0; j < p.num_nonneg; ++j) write_entry(0, lp_block, j + 1, j + 1, -p.objective_nonneg[j]);
  for (int j = 0; j < p.num_free; ++j) {
    const int pos = p.num_nonneg + 2 * j + 1;
    write_entry(0, lp_block, pos, pos, -p.objective_free[j]);
    write_entry(0, lp_block, pos + 1, pos + 1, p.objective_free[j]);
  }
  for (int i = 0; i < p.num_rows(); ++i) {
    for (const auto& e : p.rows[i].psd) {
      write_entry(i + 1, e.block + 1, std::min(e.row, e.col) + 1, std::max(e.row, e.col) + 1, e.value);
    }
    for (const auto& e : p.rows[i].nonneg) write_entry(i + 1, lp_block, e.index + 1, e.index + 1, e.value);
    for (const auto& e : p.rows[i].free) {
      const int pos = p.num_nonneg + 2 * e.index + 1;
      write_entry(i + 1, lp_block, pos, pos, e.value);
      write_entry(i + 1, lp_block, pos + 1, pos + 1, -e.value);
    }
  }
}

}  // namespace sosra
