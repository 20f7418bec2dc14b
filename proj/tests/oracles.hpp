#pragma once

// Test-only reference computations, written against Eigen's own quaternion
// type and closed-form results rather than the library under test.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "sosra/problem.hpp"
#include "sosra/quat.hpp"

namespace oracle {

inline Eigen::Quaterniond to_eigen(const sosra::UnitQuaternion& q) { return {q.w(), q.x(), q.y(), q.z()}; }

inline Eigen::Vector4d to_vec(const Eigen::Quaterniond& q) { return {q.w(), q.x(), q.y(), q.z()}; }

inline Eigen::Vector4d hamilton(const sosra::UnitQuaternion& a, const sosra::UnitQuaternion& b) {
  return to_vec(to_eigen(a) * to_eigen(b));
}

inline Eigen::Matrix3d rotation(const sosra::UnitQuaternion& q) { return to_eigen(q).toRotationMatrix(); }

// Angle of Ra' Rb from its trace.
inline double geodesic_angle(const sosra::UnitQuaternion& a, const sosra::UnitQuaternion& b) {
  const Eigen::Matrix3d r = rotation(a).transpose() * rotation(b);
  return std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0));
}

// sum over edges of |q_i o (s m) - q_j|^2 with Eigen's Hamilton product.
inline double edge_cost(const sosra::MeasurementGraph& g, const std::vector<int>& signs,
                        const std::vector<sosra::UnitQuaternion>& q) {
  double f = 0.0;
  for (int k = 0; k < g.num_edges(); ++k) {
    const auto& e = g.edge(k);
    const Eigen::Vector4d pred = signs[k] * to_vec(to_eigen(q[e.i]) * to_eigen(e.measurement));
    f += (pred - q[e.j].vec()).squaredNorm();
  }
  return f;
}

// min <C, X> s.t. <A, X> = b, X PSD (2x2), A positive definite, b > 0.
// Every optimum can be taken rank one, X = s u u' with u = (cos p, sin p),
// so the value is b min_p (u'Cu)/(u'Au): dense grid on p, then golden-section
// refinement around the best grid point.
inline double two_by_two_sdp(const Eigen::Matrix2d& c, const Eigen::Matrix2d& a, double b) {
  auto value = [&](double p) {
    const Eigen::Vector2d u(std::cos(p), std::sin(p));
    return b * u.dot(c * u) / u.dot(a * u);
  };
  const int grid = 20000;
  int best = 0;
  double best_v = value(0.0);
  for (int i = 1; i < grid; ++i) {
    const double v = value(std::numbers::pi * i / grid);
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  double lo = std::numbers::pi * (best - 1) / grid;
  double hi = std::numbers::pi * (best + 1) / grid;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double m1 = hi - phi * (hi - lo);
    const double m2 = lo + phi * (hi - lo);
    if (value(m1) < value(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return std::min(best_v, value(0.5 * (lo + hi)));
}

}  // namespace oracle
