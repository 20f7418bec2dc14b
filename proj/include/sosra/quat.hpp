#pragma once

/**
 * @file quat.hpp
 * @brief Unit quaternions, rotation matrices and the distances between them.
 *
 * Storage order is (w, x, y, z) throughout. q and -q describe the same
 * rotation, so every rotation-level comparison in this file is sign-invariant.
 * Quaternion-level operations (multiply, right_mult_matrix) are not.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "sosra/rng.hpp"

namespace sosra {

inline constexpr double kUnitNormTolerance = 1e-6;

class RotationMatrix;

class UnitQuaternion {
 public:
  UnitQuaternion() = default;

  // Rejects vectors whose norm is outside [1 - 1e-6, 1 + 1e-6].
  UnitQuaternion(double w, double x, double y, double z) : v_(w, x, y, z) {
    const double n = v_.norm();
    if (!(std::abs(n - 1.0) <= kUnitNormTolerance)) {
      throw std::invalid_argument("UnitQuaternion: norm " + std::to_string(n) +
                                  " is not within 1e-6 of 1");
    }
  }

  explicit UnitQuaternion(const Eigen::Vector4d& v)
      : UnitQuaternion(v[0], v[1], v[2], v[3]) {}

  static UnitQuaternion identity() { return {}; }

  // Explicit renormalization; throws on (near) zero input.
  static UnitQuaternion normalized(const Eigen::Vector4d& v) {
    const double n = v.norm();
    if (!(n > 1e-300) || !std::isfinite(n)) {
      throw std::invalid_argument("UnitQuaternion::normalized: zero or non-finite vector");
    }
    return UnitQuaternion(Unchecked{}, v / n);
  }

  double w() const { return v_[0]; }
  double x() const { return v_[1]; }
  double y() const { return v_[2]; }
  double z() const { return v_[3]; }
  double operator[](int i) const { return v_[i]; }
  const Eigen::Vector4d& vec() const { return v_; }

  UnitQuaternion conj() const { return {Unchecked{}, Eigen::Vector4d(v_[0], -v_[1], -v_[2], -v_[3])}; }
  UnitQuaternion operator-() const { return {Unchecked{}, -v_}; }

  bool operator==(const UnitQuaternion& o) const { return v_ == o.v_; }

 private:
  struct Unchecked {};
  UnitQuaternion(Unchecked, const Eigen::Vector4d& v) : v_(v) {}

  friend UnitQuaternion multiply(const UnitQuaternion&, const UnitQuaternion&);
  friend UnitQuaternion from_rotation_matrix(const RotationMatrix&);

  Eigen::Vector4d v_{1.0, 0.0, 0.0, 0.0};
};

class RotationMatrix {
 public:
  RotationMatrix() : m_(Eigen::Matrix3d::Identity()) {}

  // Rejects matrices that are not orthonormal with det +1 to within 1e-6.
  explicit RotationMatrix(const Eigen::Matrix3d& m) : m_(m) {
    const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity()).norm();
    const double det = m.determinant();
    if (!(ortho <= kUnitNormTolerance) || !(std::abs(det - 1.0) <= kUnitNormTolerance)) {
      throw std::invalid_argument("RotationMatrix: input is not a proper rotation");
    }
  }

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

 private:
  Eigen::Matrix3d m_;
};

// Q(m) with Q(m) * q == q o m. Orthogonal whenever m is a unit quaternion.
class RightMultMatrix {
 public:
  const Eigen::Matrix4d& matrix() const { return m_; }
  Eigen::Vector4d operator*(const Eigen::Vector4d& q) const { return m_ * q; }

 private:
  explicit RightMultMatrix(const Eigen::Matrix4d& m) : m_(m) {}
  friend RightMultMatrix right_mult_matrix(const UnitQuaternion&, int);

  Eigen::Matrix4d m_;
};

/// Hamilton product a o b.
inline UnitQuaternion multiply(const UnitQuaternion& a, const UnitQuaternion& b) {
  const auto& p = a.v_;
  const auto& q = b.v_;
  return UnitQuaternion(UnitQuaternion::Unchecked{},
                        Eigen::Vector4d(p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
                                        p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
                                        p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
                                        p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0]));
}

inline UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) { return multiply(a, b); }

/// Matrix of q -> q o (sign * m). sign must be +1 or -1.
inline RightMultMatrix right_mult_matrix(const UnitQuaternion& m, int sign) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("right_mult_matrix: sign must be +1 or -1");
  const double w = m.w(), x = m.x(), y = m.y(), z = m.z();
  Eigen::Matrix4d q;
  q << w, -x, -y, -z,  //
      x, w, z, -y,     //
      y, -z, w, x,     //
      z, y, -x, w;
  return RightMultMatrix(static_cast<double>(sign) * q);
}

/// Rotation angle of conj(a) o b, in [0, pi]. Sign-invariant.
inline double geodesic_angle(const UnitQuaternion& a, const UnitQuaternion& b) {
  const Eigen::Vector4d r = multiply(a.conj(), b).vec();
  const double s = r.tail<3>().norm();
  const double c = std::abs(r[0]);
  return 2.0 * std::atan2(s, c);
}

/// min(|a - b|, |a + b|) == 2 sin(theta / 4).
inline double quaternion_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
  return std::min((a.vec() - b.vec()).norm(), (a.vec() + b.vec()).norm());
}

/// Frobenius distance |Ra - Rb|_F == 2 sqrt(2) sin(theta / 2).
inline double chordal_distance(const RotationMatrix& a, const RotationMatrix& b) {
  return (a.matrix() - b.matrix()).norm();
}

inline RotationMatrix to_rotation_matrix(const UnitQuaternion& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Eigen::Matrix3d r;
  r << 1 - 2 * y * y - 2 * z * z, 2 * x * y - 2 * z * w, 2 * x * z + 2 * y * w,  //
      2 * x * y + 2 * z * w, 1 - 2 * x * x - 2 * z * z, 2 * y * z - 2 * x * w,    //
      2 * x * z - 2 * y * w, 2 * y * z + 2 * x * w, 1 - 2 * x * x - 2 * y * y;
  return RotationMatrix(r);
}

/// Picks the representative with w >= 0; when w == 0 the first nonzero
/// component is made positive.
inline UnitQuaternion canonical_sign(const UnitQuaternion& q) {
  for (int i = 0; i < 4; ++i) {
    if (q[i] > 0.0) return q;
    if (q[i] < 0.0) return -q;
  }
  return q;
}

// Shepperd's method: branch on the largest of (trace, diagonal entries).
inline UnitQuaternion from_rotation_matrix(const RotationMatrix& rot) {
  const Eigen::Matrix3d& m = rot.matrix();
  const double tr = m.trace();
  Eigen::Vector4d q;
  const std::array<double, 4> cand{tr, m(0, 0), m(1, 1), m(2, 2)};
  const int k = static_cast<int>(std::max_element(cand.begin(), cand.end()) - cand.begin());
  if (k == 0) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    q << 0.25 * s, (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s, (m(1, 0) - m(0, 1)) / s;
  } else if (k == 1) {
    const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
    q << (m(2, 1) - m(1, 2)) / s, 0.25 * s, (m(0, 1) + m(1, 0)) / s, (m(0, 2) + m(2, 0)) / s;
  } else if (k == 2) {
    const double s = 2.0 * std::sqrt(1.0 - m(0, 0) + m(1, 1) - m(2, 2));
    q << (m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, 0.25 * s, (m(1, 2) + m(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 - m(0, 0) - m(1, 1) + m(2, 2));
    q << (m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s, (m(1, 2) + m(2, 1)) / s, 0.25 * s;
  }
  return canonical_sign(UnitQuaternion(UnitQuaternion::Unchecked{}, q / q.norm()));
}

/// Rotation of `angle` radians about a unit `axis`.
inline UnitQuaternion from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double h = 0.5 * angle;
  const double s = std::sin(h);
  return UnitQuaternion::normalized(Eigen::Vector4d(std::cos(h), s * axis[0], s * axis[1], s * axis[2]));
}

/// Uniform on SO(3): a normalized 4-vector of independent standard normals.
inline UnitQuaternion random_rotation(Rng& rng) {
  Eigen::Vector4d v;
  do {
    for (int i = 0; i < 4; ++i) v[i] = rng.normal();
  } while (v.norm() < 1e-12);
  return UnitQuaternion::normalized(v);
}

inline Eigen::Vector3d random_unit_vector(Rng& rng) {
  Eigen::Vector3d v;
  do {
    for (int i = 0; i < 3; ++i) v[i] = rng.normal();
  } while (v.norm() < 1e-12);
  return v.normalized();
}

/// q o exp(angle * axis / 2) with axis uniform on S^2 and angle uniform on
/// [-theta_max, theta_max]. theta_max == 0 returns q unchanged.
inline UnitQuaternion perturb(const UnitQuaternion& q, double theta_max, Rng& rng) {
  if (!(theta_max >= 0.0)) throw std::invalid_argument("perturb: theta_max must be >= 0");
  const Eigen::Vector3d axis = random_unit_vector(rng);
  const double angle = rng.uniform(-theta_max, theta_max);
  if (angle == 0.0) return q;
  return multiply(q, from_axis_angle(axis, angle));
}

inline UnitQuaternion random_rotation(std::uint64_t seed) {
  Rng rng(seed);
  return random_rotation(rng);
}

inline UnitQuaternion perturb(const UnitQuaternion& q, double theta_max, std::uint64_t seed) {
  Rng rng(seed);
  return perturb(q, theta_max, rng);
}

}  // namespace sosra
