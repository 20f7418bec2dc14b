#pragma once

// Sparse polynomials of degree <= 2, which is all the level-(1,1)
// relaxation ever needs.

#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sosra {

/// x_a * x_b with a <= b; a missing factor is -1. Constant = (-1, -1),
/// linear x_i = (-1, i).
class Monomial {
 public:
  Monomial() = default;

  static Monomial constant() { return {}; }
  static Monomial linear(int i) { return Monomial(-1, i); }
  static Monomial quadratic(int i, int j) { return i <= j ? Monomial(i, j) : Monomial(j, i); }

  // Product of two monomials of degree <= 1.
  static Monomial product(const Monomial& u, const Monomial& v) {
    if (u.degree() + v.degree() > 2) throw std::domain_error("Monomial::product: degree exceeds 2");
    if (u.degree() == 0) return v;
    if (v.degree() == 0) return u;
    return quadratic(u.second_, v.second_);
  }

  int degree() const { return (first_ >= 0) + (second_ >= 0); }
  int first() const { return first_; }
  int second() const { return second_; }

  double evaluate(const Eigen::VectorXd& x) const {
    double v = 1.0;
    if (first_ >= 0) v *= x[first_];
    if (second_ >= 0) v *= x[second_];
    return v;
  }

  // Graded lexicographic: degree first, then x_0 > x_1 > ... on exponent vectors.
  friend bool operator<(const Monomial& u, const Monomial& v) {
    if (u.degree() != v.degree()) return u.degree() < v.degree();
    if (u.degree() == 1) return u.second_ > v.second_;
    if (u.first_ != v.first_) return u.first_ > v.first_;
    return u.second_ > v.second_;
  }
  friend bool operator==(const Monomial& u, const Monomial& v) {
    return u.first_ == v.first_ && u.second_ == v.second_;
  }

  std::string to_string() const {
    if (degree() == 0) return "1";
    if (degree() == 1) return "x" + std::to_string(second_);
    if (first_ == second_) return "x" + std::to_string(first_) + "^2";
    return "x" + std::to_string(first_) + "*x" + std::to_string(second_);
  }

 private:
  Monomial(int a, int b) : first_(a), second_(b) {}

  int first_ = -1;
  int second_ = -1;
};

class Polynomial {
 public:
  using Terms = std::map<Monomial, double>;

  Polynomial() = default;
  explicit Polynomial(double c) {
    if (c != 0.0) terms_[Monomial::constant()] = c;
  }

  void add(const Monomial& m, double c) {
    if (c == 0.0) return;
    auto [it, inserted] = terms_.emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  Polynomial& operator+=(const Polynomial& o) {
    for (const auto& [m, c] : o.terms_) add(m, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    for (const auto& [m, c] : o.terms_) add(m, -c);
    return *this;
  }
  Polynomial& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
    } else {
      for (auto& [m, c] : terms_) c *= s;
    }
    return *this;
  }
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }

  double coefficient(const Monomial& m) const {
    const auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
  }

  double evaluate(const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (const auto& [m, c] : terms_) v += c * m.evaluate(x);
    return v;
  }

  int degree() const { return terms_.empty() ? 0 : terms_.rbegin()->first.degree(); }
  const Terms& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }

  // Max coefficient difference; the key set of both sides is compared.
  double distance(const Polynomial& o) const {
    double d = 0.0;
    for (const auto& [m, c] : terms_) d = std::max(d, std::abs(c - o.coefficient(m)));
    for (const auto& [m, c] : o.terms_) d = std::max(d, std::abs(c - coefficient(m)));
    return d;
  }

 private:
  Terms terms_;
};

}  // namespace sosra
