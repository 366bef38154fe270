#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qlimit {

template <typename Real>
using Complex = std::complex<Real>;
template <typename Real>
using MatrixC = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using VectorC = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using MatrixR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using VectorR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

// Positive Planck-constant value of a quantum space.
template <typename Real = double>
class HbarValue {
 public:
  explicit HbarValue(Real value) : value_(value) {
    if (!(value > Real(0)) || !std::isfinite(value))
      throw std::invalid_argument("hbar must be positive and finite, got " + std::to_string(double(value)));
  }
  Real value() const { return value_; }
  friend bool operator==(const HbarValue& a, const HbarValue& b) { return a.value_ == b.value_; }

 private:
  Real value_;
};

// Point (x, p) of phase space with Dof degrees of freedom.
template <typename Real = double, int Dof = 1>
struct PhasePoint {
  using Vec = Eigen::Matrix<Real, Dof, 1>;
  Vec x = Vec::Zero();
  Vec p = Vec::Zero();

  PhasePoint() = default;
  PhasePoint(const Vec& x0, const Vec& p0) : x(x0), p(p0) {}
  PhasePoint(Real x0, Real p0)
    requires(Dof == 1)
  {
    x(0) = x0;
    p(0) = p0;
  }

  static constexpr int dof() { return Dof; }
  Real norm_squared() const { return x.squaredNorm() + p.squaredNorm(); }
  Real norm() const { return std::sqrt(norm_squared()); }
  bool is_finite() const { return x.allFinite() && p.allFinite(); }

  PhasePoint operator+(const PhasePoint& o) const { return {Vec(x + o.x), Vec(p + o.p)}; }
  PhasePoint operator-(const PhasePoint& o) const { return {Vec(x - o.x), Vec(p - o.p)}; }
  PhasePoint operator-() const { return {Vec(-x), Vec(-p)}; }
  PhasePoint operator*(Real s) const { return {Vec(s * x), Vec(s * p)}; }
  friend PhasePoint operator*(Real s, const PhasePoint& a) { return a * s; }
  bool operator==(const PhasePoint& o) const { return x == o.x && p == o.p; }
};

using Point = PhasePoint<double, 1>;

// sigma(x,p; x',p') = p.x' - p'.x
template <typename Real, int Dof>
Real symplectic_form(const PhasePoint<Real, Dof>& xi, const PhasePoint<Real, Dof>& eta) {
  return xi.p.dot(eta.x) - eta.p.dot(xi.x);
}

// Complex displacement parameter alpha = (x + i p) / sqrt(2 hbar) for one degree of freedom.
template <typename Real>
Complex<Real> displacement_parameter(const PhasePoint<Real, 1>& xi, Real hbar) {
  const Real s = std::sqrt(Real(2) * hbar);
  return {xi.x(0) / s, xi.p(0) / s};
}

class SpaceMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace qlimit
