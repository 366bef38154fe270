#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qlimit::numerics {

// Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0.
template <typename Real = double>
Real gamma_p(Real a, Real x);

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), accurate in the far tail.
template <typename Real = double>
Real gamma_q(Real a, Real x) {
  if (!(a > 0) || x < 0) throw std::invalid_argument("gamma_q: need a > 0 and x >= 0");
  if (x == 0) return Real(1);
  const Real eps = std::numeric_limits<Real>::epsilon();
  const Real log_prefactor = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1) return Real(1) - gamma_p(a, x);
  // Lentz continued fraction for Q.
  const Real tiny = std::numeric_limits<Real>::min() / eps;
  Real b = x + 1 - a;
  Real c = 1 / tiny;
  Real d = 1 / b;
  Real h = d;
  for (int i = 1; i < 10000; ++i) {
    const Real an = -i * (i - a);
    b += 2;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    const Real delta = d * c;
    h *= delta;
    if (std::abs(delta - 1) < eps) break;
  }
  return std::exp(log_prefactor) * h;
}

template <typename Real>
Real gamma_p(Real a, Real x) {
  if (!(a > 0) || x < 0) throw std::invalid_argument("gamma_p: need a > 0 and x >= 0");
  if (x == 0) return Real(0);
  if (x >= a + 1) return Real(1) - gamma_q(a, x);
  const Real eps = std::numeric_limits<Real>::epsilon();
  Real term = 1 / a;
  Real sum = term;
  for (int n = 1; n < 100000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * eps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Adaptive Simpson quadrature of f on [a, b].
template <typename Real, typename F>
Real adaptive_simpson(const F& f, Real a, Real b, Real tol, int max_depth = 48) {
  struct Rec {
    const F& f;
    Real operator()(Real a, Real fa, Real m, Real fm, Real b, Real fb, Real whole, Real tol, int depth) const {
      const Real lm = (a + m) / 2, rm = (m + b) / 2;
      const Real flm = f(lm), frm = f(rm);
      const Real left = (m - a) / 6 * (fa + 4 * flm + fm);
      const Real right = (b - m) / 6 * (fm + 4 * frm + fb);
      const Real diff = left + right - whole;
      if (depth <= 0 || std::abs(diff) <= 15 * tol) return left + right + diff / 15;
      return (*this)(a, fa, lm, flm, m, fm, left, tol / 2, depth - 1) +
             (*this)(m, fm, rm, frm, b, fb, right, tol / 2, depth - 1);
    }
  };
  const Real fa = f(a), fb = f(b), m = (a + b) / 2, fm = f(m);
  const Real whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return Rec{f}(a, fa, m, fm, b, fb, whole, tol, max_depth);
}

// Gauss-Legendre nodes and weights on [a, b].
template <typename Real = double>
void gauss_legendre(int n, Real a, Real b, std::vector<Real>& nodes, std::vector<Real>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  nodes.assign(n, 0);
  weights.assign(n, 0);
  const Real half = (b - a) / 2, mid = (a + b) / 2;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    Real z = std::cos(std::numbers::pi_v<Real> * (i + Real(0.75)) / (n + Real(0.5)));
    Real dp = 0;
    for (int it = 0; it < 100; ++it) {
      Real p0 = 1, p1 = 0;
      for (int j = 1; j <= n; ++j) {
        const Real p2 = p1;
        p1 = p0;
        p0 = ((2 * j - 1) * z * p1 - (j - 1) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1);
      const Real dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 4 * std::numeric_limits<Real>::epsilon()) break;
    }
    {
      Real p0 = 1, p1 = 0;
      for (int j = 1; j <= n; ++j) {
        const Real p2 = p1;
        p1 = p0;
        p0 = ((2 * j - 1) * z * p1 - (j - 1) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1);
    }
    const Real w = 2 / ((1 - z * z) * dp * dp);
    nodes[i] = mid - half * z;
    nodes[n - 1 - i] = mid + half * z;
    weights[i] = weights[n - 1 - i] = half * w;
  }
}

// Least-squares slope of ys against xs.
template <typename Real = double>
Real least_squares_slope(const std::vector<Real>& xs, const std::vector<Real>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("least_squares_slope: need >= 2 paired values");
  const Real n = Real(xs.size());
  Real mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  Real sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0) throw std::invalid_argument("least_squares_slope: abscissae are all equal");
  return sxy / sxx;
}

}  // namespace qlimit::numerics
