#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "qlimit/phase_point.hpp"

namespace qlimit {

// Eigenbasis of the truncated position matrix Q = sqrt(hbar/2)(a + a^dagger).
// Column k of `vectors` is the unit eigenvector for node x_k with entries psi_n(x_k) s_k,
// psi_n the L2-normalized Hermite functions at hbar and s_k^2 = weights(k) the Gauss weights for the integral over dx.
template <typename Real = double>
struct PositionBasis {
  VectorR<Real> nodes;
  MatrixR<Real> vectors;
  VectorR<Real> weights;
};

// Hermite functions psi_0..psi_{dim-1} at x, computed with a rescaled three-term recurrence.
template <typename Real>
void hermite_functions(Real hbar, Real x, Index dim, Real* out) {
  const Real y = x / std::sqrt(hbar);
  Real log_scale = -y * y / 2 - std::log(std::numbers::pi_v<Real> * hbar) / 4;
  Real prev = 0, cur = 1;
  constexpr Real big = Real(1e150);
  const Real log_big = std::log(big);
  for (Index n = 0; n < dim; ++n) {
    out[n] = cur == 0 ? Real(0) : std::copysign(std::exp(std::log(std::abs(cur)) + log_scale), cur);
    const Real next = std::sqrt(Real(2) / Real(n + 1)) * y * cur - std::sqrt(Real(n) / Real(n + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > big) {
      prev /= big;
      cur /= big;
      log_scale += log_big;
    }
  }
}

template <typename Real = double>
PositionBasis<Real> position_basis(Real hbar, Index dim) {
  VectorR<Real> diag = VectorR<Real>::Zero(dim);
  VectorR<Real> sub(dim - 1);
  for (Index n = 1; n < dim; ++n) sub(n - 1) = std::sqrt(hbar / 2 * Real(n));
  Eigen::SelfAdjointEigenSolver<MatrixR<Real>> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("position_basis: tridiagonal eigensolver failed");
  PositionBasis<Real> basis;
  basis.nodes = solver.eigenvalues();
  basis.vectors.resize(dim, dim);
  basis.weights.resize(dim);
  for (Index k = 0; k < dim; ++k) {
    Real* column = basis.vectors.col(k).data();
    hermite_functions(hbar, basis.nodes(k), dim, column);
    const Real norm2 = basis.vectors.col(k).squaredNorm();
    basis.weights(k) = Real(1) / norm2;
    basis.vectors.col(k) /= std::sqrt(norm2);
  }
  return basis;
}

}  // namespace qlimit

namespace qlimit {

// Nodes t_k and probability weights w_k with sum_k w_k f(t_k) ~ E[f(Z)], Z standard normal.
template <typename Real = double>
struct NormalRule {
  VectorR<Real> nodes;
  VectorR<Real> weights;
};

template <typename Real = double>
NormalRule<Real> normal_rule(Index n) {
  // Position nodes at hbar = 1 are the physicists' Hermite roots; rescale to unit variance.
  const auto basis = position_basis<Real>(Real(1), n);
  NormalRule<Real> rule;
  rule.nodes = basis.nodes * std::sqrt(Real(2));
  rule.weights.resize(n);
  for (Index k = 0; k < n; ++k)
    rule.weights(k) = basis.weights(k) * std::exp(-basis.nodes(k) * basis.nodes(k)) / std::sqrt(std::numbers::pi_v<Real>);
  return rule;
}

}  // namespace qlimit
