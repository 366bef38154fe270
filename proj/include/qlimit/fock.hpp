#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "qlimit/gauss_hermite.hpp"
#include "qlimit/numerics.hpp"
#include "qlimit/phase_point.hpp"

namespace qlimit {

// Oscillator eigenbasis truncated to `dim` levels at a fixed hbar.
// Ladder, position and momentum matrices are built once and shared between copies.
template <typename Real = double>
class FockSpace {
 public:
  using Matrix = MatrixC<Real>;

  FockSpace(HbarValue<Real> hbar, Index dim) {
    if (dim < 2) throw std::invalid_argument("FockSpace: dim must be at least 2, got " + std::to_string(dim));
    auto d = std::make_shared<Data>();
    d->hbar = hbar.value();
    d->dim = dim;
    d->a = Matrix::Zero(dim, dim);
    for (Index n = 1; n < dim; ++n) d->a(n - 1, n) = std::sqrt(Real(n));
    d->ad = d->a.adjoint();
    const Real s = std::sqrt(d->hbar / 2);
    d->q = s * (d->a + d->ad);
    d->p = Complex<Real>(0, s) * (d->ad - d->a);
    data_ = std::move(d);
  }

  Real hbar() const { return data_->hbar; }
  Index dim() const { return data_->dim; }
  static constexpr int dof() { return 1; }
  const Matrix& annihilation() const { return data_->a; }
  const Matrix& creation() const { return data_->ad; }
  const Matrix& position() const { return data_->q; }
  const Matrix& momentum() const { return data_->p; }

  friend bool operator==(const FockSpace& a, const FockSpace& b) {
    return a.data_ == b.data_ || (a.hbar() == b.hbar() && a.dim() == b.dim());
  }

 private:
  struct Data {
    Real hbar = 1;
    Index dim = 0;
    Matrix a, ad, q, p;
  };
  std::shared_ptr<const Data> data_;
};

template <typename Real = double>
FockSpace<Real> make_space(HbarValue<Real> hbar, Index dim, int dof = 1) {
  if (dof != 1) throw std::invalid_argument("make_space: only one degree of freedom is implemented, got dof=" + std::to_string(dof));
  return FockSpace<Real>(hbar, dim);
}

template <typename Real = double>
FockSpace<Real> make_space(Real hbar, Index dim, int dof = 1) {
  return make_space(HbarValue<Real>(hbar), dim, dof);
}

template <typename Real>
void require_same_space(const FockSpace<Real>& a, const FockSpace<Real>& b, const char* where) {
  if (!(a == b))
    throw SpaceMismatch(std::string(where) + ": operands live on different Fock spaces (dim " + std::to_string(a.dim()) +
                        " at hbar " + std::to_string(a.hbar()) + " vs dim " + std::to_string(b.dim()) + " at hbar " +
                        std::to_string(b.hbar()) + ")");
}

// Dense operator on a FockSpace. `defect` carries the truncation diagnostic of the producing operation.
template <typename Real = double>
class FockOperator {
 public:
  using Matrix = MatrixC<Real>;

  FockOperator(FockSpace<Real> space, Matrix matrix, Real defect = 0)
      : space_(std::move(space)), matrix_(std::move(matrix)), defect_(defect) {
    if (matrix_.rows() != space_.dim() || matrix_.cols() != space_.dim())
      throw std::invalid_argument("FockOperator: matrix is " + std::to_string(matrix_.rows()) + "x" +
                                  std::to_string(matrix_.cols()) + ", space dim is " + std::to_string(space_.dim()));
  }

  static FockOperator identity(const FockSpace<Real>& space) {
    return FockOperator(space, Matrix::Identity(space.dim(), space.dim()));
  }
  static FockOperator zero(const FockSpace<Real>& space) { return FockOperator(space, Matrix::Zero(space.dim(), space.dim())); }

  const FockSpace<Real>& space() const { return space_; }
  const Matrix& matrix() const { return matrix_; }
  Index dim() const { return space_.dim(); }
  Real defect() const { return defect_; }

  FockOperator adjoint() const { return FockOperator(space_, matrix_.adjoint(), defect_); }

  bool is_self_adjoint(Real rel_tol = Real(1e-12)) const {
    const Real scale = std::max(matrix_.norm(), Real(1e-300));
    return (matrix_ - matrix_.adjoint()).norm() <= rel_tol * scale;
  }

  FockOperator& operator+=(const FockOperator& o) {
    require_same_space(space_, o.space_, "operator+");
    matrix_ += o.matrix_;
    defect_ += o.defect_;
    return *this;
  }
  FockOperator& operator-=(const FockOperator& o) {
    require_same_space(space_, o.space_, "operator-");
    matrix_ -= o.matrix_;
    defect_ += o.defect_;
    return *this;
  }
  friend FockOperator operator+(FockOperator a, const FockOperator& b) { return a += b; }
  friend FockOperator operator-(FockOperator a, const FockOperator& b) { return a -= b; }
  friend FockOperator operator*(const FockOperator& a, const FockOperator& b) {
    require_same_space(a.space_, b.space_, "operator*");
    return FockOperator(a.space_, a.matrix_ * b.matrix_, a.defect_ + b.defect_);
  }
  friend FockOperator operator*(Complex<Real> s, const FockOperator& a) {
    return FockOperator(a.space_, s * a.matrix_, std::abs(s) * a.defect_);
  }
  friend FockOperator operator*(Real s, const FockOperator& a) { return Complex<Real>(s) * a; }

 private:
  FockSpace<Real> space_;
  Matrix matrix_;
  Real defect_;
};

// Unit vector on a FockSpace; `defect` is the norm mass lost to truncation before normalization.
template <typename Real = double>
class StateVector {
 public:
  using Vector = VectorC<Real>;

  StateVector(FockSpace<Real> space, Vector amplitudes, Real defect = 0)
      : space_(std::move(space)), amplitudes_(std::move(amplitudes)), defect_(defect) {
    if (amplitudes_.size() != space_.dim())
      throw std::invalid_argument("StateVector: length " + std::to_string(amplitudes_.size()) + " does not match dim " +
                                  std::to_string(space_.dim()));
    if (std::abs(amplitudes_.squaredNorm() - Real(1)) > Real(1e-12))
      throw std::invalid_argument("StateVector: amplitudes are not normalized (norm^2 = " +
                                  std::to_string(double(amplitudes_.squaredNorm())) + ")");
  }

  // Normalizes `amplitudes`; the lost mass relative to `reference_norm2` is added to the defect.
  static StateVector normalized(FockSpace<Real> space, Vector amplitudes, Real reference_norm2 = 1, Real extra_defect = 0) {
    const Real n2 = amplitudes.squaredNorm();
    if (!(n2 > 0)) throw std::invalid_argument("StateVector::normalized: zero vector");
    amplitudes /= std::sqrt(n2);
    return StateVector(std::move(space), std::move(amplitudes), std::max(Real(0), reference_norm2 - n2) + extra_defect);
  }

  static StateVector basis(const FockSpace<Real>& space, Index n) {
    if (n < 0 || n >= space.dim()) throw std::out_of_range("StateVector::basis: level out of range");
    Vector v = Vector::Zero(space.dim());
    v(n) = 1;
    return StateVector(space, std::move(v));
  }

  const FockSpace<Real>& space() const { return space_; }
  const Vector& amplitudes() const { return amplitudes_; }
  Real defect() const { return defect_; }
  bool truncation_warning() const { return warning_; }
  StateVector& set_warning(bool w) {
    warning_ = w;
    return *this;
  }

 private:
  FockSpace<Real> space_;
  Vector amplitudes_;
  Real defect_;
  bool warning_ = false;
};

// Positive semidefinite unit-trace operator.
template <typename Real = double>
class DensityOperator {
 public:
  using Matrix = MatrixC<Real>;

  DensityOperator(FockSpace<Real> space, Matrix matrix) : space_(std::move(space)), matrix_(std::move(matrix)) {
    validate_shape();
    const Real tr = matrix_.trace().real();
    if (std::abs(tr - 1) > Real(1e-10)) throw std::invalid_argument("DensityOperator: trace is " + std::to_string(double(tr)));
    Eigen::SelfAdjointEigenSolver<Matrix> es(matrix_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < Real(-1e-10))
      throw std::invalid_argument("DensityOperator: min eigenvalue " + std::to_string(double(es.eigenvalues()(0))));
  }

  static DensityOperator pure(const StateVector<Real>& psi) {
    return DensityOperator(psi.space(), psi.amplitudes() * psi.amplitudes().adjoint(), Trusted{}, psi.defect());
  }

  // Convex combination of pure states with nonnegative weights summing to one.
  static DensityOperator mixture(const std::vector<std::pair<Real, StateVector<Real>>>& parts) {
    if (parts.empty()) throw std::invalid_argument("DensityOperator::mixture: no components");
    const auto& space = parts.front().second.space();
    Matrix m = Matrix::Zero(space.dim(), space.dim());
    Real total = 0, defect = 0;
    for (const auto& [w, psi] : parts) {
      require_same_space(space, psi.space(), "DensityOperator::mixture");
      if (w < 0) throw std::invalid_argument("DensityOperator::mixture: negative weight");
      m += w * psi.amplitudes() * psi.amplitudes().adjoint();
      total += w;
      defect += w * psi.defect();
    }
    if (std::abs(total - 1) > Real(1e-10)) throw std::invalid_argument("DensityOperator::mixture: weights do not sum to 1");
    return DensityOperator(space, std::move(m), Trusted{}, defect);
  }

  const FockSpace<Real>& space() const { return space_; }
  const Matrix& matrix() const { return matrix_; }
  Real defect() const { return defect_; }
  FockOperator<Real> as_operator() const { return FockOperator<Real>(space_, matrix_, defect_); }

 private:
  struct Trusted {};
  DensityOperator(FockSpace<Real> space, Matrix matrix, Trusted, Real defect)
      : space_(std::move(space)), matrix_(std::move(matrix)), defect_(defect) {
    validate_shape();
  }
  void validate_shape() const {
    if (matrix_.rows() != space_.dim() || matrix_.cols() != space_.dim())
      throw std::invalid_argument("DensityOperator: matrix shape does not match space");
  }

  FockSpace<Real> space_;
  Matrix matrix_;
  Real defect_ = 0;
};

namespace detail {

// <m|D(alpha)|n> for m, n < dim from normalized associated-Laguerre recurrences along each diagonal.
// Only rows m < rows are filled when rows is given.
template <typename Real>
MatrixC<Real> displacement_matrix(Index dim, Complex<Real> alpha, Index rows = -1) {
  if (rows < 0 || rows > dim) rows = dim;
  MatrixC<Real> d = MatrixC<Real>::Zero(rows, dim);
  const Real x = std::norm(alpha);
  if (x == 0) {
    d.setIdentity();
    return d;
  }
  const Real theta = std::arg(alpha);
  const Real log_x = std::log(x);
  constexpr Real big = Real(1e100);
  const Real log_big = std::log(big);
  for (Index k = 0; k < dim; ++k) {
    const Complex<Real> below = std::polar(Real(1), Real(k) * theta);
    const Complex<Real> above = (k % 2 ? Real(-1) : Real(1)) * std::conj(below);
    Real log_scale = Real(k) / 2 * log_x - x / 2 - std::lgamma(Real(k + 1)) / 2;
    Real prev = 0, cur = 1;
    for (Index n = 0; n + k < dim && n < rows; ++n) {
      const Real ell = cur == 0 ? Real(0) : std::copysign(std::exp(std::log(std::abs(cur)) + log_scale), cur);
      if (n + k < rows) d(n + k, n) = ell * below;
      if (k > 0) d(n, n + k) = ell * above;
      Real next;
      if (n == 0)
        next = cur * (Real(1 + k) - x) / std::sqrt(Real(k + 1));
      else
        next = ((Real(2 * n + 1 + k) - x) * cur - std::sqrt(Real(n) * Real(n + k)) * prev) /
               std::sqrt(Real(n + 1) * Real(n + k + 1));
      prev = cur;
      cur = next;
      const Real mag = std::max(std::abs(cur), std::abs(prev));
      if (mag > big) {
        prev /= big;
        cur /= big;
        log_scale += log_big;
      } else if (mag < 1 / big && mag > 0) {
        prev *= big;
        cur *= big;
        log_scale -= log_big;
      }
    }
  }
  return d;
}

// Largest deviation of a column norm of W from one over the first `levels` columns.
template <typename Real>
Real column_unitarity_defect(const MatrixC<Real>& w, Index levels) {
  Real worst = 0;
  for (Index n = 0; n < std::min(levels, w.cols()); ++n) worst = std::max(worst, std::abs(w.col(n).squaredNorm() - Real(1)));
  return worst;
}

}  // namespace detail

// Nonzero band of a coherent vector: amplitudes begin..begin+values.size()-1, everything else below ~1e-17.
template <typename Real = double>
struct CoherentSegment {
  Index begin = 0;
  VectorC<Real> values;
  Real tail = 0;  // probability mass on levels >= dim
};

template <typename Real>
CoherentSegment<Real> coherent_segment(Index dim, Complex<Real> alpha, Real log_cutoff = Real(-40)) {
  CoherentSegment<Real> seg;
  const Real x = std::norm(alpha);
  if (x == 0) {
    seg.values = VectorC<Real>::Zero(1);
    seg.values(0) = 1;
    return seg;
  }
  const Real log_a = std::log(x) / 2;
  const Real theta = std::arg(alpha);
  const Index peak = Index(std::floor(x));
  const Real log_peak = -x / 2 + Real(peak) * log_a - std::lgamma(Real(peak + 1)) / 2;
  Index lo = peak;
  Real log_lo = log_peak;
  while (lo > 0) {
    const Real next = log_lo - log_a + std::log(Real(lo)) / 2;
    if (next < log_cutoff) break;
    --lo;
    log_lo = next;
  }
  Index hi = peak;
  Real log_hi = log_peak;
  while (hi + 1 < dim) {
    const Real next = log_hi + log_a - std::log(Real(hi + 1)) / 2;
    if (next < log_cutoff && hi >= peak) break;
    ++hi;
    log_hi = next;
  }
  seg.tail = numerics::gamma_p(Real(dim), x);
  hi = std::min(hi, dim - 1);
  if (lo >= dim) {
    seg.begin = dim;
    seg.values.resize(0);
    seg.tail = 1;
    return seg;
  }
  seg.begin = lo;
  seg.values.resize(hi - lo + 1);
  Real log_c = log_lo;
  for (Index n = lo; n <= hi; ++n) {
    seg.values(n - lo) = std::polar(std::exp(log_c), Real(n) * theta);
    log_c += log_a - std::log(Real(n + 1)) / 2;
  }
  return seg;
}

// W(x,p) = exp(i(pQ - xP)/hbar) = D(alpha); defect is the column-norm deviation on the lower half of the levels.
template <typename Real>
FockOperator<Real> weyl_operator(const FockSpace<Real>& space, const PhasePoint<Real, 1>& xi) {
  if (!xi.is_finite()) throw std::invalid_argument("weyl_operator: non-finite phase point");
  auto w = detail::displacement_matrix(space.dim(), displacement_parameter(xi, space.hbar()));
  const Real defect = detail::column_unitarity_defect(w, space.dim() / 2);
  return FockOperator<Real>(space, std::move(w), defect);
}

// E_hbar(eta) = W(hbar eta).
template <typename Real>
FockOperator<Real> scaled_weyl_observable(const FockSpace<Real>& space, const PhasePoint<Real, 1>& eta) {
  if (!eta.is_finite()) throw std::invalid_argument("scaled_weyl_observable: non-finite phase point");
  return weyl_operator(space, space.hbar() * eta);
}

// ||W^dagger W - 1|| on the first `levels` levels.
template <typename Real>
Real unitarity_defect(const FockOperator<Real>& w, Index levels) {
  const Index m = std::min(levels, w.dim());
  const MatrixC<Real> g = (w.matrix().adjoint() * w.matrix()).topLeftCorner(m, m) - MatrixC<Real>::Identity(m, m);
  return g.template lpNorm<Eigen::Infinity>() == 0 ? Real(0) : Eigen::JacobiSVD<MatrixC<Real>>(g).singularValues()(0);
}

template <typename Real>
StateVector<Real> coherent_vector(const FockSpace<Real>& space, const PhasePoint<Real, 1>& xi) {
  if (!xi.is_finite()) throw std::invalid_argument("coherent_vector: non-finite phase point");
  const auto alpha = displacement_parameter(xi, space.hbar());
  const auto seg = coherent_segment(space.dim(), alpha);
  if (seg.values.size() == 0)
    throw std::domain_error("coherent_vector: coherent state at |alpha|^2 = " + std::to_string(double(std::norm(alpha))) +
                            " has no weight below level " + std::to_string(space.dim()));
  VectorC<Real> v = VectorC<Real>::Zero(space.dim());
  v.segment(seg.begin, seg.values.size()) = seg.values;
  auto psi = StateVector<Real>::normalized(space, std::move(v), Real(1) - seg.tail, seg.tail);
  psi.set_warning(std::norm(alpha) > Real(0.5) * Real(space.dim()));
  return psi;
}

template <typename Real>
DensityOperator<Real> coherent_projector(const FockSpace<Real>& space, const PhasePoint<Real, 1>& xi) {
  return DensityOperator<Real>::pure(coherent_vector(space, xi));
}

template <typename Real>
FockOperator<Real> oscillator_hamiltonian(const FockSpace<Real>& space) {
  VectorC<Real> diag(space.dim());
  for (Index n = 0; n < space.dim(); ++n) diag(n) = space.hbar() * (Real(n) + Real(0.5));
  return FockOperator<Real>(space, diag.asDiagonal());
}

// V(Q) through the eigenbasis of the truncated position matrix.
template <typename Real, typename Potential>
FockOperator<Real> potential_operator(const FockSpace<Real>& space, const Potential& potential) {
  const auto basis = position_basis<Real>(space.hbar(), space.dim());
  VectorR<Real> v(space.dim());
  for (Index k = 0; k < space.dim(); ++k) {
    v(k) = potential(basis.nodes(k));
    if (!std::isfinite(v(k)))
      throw std::domain_error("potential is not finite at quadrature node x = " + std::to_string(double(basis.nodes(k))));
  }
  const MatrixR<Real> m = basis.vectors * v.asDiagonal() * basis.vectors.transpose();
  return FockOperator<Real>(space, m.template cast<Complex<Real>>());
}

// g(P): the Fourier transform diag(i^n) carries Q to P.
template <typename Real, typename Function>
FockOperator<Real> momentum_operator(const FockSpace<Real>& space, const Function& g) {
  MatrixC<Real> m = potential_operator(space, g).matrix();
  static const Complex<Real> powers[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (Index b = 0; b < m.cols(); ++b)
    for (Index a = 0; a < m.rows(); ++a) m(a, b) *= powers[((a - b) % 4 + 4) % 4];
  return FockOperator<Real>(space, std::move(m));
}

// P^2/(2m) as the exact compression plus V(Q).
template <typename Real, typename Potential>
FockOperator<Real> schrodinger_hamiltonian(const FockSpace<Real>& space, Real mass, const Potential& potential) {
  if (!(mass > 0)) throw std::invalid_argument("schrodinger_hamiltonian: mass must be positive");
  const Index n = space.dim();
  const Real h = space.hbar();
  MatrixC<Real> p2 = MatrixC<Real>::Zero(n, n);
  for (Index k = 0; k < n; ++k) {
    p2(k, k) = h / 2 * Real(2 * k + 1);
    if (k + 2 < n) {
      const Real off = -h / 2 * std::sqrt(Real(k + 1) * Real(k + 2));
      p2(k, k + 2) = off;
      p2(k + 2, k) = off;
    }
  }
  auto v = potential_operator(space, potential);
  return FockOperator<Real>(space, p2 / (2 * mass) + v.matrix());
}

template <typename Real>
FockOperator<Real> phase_space_translate(const FockOperator<Real>& x, const PhasePoint<Real, 1>& xi) {
  const auto w = weyl_operator(x.space(), xi);
  return FockOperator<Real>(x.space(), w.matrix() * x.matrix() * w.matrix().adjoint(), x.defect() + 2 * w.defect());
}

template <typename Real>
FockOperator<Real> phase_space_translate(const FockSpace<Real>& space, const FockOperator<Real>& x,
                                         const PhasePoint<Real, 1>& xi) {
  require_same_space(space, x.space(), "phase_space_translate");
  return phase_space_translate(x, xi);
}

// Largest singular value of a dense matrix.
template <typename Derived>
typename Eigen::NumTraits<typename Derived::Scalar>::Real matrix_norm(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  if (m.size() == 0) return Real(0);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> g = m.adjoint() * m;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> es(g, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(Real(0), es.eigenvalues().maxCoeff()));
}

template <typename Real>
Real operator_norm(const FockOperator<Real>& x) {
  return matrix_norm(x.matrix());
}

// Norm of the compression onto the first `levels` levels.
template <typename Real>
Real block_norm(const FockOperator<Real>& x, Index levels) {
  const Index m = std::min(levels, x.dim());
  return matrix_norm(x.matrix().topLeftCorner(m, m));
}

// (H - z)^{-1}. A real H goes through (H - conj z) ((H - Re z)^2 + (Im z)^2)^{-1}, all in real arithmetic.
template <typename Real>
FockOperator<Real> resolvent(const FockOperator<Real>& h, Complex<Real> z) {
  if (z.imag() == 0) throw std::invalid_argument("resolvent: z must have nonzero imaginary part");
  if (!h.is_self_adjoint()) throw std::invalid_argument("resolvent: H is not self-adjoint");
  const Index n = h.dim();
  if (h.matrix().imag().cwiseAbs().maxCoeff() == 0) {
    MatrixR<Real> s = h.matrix().real() - z.real() * MatrixR<Real>::Identity(n, n);
    MatrixR<Real> g = MatrixR<Real>::Identity(n, n) * (z.imag() * z.imag());
    g.template selfadjointView<Eigen::Lower>().rankUpdate(s);
    g.template triangularView<Eigen::StrictlyUpper>() = g.transpose();
    const MatrixR<Real> inv = g.llt().solve(MatrixR<Real>::Identity(n, n));
    MatrixC<Real> r(n, n);
    r.real() = s * inv;
    r.imag() = z.imag() * inv;
    return FockOperator<Real>(h.space(), std::move(r), h.defect());
  }
  MatrixC<Real> shifted = h.matrix() - z * MatrixC<Real>::Identity(n, n);
  MatrixC<Real> r = Eigen::PartialPivLU<MatrixC<Real>>(shifted).inverse();
  return FockOperator<Real>(h.space(), std::move(r), h.defect());
}

// Heisenberg picture gamma_t(X) = e^{itH/hbar} X e^{-itH/hbar}, with H diagonalized once.
template <typename Real = double>
class HeisenbergFlow {
 public:
  explicit HeisenbergFlow(const FockOperator<Real>& h) : space_(h.space()) {
    if (!h.is_self_adjoint()) throw std::invalid_argument("heisenberg_evolve: H is not self-adjoint");
    const MatrixC<Real> off = h.matrix() - MatrixC<Real>(h.matrix().diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() == 0) {
      diagonal_ = true;
      energies_ = h.matrix().diagonal().real();
      vectors_ = MatrixC<Real>::Identity(h.dim(), h.dim());
    } else if (h.matrix().imag().cwiseAbs().maxCoeff() == 0) {
      Eigen::SelfAdjointEigenSolver<MatrixR<Real>> es(h.matrix().real());
      energies_ = es.eigenvalues();
      vectors_ = es.eigenvectors().template cast<Complex<Real>>();
    } else {
      Eigen::SelfAdjointEigenSolver<MatrixC<Real>> es(h.matrix());
      energies_ = es.eigenvalues();
      vectors_ = es.eigenvectors();
    }
  }

  MatrixC<Real> propagator(Real t) const {
    VectorC<Real> phases(energies_.size());
    for (Index k = 0; k < energies_.size(); ++k) phases(k) = std::polar(Real(1), t * energies_(k) / space_.hbar());
    return vectors_ * phases.asDiagonal() * vectors_.adjoint();
  }

  FockOperator<Real> evolve(const FockOperator<Real>& x, Real t) const {
    require_same_space(space_, x.space(), "heisenberg_evolve");
    if (diagonal_) {
      MatrixC<Real> out = x.matrix();
      for (Index b = 0; b < out.cols(); ++b)
        for (Index a = 0; a < out.rows(); ++a) out(a, b) *= std::polar(Real(1), t * (energies_(a) - energies_(b)) / space_.hbar());
      return FockOperator<Real>(space_, std::move(out), x.defect());
    }
    const MatrixC<Real> u = propagator(t);
    return FockOperator<Real>(space_, u * x.matrix() * u.adjoint(), x.defect());
  }

  const VectorR<Real>& energies() const { return energies_; }

 private:
  FockSpace<Real> space_;
  VectorR<Real> energies_;
  MatrixC<Real> vectors_;
  bool diagonal_ = false;
};

template <typename Real>
FockOperator<Real> heisenberg_evolve(const FockOperator<Real>& h, const FockOperator<Real>& x, Real t) {
  return HeisenbergFlow<Real>(h).evolve(x, t);
}

// phi(y) e^{iS(y)/hbar} projected onto the Fock basis by Gauss quadrature on the position nodes.
// The amplitude is normalized on [-window, window]; the defect is the norm mass the projection loses.
template <typename Real, typename Amplitude, typename Action>
StateVector<Real> build_wkb_vector(const FockSpace<Real>& space, const Amplitude& amplitude, const Action& action, Real window) {
  if (!(window > 0)) throw std::invalid_argument("build_wkb_vector: window must be positive");
  const Real norm2 = numerics::adaptive_simpson<Real>(
      [&](Real y) {
        const Real a = amplitude(y);
        return a * a;
      },
      -window, window, Real(1e-13));
  if (!(norm2 > 0) || !std::isfinite(norm2)) throw std::invalid_argument("build_wkb_vector: amplitude is not square-integrable");
  const Real scale = Real(1) / std::sqrt(norm2);
  const auto basis = position_basis<Real>(space.hbar(), space.dim());
  VectorC<Real> samples(space.dim());
  for (Index k = 0; k < space.dim(); ++k) {
    const Real y = basis.nodes(k);
    const Real s = std::sqrt(basis.weights(k));
    samples(k) = s * scale * amplitude(y) * std::polar(Real(1), action(y) / space.hbar());
  }
  VectorC<Real> c = basis.vectors.template cast<Complex<Real>>() * samples;
  auto psi = StateVector<Real>::normalized(space, std::move(c));
  psi.set_warning(psi.defect() > Real(1e-3));
  return psi;
}

template <typename Real>
Complex<Real> expectation(const StateVector<Real>& psi, const FockOperator<Real>& x) {
  require_same_space(psi.space(), x.space(), "expectation");
  return psi.amplitudes().dot(x.matrix() * psi.amplitudes());
}

template <typename Real>
Complex<Real> expectation(const DensityOperator<Real>& rho, const FockOperator<Real>& x) {
  require_same_space(rho.space(), x.space(), "expectation");
  return (rho.matrix() * x.matrix()).trace();
}

}  // namespace qlimit
