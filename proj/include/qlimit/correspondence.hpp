#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qlimit/fock.hpp"
#include "qlimit/phasespace.hpp"

namespace qlimit {

// Midpoint rule on a window for integrals against dx dp / (2 pi hbar).
template <typename Real = double>
class QuadratureGrid {
 public:
  // The identity defect is measured on min(reliable levels, defect_levels); pass the target dimension to keep it cheap.
  QuadratureGrid(HbarValue<Real> hbar, Window<Real> window, Index defect_levels = -1) : hbar_(hbar.value()), window_(window) {
    weight_ = window_.spacing() * window_.spacing() / (2 * std::numbers::pi_v<Real> * hbar_);
    reliable_levels_ = reliable_level_count(hbar_, window_);
    const Index levels = defect_levels < 0 ? reliable_levels_ : std::min(reliable_levels_, defect_levels);
    if (levels > 0) identity_defect_ = defect_on(levels);
  }

  Real hbar() const { return hbar_; }
  const Window<Real>& window() const { return window_; }
  Index size() const { return window_.size(); }
  PhasePoint<Real, 1> node(Index k) const { return window_.node(k); }
  Real weight() const { return weight_; }
  Real total_weight() const { return weight_ * Real(size()); }
  // Levels on which the quadrature reproduces the identity to about 1e-8.
  Index reliable_levels() const { return reliable_levels_; }
  Real identity_defect() const { return identity_defect_; }

  // Largest M whose level-M Husimi ring keeps mass <= 1e-8 outside the inscribed disc,
  // or 0 when the spacing is too coarse for the coherent width sqrt(hbar).
  static Index reliable_level_count(Real hbar, const Window<Real>& w) {
    if (w.spacing() / std::sqrt(hbar) > Real(0.7)) return 0;
    const Real radius2 = w.half_width() * w.half_width() / (2 * hbar);
    Index m = 0;
    while (m < 8192 && numerics::gamma_q(Real(m + 1), radius2) <= Real(1e-8)) ++m;
    return m;
  }

 private:
  Real defect_on(Index levels) const;

  Real hbar_;
  Window<Real> window_;
  Real weight_ = 0;
  Index reliable_levels_ = 0;
  Real identity_defect_ = 0;
};

namespace detail {

// sum_k weight_k |chi_k><chi_k| restricted to the first `dim` levels, nodes given by their alpha.
template <typename Real>
MatrixC<Real> weighted_projector_sum(Index dim, Real hbar, const Window<Real>& w, const std::vector<Complex<Real>>& weights) {
  const bool real_weights = std::all_of(weights.begin(), weights.end(), [](const Complex<Real>& c) { return c.imag() == 0; });
  MatrixC<Real> acc = MatrixC<Real>::Zero(dim, dim);
  for (Index k = 0; k < w.size(); ++k) {
    const Complex<Real> wk = weights[std::size_t(k)];
    if (wk == Complex<Real>(0)) continue;
    const auto seg = coherent_segment(dim, displacement_parameter(w.node(k), hbar));
    const Index len = seg.values.size();
    if (len == 0) continue;
    if (real_weights)
      acc.block(seg.begin, seg.begin, len, len).template selfadjointView<Eigen::Lower>().rankUpdate(seg.values, wk.real());
    else
      acc.block(seg.begin, seg.begin, len, len).noalias() += wk * seg.values * seg.values.adjoint();
  }
  if (real_weights) acc.template triangularView<Eigen::StrictlyUpper>() = acc.adjoint();
  return acc;
}

}  // namespace detail

template <typename Real>
Real QuadratureGrid<Real>::defect_on(Index levels) const {
  const std::vector<Complex<Real>> weights(static_cast<std::size_t>(size()), Complex<Real>(weight_));
  MatrixC<Real> m = detail::weighted_projector_sum(levels, hbar_, window_, weights);
  m -= MatrixC<Real>::Identity(levels, levels);
  return matrix_norm(m);
}

// ||P (j_{hbar 0}(1) - 1) P|| on the first `levels` levels.
template <typename Real>
Real identity_resolution_defect(const FockSpace<Real>& space, const QuadratureGrid<Real>& q, Index levels) {
  if (space.hbar() != q.hbar()) throw SpaceMismatch("identity_resolution_defect: grid built for a different hbar");
  if (levels < 1 || levels > space.dim()) throw std::invalid_argument("identity_resolution_defect: levels out of range");
  const std::vector<Complex<Real>> weights(static_cast<std::size_t>(q.size()), Complex<Real>(q.weight()));
  MatrixC<Real> m = detail::weighted_projector_sum(levels, q.hbar(), q.window(), weights);
  m -= MatrixC<Real>::Identity(levels, levels);
  return matrix_norm(m);
}

// <chi_xi, X chi_xi> at each point; `tail` receives the largest coherent mass beyond the truncation.
template <typename Real>
std::vector<Complex<Real>> husimi_values(const FockOperator<Real>& x, const std::vector<PhasePoint<Real, 1>>& points,
                                         Real* tail = nullptr) {
  std::vector<Complex<Real>> out(points.size());
  Real worst = 0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto seg = coherent_segment(x.dim(), displacement_parameter(points[k], x.space().hbar()));
    worst = std::max(worst, seg.tail);
    const Index len = seg.values.size();
    if (len == 0) {
      out[k] = 0;
      continue;
    }
    const VectorC<Real> v = x.matrix().block(seg.begin, seg.begin, len, len) * seg.values;
    out[k] = seg.values.dot(v);
  }
  if (tail) *tail = worst;
  return out;
}

// j_{0 hbar}(X) sampled on the window nodes.
template <typename Real>
PhaseSpaceFunction<Real> husimi_symbol(const FockOperator<Real>& x, const Window<Real>& w, Real* tail = nullptr) {
  std::vector<PhasePoint<Real, 1>> points;
  points.reserve(std::size_t(w.size()));
  for (Index k = 0; k < w.size(); ++k) points.push_back(w.node(k));
  const auto values = husimi_values(x, points, tail);
  MatrixC<Real> grid(w.resolution(), w.resolution());
  for (Index k = 0; k < w.size(); ++k) grid(k % w.resolution(), k / w.resolution()) = values[std::size_t(k)];
  return PhaseSpaceFunction<Real>::sampled(w, std::move(grid));
}

template <typename Real>
PhaseSpaceFunction<Real> husimi_symbol(const FockSpace<Real>& space, const FockOperator<Real>& x, const Window<Real>& w) {
  require_same_space(space, x.space(), "husimi_symbol");
  return husimi_symbol(x, w);
}

// j_{hbar 0}(f) by the midpoint rule; the defect is the grid's identity-resolution defect times max |f|.
template <typename Real>
FockOperator<Real> antiwick_quantize(const FockSpace<Real>& space, const PhaseSpaceFunction<Real>& f, const QuadratureGrid<Real>& q) {
  if (space.hbar() != q.hbar()) throw SpaceMismatch("antiwick_quantize: grid built for a different hbar");
  const MatrixC<Real> values = sample(f, q.window());
  std::vector<Complex<Real>> weights(std::size_t(q.size()));
  for (Index k = 0; k < q.size(); ++k) weights[std::size_t(k)] = q.weight() * values(k % q.window().resolution(), k / q.window().resolution());
  MatrixC<Real> m = detail::weighted_projector_sum(space.dim(), q.hbar(), q.window(), weights);
  return FockOperator<Real>(space, std::move(m), q.identity_defect() * values.cwiseAbs().maxCoeff());
}

// Closed form of j_{hbar 0} on the Fourier family: sum_k w_k e^{-hbar eta_k^2/4} E_hbar(eta_k).
template <typename Real>
FockOperator<Real> antiwick_quantize_exact(const FockSpace<Real>& space, const PhaseSpaceFunction<Real>& f) {
  using F = PhaseSpaceFunction<Real>;
  if (const auto* c = f.template as<typename F::Constant>()) return c->value * FockOperator<Real>::identity(space);
  const auto* fs = f.template as<typename F::FourierSeries>();
  if (!fs) throw std::invalid_argument("antiwick_quantize_exact: only constant and Fourier-family symbols have a closed form");
  MatrixC<Real> m = MatrixC<Real>::Zero(space.dim(), space.dim());
  Real defect = 0;
  for (const auto& a : fs->atoms) {
    const auto e = scaled_weyl_observable(space, a.eta);
    const Real damp = std::exp(-space.hbar() * a.eta.norm_squared() / 4);
    m += (a.weight * damp) * e.matrix();
    defect += std::abs(a.weight) * e.defect();
  }
  return FockOperator<Real>(space, std::move(m), defect);
}

// Weyl quantization of a Fourier-family symbol: each atom E^0(eta) becomes E_hbar(eta).
template <typename Real>
FockOperator<Real> weyl_quantize(const FockSpace<Real>& space, const PhaseSpaceFunction<Real>& f) {
  using F = PhaseSpaceFunction<Real>;
  if (const auto* c = f.template as<typename F::Constant>()) return c->value * FockOperator<Real>::identity(space);
  const auto* fs = f.template as<typename F::FourierSeries>();
  if (!fs) throw std::invalid_argument("weyl_quantize: only defined on the Fourier family");
  MatrixC<Real> m = MatrixC<Real>::Zero(space.dim(), space.dim());
  Real defect = 0;
  for (const auto& a : fs->atoms) {
    const auto e = scaled_weyl_observable(space, a.eta);
    m += a.weight * e.matrix();
    defect += std::abs(a.weight) * e.defect();
  }
  return FockOperator<Real>(space, std::move(m), defect);
}

// j_{hbar hbar'} = j_{hbar 0} o j_{0 hbar'} through the Husimi samples of X at the grid nodes.
template <typename Real>
FockOperator<Real> compare(const FockSpace<Real>& space_to, const FockSpace<Real>& space_from, const FockOperator<Real>& x,
                           const QuadratureGrid<Real>& q) {
  require_same_space(space_from, x.space(), "compare");
  if (space_to.hbar() != q.hbar()) throw SpaceMismatch("compare: grid built for a different target hbar");
  Real tail = 0;
  const auto symbol = husimi_symbol(x, q.window(), &tail);
  auto out = antiwick_quantize(space_to, symbol, q);
  return FockOperator<Real>(space_to, out.matrix(), out.defect() + tail * matrix_norm(x.matrix()));
}

// W(xi) X W(xi)^dagger compressed to the first `levels` levels, computed from the needed rows of W only.
template <typename Real>
MatrixC<Real> translated_block(const FockOperator<Real>& x, const PhasePoint<Real, 1>& xi, Index levels) {
  const MatrixC<Real> rows = detail::displacement_matrix(x.dim(), displacement_parameter(xi, x.space().hbar()), levels);
  return rows * x.matrix() * rows.adjoint();
}

// Sampled m_hbar(X, lambda) on the first `levels` levels (default: half the dimension).
template <typename Real>
Real quantum_modulus(const FockOperator<Real>& x, Real lambda, Index angular_samples = 16, Index levels = -1,
                     Real angle_offset = 0) {
  if (levels < 0) levels = x.dim() / 2;
  levels = std::min(levels, x.dim());
  const MatrixC<Real> base = x.matrix().topLeftCorner(levels, levels);
  Real worst = 0;
  for (const auto& xi : modulus_samples(lambda, angular_samples, angle_offset))
    worst = std::max(worst, matrix_norm(translated_block(x, xi, levels) - base));
  return worst;
}

template <typename Real>
Real quantum_modulus(const FockSpace<Real>& space, const FockOperator<Real>& x, Real lambda, Index angular_samples = 16) {
  require_same_space(space, x.space(), "quantum_modulus");
  return quantum_modulus(x, lambda, angular_samples);
}

template <typename Real = double>
struct ModulusProfile {
  std::vector<Real> lambdas;
  std::vector<Real> values;
  std::optional<Real> hbar;  // empty for a classical profile
  Real cap = 2;              // 2 min(||X||, ||X - c||), valid for every lambda
};

// Modulus values on an increasing lambda grid, made nondecreasing by a running maximum.
template <typename Real>
ModulusProfile<Real> modulus_profile(const FockOperator<Real>& x, const std::vector<Real>& lambdas, Index angular_samples = 16,
                                     Index levels = -1, Real angle_offset = 0) {
  if (levels < 0) levels = x.dim() / 2;
  if (!std::is_sorted(lambdas.begin(), lambdas.end())) throw std::invalid_argument("modulus_profile: lambdas must increase");
  ModulusProfile<Real> prof;
  prof.lambdas = lambdas;
  prof.hbar = x.space().hbar();
  // alpha_xi fixes scalars, so 2 ||X - c|| caps the modulus for any c; c is the mean diagonal entry.
  const MatrixC<Real> block = x.matrix().topLeftCorner(levels, levels);
  const Complex<Real> centre = block.trace() / Real(levels);
  prof.cap = 2 * std::min(matrix_norm(block), matrix_norm(MatrixC<Real>(block - centre * MatrixC<Real>::Identity(levels, levels))));
  Real running = 0;
  for (Real lam : lambdas) {
    running = std::max(running, quantum_modulus(x, lam, angular_samples, levels, angle_offset));
    prof.values.push_back(std::min(running, prof.cap));
  }
  return prof;
}

// Integral of mu_d against m(X, 2 hbar' theta), with m replaced by its value at the next profile point (the cap beyond).
template <typename Real>
Real estim_bound(const ModulusProfile<Real>& profile, HbarValue<Real> hbar_prime, int d = 1) {
  if (profile.lambdas.size() != profile.values.size()) throw std::invalid_argument("estim_bound: malformed profile");
  const Real h = hbar_prime.value();
  Real total = 0, previous_cdf = 0;
  for (std::size_t j = 0; j < profile.lambdas.size(); ++j) {
    const Real theta = profile.lambdas[j] / (2 * h);
    const Real cdf = theta > 0 ? numerics::gamma_p(Real(d), theta) : Real(0);
    total += profile.values[j] * (cdf - previous_cdf);
    previous_cdf = cdf;
  }
  total += profile.cap * (Real(1) - previous_cdf);
  return total;
}

template <typename Real>
Real estim_bound(const FockOperator<Real>& x, HbarValue<Real> hbar_prime, const ModulusProfile<Real>& profile, int d = 1) {
  (void)x;
  return estim_bound(profile, hbar_prime, d);
}

template <typename Real = double>
struct EquicontinuityTable {
  std::vector<Real> hbars;
  std::vector<Real> lambdas;
  MatrixR<Real> values;  // (hbar index, lambda index)
  bool equicontinuous = false;
  std::vector<std::pair<Real, Real>> witnesses;  // (epsilon, lambda) found for each epsilon
};

// m_hbar(A_hbar, lambda) over a schedule. Verdict: for each epsilon in {0.5, 0.1} some scanned lambda keeps the
// modulus <= epsilon over the trailing half of the schedule.
template <typename Real, typename Generator>
EquicontinuityTable<Real> equicontinuity_scan(const Generator& sequence, const std::vector<Real>& schedule,
                                              const std::vector<Real>& lambdas, Index angular_samples = 16,
                                              Index levels = -1) {
  EquicontinuityTable<Real> t;
  t.hbars = schedule;
  t.lambdas = lambdas;
  t.values.resize(Index(schedule.size()), Index(lambdas.size()));
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const FockOperator<Real> a = sequence(HbarValue<Real>(schedule[i]));
    for (std::size_t j = 0; j < lambdas.size(); ++j)
      t.values(Index(i), Index(j)) = quantum_modulus(a, lambdas[j], angular_samples, levels);
  }
  const Index n = Index(schedule.size());
  const Index tail_start = n - (n + 1) / 2;
  t.equicontinuous = n > 0;
  for (Real eps : {Real(0.5), Real(0.1)}) {
    bool found = false;
    for (Index j = 0; j < Index(lambdas.size()) && !found; ++j)
      if (t.values.block(tail_start, j, n - tail_start, 1).maxCoeff() <= eps) {
        t.witnesses.emplace_back(eps, lambdas[std::size_t(j)]);
        found = true;
      }
    t.equicontinuous = t.equicontinuous && found;
  }
  return t;
}

namespace detail {

// tr(rho D(beta) Pi) for the compression of D(beta).
template <typename Real>
Real displaced_parity_trace(const MatrixC<Real>& rho, Complex<Real> beta, Real* imag_part = nullptr) {
  const MatrixC<Real> d = displacement_matrix(rho.rows(), beta);
  Complex<Real> acc(0);
  for (Index n = 0; n < rho.rows(); ++n) {
    const Complex<Real> col = rho.row(n).transpose().cwiseProduct(d.col(n)).sum();
    acc += (n % 2 ? Real(-1) : Real(1)) * col;
  }
  if (imag_part) *imag_part = acc.imag();
  return acc.real();
}

}  // namespace detail

// (2/hbar) tr(rho alpha_xi(Pi)) on the window nodes; alpha_xi(Pi) = D(2 alpha) Pi.
template <typename Real>
PhaseSpaceFunction<Real> wigner_function(const DensityOperator<Real>& rho, const Window<Real>& w, Real* max_imag = nullptr) {
  const Real h = rho.space().hbar();
  MatrixC<Real> grid(w.resolution(), w.resolution());
  Real worst_imag = 0;
  for (Index k = 0; k < w.size(); ++k) {
    Real im = 0;
    const Real v = detail::displaced_parity_trace(rho.matrix(), Real(2) * displacement_parameter(w.node(k), h), &im);
    grid(k % w.resolution(), k / w.resolution()) = (2 / h) * v;
    worst_imag = std::max(worst_imag, (2 / h) * std::abs(im));
  }
  if (max_imag) *max_imag = worst_imag;
  return PhaseSpaceFunction<Real>::sampled(w, std::move(grid));
}

template <typename Real>
PhaseSpaceFunction<Real> wigner_function(const FockSpace<Real>& space, const DensityOperator<Real>& rho, const Window<Real>& w) {
  require_same_space(space, rho.space(), "wigner_function");
  return wigner_function(rho, w);
}

// (integral of conj(W1) W2 dx dp / 2 pi over the window, hbar^{-1} tr(D1^dagger D2)).
template <typename Real>
std::pair<Real, Real> wigner_overlap_check(const DensityOperator<Real>& rho1, const DensityOperator<Real>& rho2,
                                           const Window<Real>& w) {
  require_same_space(rho1.space(), rho2.space(), "wigner_overlap_check");
  const MatrixC<Real> w1 = sample(wigner_function(rho1, w), w);
  const MatrixC<Real> w2 = sample(wigner_function(rho2, w), w);
  const Real cell = w.spacing() * w.spacing() / (2 * std::numbers::pi_v<Real>);
  const Real integral = cell * (w1.conjugate().cwiseProduct(w2)).sum().real();
  const Real trace = (rho1.matrix().adjoint() * rho2.matrix()).trace().real() / rho1.space().hbar();
  return {integral, trace};
}

template <typename Real = double>
struct CharacteristicTable {
  std::vector<PhasePoint<Real, 1>> etas;
  std::vector<Complex<Real>> values;
};

template <typename Real>
CharacteristicTable<Real> characteristic_function(const DensityOperator<Real>& rho, const std::vector<PhasePoint<Real, 1>>& etas) {
  CharacteristicTable<Real> t;
  t.etas = etas;
  for (const auto& eta : etas) t.values.push_back(expectation(rho, scaled_weyl_observable(rho.space(), eta)));
  return t;
}

template <typename Real>
CharacteristicTable<Real> characteristic_function(const StateVector<Real>& psi, const std::vector<PhasePoint<Real, 1>>& etas) {
  CharacteristicTable<Real> t;
  t.etas = etas;
  for (const auto& eta : etas) t.values.push_back(expectation(psi, scaled_weyl_observable(psi.space(), eta)));
  return t;
}

// Polar quadrature on a disc: Gauss-Legendre radii (with the r Jacobian in the weights) on each piece between
// breakpoints, and uniform angles.
template <typename Real = double>
struct PolarRule {
  std::vector<Real> radii;
  std::vector<Real> radial_weights;
  Index angles = 0;

  static PolarRule make(const std::vector<Real>& breakpoints, int nodes_per_piece, Index angles) {
    if (breakpoints.size() < 2 || angles < 1) throw std::invalid_argument("PolarRule: need >= 2 breakpoints and >= 1 angle");
    PolarRule rule;
    rule.angles = angles;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
      std::vector<Real> x, w;
      numerics::gauss_legendre(nodes_per_piece, breakpoints[i], breakpoints[i + 1], x, w);
      for (std::size_t k = 0; k < x.size(); ++k) {
        rule.radii.push_back(x[k]);
        rule.radial_weights.push_back(w[k] * x[k]);
      }
    }
    return rule;
  }
  Real angle(Index l) const { return 2 * std::numbers::pi_v<Real> * Real(l) / Real(angles); }
};

namespace detail {

// sum over the polar rule of g(r, theta) D(c r e^{i theta}) r dr dtheta, using that D(beta)_{mn} depends on
// arg beta only through e^{i(m-n) arg beta}.
template <typename Real, typename G>
MatrixC<Real> polar_displacement_integral(Index dim, Real c, const PolarRule<Real>& rule, const G& g) {
  MatrixC<Real> acc = MatrixC<Real>::Zero(dim, dim);
  const Real dtheta = 2 * std::numbers::pi_v<Real> / Real(rule.angles);
  MatrixC<Real> fourier(2 * dim - 1, rule.angles);
  for (Index l = 0; l < rule.angles; ++l)
    for (Index k = -(dim - 1); k <= dim - 1; ++k) fourier(k + dim - 1, l) = std::polar(Real(1), Real(k) * rule.angle(l));
  VectorC<Real> values(rule.angles);
  for (std::size_t j = 0; j < rule.radii.size(); ++j) {
    const Real r = rule.radii[j];
    for (Index l = 0; l < rule.angles; ++l) values(l) = g(r, rule.angle(l));
    const VectorC<Real> harmonics = (dtheta * rule.radial_weights[j]) * (fourier * values);
    const MatrixC<Real> amp = displacement_matrix(dim, Complex<Real>(c * r, 0));
    for (Index n = 0; n < dim; ++n)
      for (Index m = 0; m < dim; ++m) acc(m, n) += harmonics(m - n + dim - 1) * amp(m, n);
  }
  return acc;
}

}  // namespace detail

// Integral of g(eta) E_hbar(eta) d^2 eta over a disc: the continuum of the Fourier family, quantized atom by atom.
template <typename Real, typename G>
FockOperator<Real> fourier_integral_quantize(const FockSpace<Real>& space, const G& g, const PolarRule<Real>& rule) {
  const Real c = std::sqrt(space.hbar() / 2);
  auto in_polar = [&](Real r, Real th) { return g(PhasePoint<Real, 1>(r * std::cos(th), r * std::sin(th))); };
  return FockOperator<Real>(space, detail::polar_displacement_integral(space.dim(), c, rule, in_polar));
}

// (1/pi) integral of rho(xi) alpha_xi(Pi) d^2 xi over a disc: the operator whose Wigner function is rho.
template <typename Real, typename G>
FockOperator<Real> parity_quantize(const FockSpace<Real>& space, const G& rho, const PolarRule<Real>& rule) {
  const Real c = std::sqrt(Real(2) / space.hbar());
  auto in_polar = [&](Real r, Real th) { return Complex<Real>(rho(PhasePoint<Real, 1>(r * std::cos(th), r * std::sin(th)))); };
  MatrixC<Real> m = detail::polar_displacement_integral(space.dim(), c, rule, in_polar) / std::numbers::pi_v<Real>;
  for (Index n = 1; n < space.dim(); n += 2) m.col(n) *= Real(-1);
  return FockOperator<Real>(space, std::move(m));
}

}  // namespace qlimit
