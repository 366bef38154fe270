#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qlimit/gauss_hermite.hpp"
#include "qlimit/numerics.hpp"
#include "qlimit/phase_point.hpp"

namespace qlimit {

// Square window [-L, L]^2 sampled at the midpoints of a resolution x resolution grid.
template <typename Real = double>
class Window {
 public:
  Window(Real half_width, Index resolution) : half_width_(half_width), resolution_(resolution) {
    if (!(half_width > 0) || !std::isfinite(half_width)) throw std::invalid_argument("Window: half-width must be positive");
    if (resolution < 33 || resolution % 2 == 0)
      throw std::invalid_argument("Window: resolution must be odd and at least 33, got " + std::to_string(resolution));
  }

  Real half_width() const { return half_width_; }
  Index resolution() const { return resolution_; }
  Index size() const { return resolution_ * resolution_; }
  Real spacing() const { return 2 * half_width_ / Real(resolution_); }
  Real coordinate(Index i) const { return -half_width_ + (Real(i) + Real(0.5)) * spacing(); }
  // Node k enumerates x fastest: k = ix + resolution * ip.
  PhasePoint<Real, 1> node(Index k) const { return {coordinate(k % resolution_), coordinate(k / resolution_)}; }
  bool contains(const PhasePoint<Real, 1>& xi) const {
    return std::abs(xi.x(0)) <= half_width_ && std::abs(xi.p(0)) <= half_width_;
  }
  friend bool operator==(const Window& a, const Window& b) {
    return a.half_width_ == b.half_width_ && a.resolution_ == b.resolution_;
  }

 private:
  Real half_width_;
  Index resolution_;
};

// A classical observable on phase space, kept in closed form whenever the operations allow it.
template <typename Real = double>
class PhaseSpaceFunction {
 public:
  using C = Complex<Real>;
  using Point = PhasePoint<Real, 1>;
  using Gradient = std::pair<C, C>;  // (d/dx, d/dp)

  struct Constant {
    C value;
  };
  struct Atom {
    C weight;
    Point eta;
  };
  // sum_k weight_k e^{i sigma(eta_k, xi)}
  struct FourierSeries {
    std::vector<Atom> atoms;
  };
  struct PositionFunction {
    std::function<C(Real)> f;
    std::function<C(Real)> df;
  };
  struct MomentumFunction {
    std::function<C(Real)> g;
    std::function<C(Real)> dg;
  };
  // p^2/(2m) + V(x) evaluated at xi - shift; harmonic marks m = 1, V = x^2/2.
  struct Hamiltonian {
    Real mass;
    std::function<Real(Real)> v;
    std::function<Real(Real)> dv;
    bool harmonic = false;
  };
  // (p^2/(2m) + V(x) - z)^{-1} evaluated at xi - shift.
  struct ClassicalResolvent {
    Real mass;
    std::function<Real(Real)> v;
    std::function<Real(Real)> dv;
    C z;
    Point shift;
  };
  struct Callable {
    std::function<C(const Point&)> f;
    std::function<Gradient(const Point&)> grad;
  };
  // Values at the nodes of `window`, indexed (ix, ip).
  struct Sampled {
    Window<Real> window;
    MatrixC<Real> values;
  };
  using Form = std::variant<Constant, FourierSeries, PositionFunction, MomentumFunction, Hamiltonian, ClassicalResolvent,
                            Callable, Sampled>;

  explicit PhaseSpaceFunction(Form form) : form_(std::make_shared<const Form>(std::move(form))) {}

  static PhaseSpaceFunction constant(C c) { return PhaseSpaceFunction(Constant{c}); }
  static PhaseSpaceFunction weyl_exponential(const Point& eta) {
    return PhaseSpaceFunction(FourierSeries{{Atom{C(1), eta}}});
  }
  static PhaseSpaceFunction fourier_measure(std::vector<Atom> atoms) {
    for (const auto& a : atoms)
      if (!a.eta.is_finite() || !std::isfinite(std::abs(a.weight)))
        throw std::invalid_argument("fourier_measure: non-finite atom");
    return PhaseSpaceFunction(FourierSeries{std::move(atoms)});
  }
  static PhaseSpaceFunction position_function(std::function<C(Real)> f, std::function<C(Real)> df = {}) {
    return PhaseSpaceFunction(PositionFunction{std::move(f), std::move(df)});
  }
  static PhaseSpaceFunction momentum_function(std::function<C(Real)> g, std::function<C(Real)> dg = {}) {
    return PhaseSpaceFunction(MomentumFunction{std::move(g), std::move(dg)});
  }
  static PhaseSpaceFunction hamiltonian(Real mass, std::function<Real(Real)> v, std::function<Real(Real)> dv) {
    if (!(mass > 0)) throw std::invalid_argument("hamiltonian: mass must be positive");
    return PhaseSpaceFunction(Hamiltonian{mass, std::move(v), std::move(dv), false});
  }
  static PhaseSpaceFunction oscillator() {
    return PhaseSpaceFunction(Hamiltonian{Real(1), [](Real x) { return x * x / 2; }, [](Real x) { return x; }, true});
  }
  static PhaseSpaceFunction classical_resolvent(Real mass, std::function<Real(Real)> v, std::function<Real(Real)> dv, C z) {
    if (!(mass > 0)) throw std::invalid_argument("classical_resolvent: mass must be positive");
    if (z.imag() == 0) throw std::invalid_argument("classical_resolvent: z must have nonzero imaginary part");
    return PhaseSpaceFunction(ClassicalResolvent{mass, std::move(v), std::move(dv), z, Point{}});
  }
  static PhaseSpaceFunction callable(std::function<C(const Point&)> f, std::function<Gradient(const Point&)> grad = {}) {
    return PhaseSpaceFunction(Callable{std::move(f), std::move(grad)});
  }
  static PhaseSpaceFunction sampled(const Window<Real>& w, MatrixC<Real> values) {
    if (values.rows() != w.resolution() || values.cols() != w.resolution())
      throw std::invalid_argument("sampled: value grid does not match window resolution");
    return PhaseSpaceFunction(Sampled{w, std::move(values)});
  }

  const Form& form() const { return *form_; }
  template <typename T>
  const T* as() const {
    return std::get_if<T>(form_.get());
  }
  bool is_sampled() const { return as<Sampled>() != nullptr; }

 private:
  std::shared_ptr<const Form> form_;
};

using Function = PhaseSpaceFunction<double>;

template <typename Real>
Complex<Real> evaluate(const PhaseSpaceFunction<Real>& f, const PhasePoint<Real, 1>& xi);

namespace detail {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

template <typename Real>
Complex<Real> interpolate(const typename PhaseSpaceFunction<Real>::Sampled& s, const PhasePoint<Real, 1>& xi) {
  const auto& w = s.window;
  if (!w.contains(xi)) throw std::out_of_range("evaluate: point outside the window of a sampled function");
  const Real h = w.spacing();
  const Index r = w.resolution();
  auto locate = [&](Real c, Index& i0, Real& t) {
    Real u = (c + w.half_width()) / h - Real(0.5);
    u = std::clamp(u, Real(0), Real(r - 1));
    i0 = std::min(Index(std::floor(u)), r - 2);
    t = u - Real(i0);
  };
  Index ix, ip;
  Real tx, tp;
  locate(xi.x(0), ix, tx);
  locate(xi.p(0), ip, tp);
  const auto& v = s.values;
  return (1 - tx) * (1 - tp) * v(ix, ip) + tx * (1 - tp) * v(ix + 1, ip) + (1 - tx) * tp * v(ix, ip + 1) +
         tx * tp * v(ix + 1, ip + 1);
}

template <typename Real>
std::pair<Complex<Real>, Complex<Real>> central_gradient(const PhaseSpaceFunction<Real>& f, const PhasePoint<Real, 1>& xi,
                                                         Real step) {
  const PhasePoint<Real, 1> ex(step, 0), ep(0, step);
  return {(evaluate(f, xi + ex) - evaluate(f, xi - ex)) / (2 * step), (evaluate(f, xi + ep) - evaluate(f, xi - ep)) / (2 * step)};
}

}  // namespace detail

template <typename Real>
Complex<Real> evaluate(const PhaseSpaceFunction<Real>& f, const PhasePoint<Real, 1>& xi) {
  using F = PhaseSpaceFunction<Real>;
  using C = Complex<Real>;
  return std::visit(
      detail::overloaded{
          [](const typename F::Constant& c) { return c.value; },
          [&](const typename F::FourierSeries& s) {
            C sum(0);
            for (const auto& a : s.atoms) sum += a.weight * std::polar(Real(1), symplectic_form(a.eta, xi));
            return sum;
          },
          [&](const typename F::PositionFunction& pf) { return pf.f(xi.x(0)); },
          [&](const typename F::MomentumFunction& mf) { return mf.g(xi.p(0)); },
          [&](const typename F::Hamiltonian& h) {
            const Real p = xi.p(0);
            return C(p * p / (2 * h.mass) + h.v(xi.x(0)));
          },
          [&](const typename F::ClassicalResolvent& r) {
            const Real x = xi.x(0) - r.shift.x(0), p = xi.p(0) - r.shift.p(0);
            return C(1) / (C(p * p / (2 * r.mass) + r.v(x)) - r.z);
          },
          [&](const typename F::Callable& c) { return c.f(xi); },
          [&](const typename F::Sampled& s) { return detail::interpolate<Real>(s, xi); },
      },
      f.form());
}

// Values of f at every node of w, indexed (ix, ip).
template <typename Real>
MatrixC<Real> sample(const PhaseSpaceFunction<Real>& f, const Window<Real>& w) {
  if (const auto* s = f.template as<typename PhaseSpaceFunction<Real>::Sampled>(); s && s->window == w) return s->values;
  MatrixC<Real> out(w.resolution(), w.resolution());
  for (Index ip = 0; ip < w.resolution(); ++ip)
    for (Index ix = 0; ix < w.resolution(); ++ix) out(ix, ip) = evaluate(f, PhasePoint<Real, 1>(w.coordinate(ix), w.coordinate(ip)));
  return out;
}

// Max |f| over the window nodes: a lower bound for the sup norm over phase space.
template <typename Real>
Real sup_norm(const PhaseSpaceFunction<Real>& f, const Window<Real>& w) {
  return sample(f, w).cwiseAbs().maxCoeff();
}

template <typename Real>
Real sup_distance(const PhaseSpaceFunction<Real>& f, const PhaseSpaceFunction<Real>& g, const Window<Real>& w) {
  return (sample(f, w) - sample(g, w)).cwiseAbs().maxCoeff();
}

template <typename Real>
std::pair<Complex<Real>, Complex<Real>> gradient(const PhaseSpaceFunction<Real>& f, const PhasePoint<Real, 1>& xi) {
  using F = PhaseSpaceFunction<Real>;
  using C = Complex<Real>;
  using G = std::pair<C, C>;
  const Real step = Real(1e-5);
  return std::visit(
      detail::overloaded{
          [](const typename F::Constant&) { return G{C(0), C(0)}; },
          [&](const typename F::FourierSeries& s) {
            G g{C(0), C(0)};
            for (const auto& a : s.atoms) {
              const C e = a.weight * std::polar(Real(1), symplectic_form(a.eta, xi));
              g.first += C(0, a.eta.p(0)) * e;
              g.second += C(0, -a.eta.x(0)) * e;
            }
            return g;
          },
          [&](const typename F::PositionFunction& pf) {
            const Real x = xi.x(0);
            return G{pf.df ? pf.df(x) : (pf.f(x + step) - pf.f(x - step)) / (2 * step), C(0)};
          },
          [&](const typename F::MomentumFunction& mf) {
            const Real p = xi.p(0);
            return G{C(0), mf.dg ? mf.dg(p) : (mf.g(p + step) - mf.g(p - step)) / (2 * step)};
          },
          [&](const typename F::Hamiltonian& h) {
            const Real x = xi.x(0);
            const Real dv = h.dv ? h.dv(x) : (h.v(x + step) - h.v(x - step)) / (2 * step);
            return G{C(dv), C(xi.p(0) / h.mass)};
          },
          [&](const typename F::ClassicalResolvent& r) {
            const Real x = xi.x(0) - r.shift.x(0), p = xi.p(0) - r.shift.p(0);
            const C val = C(1) / (C(p * p / (2 * r.mass) + r.v(x)) - r.z);
            const Real dv = r.dv ? r.dv(x) : (r.v(x + step) - r.v(x - step)) / (2 * step);
            return G{-val * val * dv, -val * val * (p / r.mass)};
          },
          [&](const typename F::Callable& c) { return c.grad ? c.grad(xi) : detail::central_gradient(f, xi, step); },
          [&](const typename F::Sampled& s) { return detail::central_gradient(f, xi, s.window.spacing()); },
      },
      f.form());
}

// alpha^0_xi(f) = f(. - xi)
template <typename Real>
PhaseSpaceFunction<Real> translate_classical(const PhaseSpaceFunction<Real>& f, const PhasePoint<Real, 1>& xi) {
  using F = PhaseSpaceFunction<Real>;
  using C = Complex<Real>;
  using P = PhasePoint<Real, 1>;
  const Real sx = xi.x(0), sp = xi.p(0);
  return std::visit(
      detail::overloaded{
          [&](const typename F::Constant&) { return f; },
          [&](const typename F::FourierSeries& s) {
            auto atoms = s.atoms;
            for (auto& a : atoms) a.weight *= std::polar(Real(1), -symplectic_form(a.eta, xi));
            return F(typename F::FourierSeries{std::move(atoms)});
          },
          [&](const typename F::PositionFunction& pf) {
            auto g = pf.f;
            auto dg = pf.df;
            return F::position_function([g, sx](Real x) { return g(x - sx); },
                                        dg ? std::function<C(Real)>([dg, sx](Real x) { return dg(x - sx); }) : std::function<C(Real)>{});
          },
          [&](const typename F::MomentumFunction& mf) {
            auto g = mf.g;
            auto dg = mf.dg;
            return F::momentum_function([g, sp](Real p) { return g(p - sp); },
                                        dg ? std::function<C(Real)>([dg, sp](Real p) { return dg(p - sp); }) : std::function<C(Real)>{});
          },
          [&](const typename F::ClassicalResolvent& r) {
            auto shifted = r;
            shifted.shift = r.shift + xi;
            return F(shifted);
          },
          [&](const typename F::Sampled& s) {
            MatrixC<Real> v(s.window.resolution(), s.window.resolution());
            const Real lim = s.window.half_width();
            for (Index ip = 0; ip < s.window.resolution(); ++ip)
              for (Index ix = 0; ix < s.window.resolution(); ++ix) {
                P q(std::clamp(s.window.coordinate(ix) - sx, -lim, lim), std::clamp(s.window.coordinate(ip) - sp, -lim, lim));
                v(ix, ip) = detail::interpolate<Real>(s, q);
              }
            return F::sampled(s.window, std::move(v));
          },
          [&](const auto&) {
            const F base = f;
            return F::callable([base, xi](const P& q) { return evaluate(base, q - xi); },
                               [base, xi](const P& q) { return gradient(base, q - xi); });
          },
      },
      f.form());
}

// Translation vectors at radii sqrt(lambda) * {1, 1/2, 1/4} and `angular_samples` angles starting at `angle_offset`.
template <typename Real>
std::vector<PhasePoint<Real, 1>> modulus_samples(Real lambda, Index angular_samples, Real angle_offset = 0) {
  if (lambda < 0) throw std::invalid_argument("modulus: lambda must be nonnegative");
  if (angular_samples < 1) throw std::invalid_argument("modulus: angular_samples must be positive");
  std::vector<PhasePoint<Real, 1>> out;
  if (lambda == 0) return out;
  const Real r = std::sqrt(lambda);
  for (Real frac : {Real(1), Real(0.5), Real(0.25)})
    for (Index j = 0; j < angular_samples; ++j) {
      const Real th = angle_offset + 2 * std::numbers::pi_v<Real> * Real(j) / Real(angular_samples);
      out.emplace_back(frac * r * std::cos(th), frac * r * std::sin(th));
    }
  return out;
}

template <typename Real>
Real classical_modulus(const PhaseSpaceFunction<Real>& f, Real lambda, const Window<Real>& w, Index angular_samples = 16,
                       Real angle_offset = 0) {
  const MatrixC<Real> base = sample(f, w);
  Real worst = 0;
  for (const auto& xi : modulus_samples(lambda, angular_samples, angle_offset))
    worst = std::max(worst, (sample(translate_classical(f, xi), w) - base).cwiseAbs().maxCoeff());
  return worst;
}

template <typename Real>
PhaseSpaceFunction<Real> scale(const PhaseSpaceFunction<Real>& f, Complex<Real> s) {
  using F = PhaseSpaceFunction<Real>;
  if (const auto* c = f.template as<typename F::Constant>()) return F::constant(s * c->value);
  if (const auto* fs = f.template as<typename F::FourierSeries>()) {
    auto atoms = fs->atoms;
    for (auto& a : atoms) a.weight *= s;
    return F(typename F::FourierSeries{std::move(atoms)});
  }
  if (const auto* g = f.template as<typename F::Sampled>()) return F::sampled(g->window, s * g->values);
  return F::callable([f, s](const PhasePoint<Real, 1>& q) { return s * evaluate(f, q); },
                     [f, s](const PhasePoint<Real, 1>& q) {
                       const auto g = gradient(f, q);
                       return std::pair{s * g.first, s * g.second};
                     });
}

template <typename Real>
PhaseSpaceFunction<Real> add(const PhaseSpaceFunction<Real>& f, const PhaseSpaceFunction<Real>& g) {
  using F = PhaseSpaceFunction<Real>;
  const auto* ca = f.template as<typename F::Constant>();
  const auto* cb = g.template as<typename F::Constant>();
  if (ca && cb) return F::constant(ca->value + cb->value);
  const auto* fa = f.template as<typename F::FourierSeries>();
  const auto* fb = g.template as<typename F::FourierSeries>();
  if ((fa || ca) && (fb || cb)) {
    std::vector<typename F::Atom> atoms;
    auto append = [&](const typename F::FourierSeries* s, const typename F::Constant* c) {
      if (s) atoms.insert(atoms.end(), s->atoms.begin(), s->atoms.end());
      if (c) atoms.push_back({c->value, PhasePoint<Real, 1>{}});
    };
    append(fa, ca);
    append(fb, cb);
    return F(typename F::FourierSeries{std::move(atoms)});
  }
  const auto* sa = f.template as<typename F::Sampled>();
  const auto* sb = g.template as<typename F::Sampled>();
  if (sa && sb && sa->window == sb->window) return F::sampled(sa->window, sa->values + sb->values);
  return F::callable([f, g](const PhasePoint<Real, 1>& q) { return evaluate(f, q) + evaluate(g, q); },
                     [f, g](const PhasePoint<Real, 1>& q) {
                       const auto a = gradient(f, q), b = gradient(g, q);
                       return std::pair{a.first + b.first, a.second + b.second};
                     });
}

// Pointwise product; closed form on the Fourier family.
template <typename Real>
PhaseSpaceFunction<Real> multiply(const PhaseSpaceFunction<Real>& f, const PhaseSpaceFunction<Real>& g) {
  using F = PhaseSpaceFunction<Real>;
  if (const auto* c = f.template as<typename F::Constant>()) return scale(g, c->value);
  if (const auto* c = g.template as<typename F::Constant>()) return scale(f, c->value);
  const auto* fa = f.template as<typename F::FourierSeries>();
  const auto* fb = g.template as<typename F::FourierSeries>();
  if (fa && fb) {
    std::vector<typename F::Atom> atoms;
    atoms.reserve(fa->atoms.size() * fb->atoms.size());
    for (const auto& a : fa->atoms)
      for (const auto& b : fb->atoms) atoms.push_back({a.weight * b.weight, a.eta + b.eta});
    return F(typename F::FourierSeries{std::move(atoms)});
  }
  const auto* sa = f.template as<typename F::Sampled>();
  const auto* sb = g.template as<typename F::Sampled>();
  if (sa && sb && sa->window == sb->window) return F::sampled(sa->window, sa->values.cwiseProduct(sb->values));
  return F::callable([f, g](const PhasePoint<Real, 1>& q) { return evaluate(f, q) * evaluate(g, q); },
                     [f, g](const PhasePoint<Real, 1>& q) {
                       const auto a = gradient(f, q), b = gradient(g, q);
                       const auto fv = evaluate(f, q), gv = evaluate(g, q);
                       return std::pair{a.first * gv + fv * b.first, a.second * gv + fv * b.second};
                     });
}

// Convolution with the Gaussian (2 pi s)^{-1} exp(-(x^2+p^2)/(2s)).
template <typename Real>
PhaseSpaceFunction<Real> gaussian_smooth(const PhaseSpaceFunction<Real>& f, Real s) {
  using F = PhaseSpaceFunction<Real>;
  using C = Complex<Real>;
  using P = PhasePoint<Real, 1>;
  if (!(s > 0)) throw std::invalid_argument("gaussian_smooth: variance must be positive");
  if (f.template as<typename F::Constant>()) return f;
  if (const auto* fs = f.template as<typename F::FourierSeries>()) {
    auto atoms = fs->atoms;
    for (auto& a : atoms) a.weight *= std::exp(-s * a.eta.norm_squared() / 2);
    return F(typename F::FourierSeries{std::move(atoms)});
  }
  if (const auto* g = f.template as<typename F::Sampled>()) {
    const auto& w = g->window;
    const Index r = w.resolution();
    const Real h = w.spacing();
    const Index reach = std::min<Index>(r - 1, Index(std::ceil(8 * std::sqrt(s) / h)));
    std::vector<Real> kernel(reach + 1);
    for (Index k = 0; k <= reach; ++k) kernel[k] = std::exp(-Real(k * k) * h * h / (2 * s));
    // Separable pass along each axis, renormalized at the edges so constants are preserved.
    auto pass = [&](const MatrixC<Real>& in, bool along_x) {
      MatrixC<Real> out(r, r);
      for (Index a = 0; a < r; ++a)
        for (Index b = 0; b < r; ++b) {
          C acc(0);
          Real norm = 0;
          for (Index k = -reach; k <= reach; ++k) {
            const Index i = (along_x ? a : b) + k;
            if (i < 0 || i >= r) continue;
            const Real wk = kernel[std::abs(k)];
            acc += wk * (along_x ? in(i, b) : in(a, i));
            norm += wk;
          }
          out(a, b) = acc / norm;
        }
      return out;
    };
    return F::sampled(w, pass(pass(g->values, true), false));
  }
  const auto rule = normal_rule<Real>(24);
  const Real sd = std::sqrt(s);
  if (const auto* pf = f.template as<typename F::PositionFunction>()) {
    auto fn = pf->f;
    return F::position_function([fn, rule, sd](Real x) {
      C acc(0);
      for (Index k = 0; k < rule.nodes.size(); ++k) acc += rule.weights(k) * fn(x + sd * rule.nodes(k));
      return acc;
    });
  }
  if (const auto* mf = f.template as<typename F::MomentumFunction>()) {
    auto fn = mf->g;
    return F::momentum_function([fn, rule, sd](Real p) {
      C acc(0);
      for (Index k = 0; k < rule.nodes.size(); ++k) acc += rule.weights(k) * fn(p + sd * rule.nodes(k));
      return acc;
    });
  }
  const F base = f;
  return F::callable([base, rule, sd](const P& q) {
    C acc(0);
    for (Index i = 0; i < rule.nodes.size(); ++i)
      for (Index j = 0; j < rule.nodes.size(); ++j)
        acc += rule.weights(i) * rule.weights(j) * evaluate(base, q + P(sd * rule.nodes(i), sd * rule.nodes(j)));
    return acc;
  });
}

// {f, g} = df/dp dg/dx - df/dx dg/dp
template <typename Real>
PhaseSpaceFunction<Real> poisson_bracket(const PhaseSpaceFunction<Real>& f, const PhaseSpaceFunction<Real>& g) {
  using F = PhaseSpaceFunction<Real>;
  using P = PhasePoint<Real, 1>;
  if (f.template as<typename F::Constant>() || g.template as<typename F::Constant>()) return F::constant(0);
  const auto* fa = f.template as<typename F::FourierSeries>();
  const auto* fb = g.template as<typename F::FourierSeries>();
  if (fa && fb) {
    std::vector<typename F::Atom> atoms;
    for (const auto& a : fa->atoms)
      for (const auto& b : fb->atoms) {
        const Real coef = -symplectic_form(a.eta, b.eta);
        if (coef != 0) atoms.push_back({coef * a.weight * b.weight, a.eta + b.eta});
      }
    return F(typename F::FourierSeries{std::move(atoms)});
  }
  const auto* sa = f.template as<typename F::Sampled>();
  const auto* sb = g.template as<typename F::Sampled>();
  if (sa && sb) {
    if (!(sa->window == sb->window)) throw std::invalid_argument("poisson_bracket: sampled operands on different windows");
    const Index r = sa->window.resolution();
    const Real h = sa->window.spacing();
    auto diff = [&](const MatrixC<Real>& v, Index ix, Index ip, bool along_x) {
      const Index i = along_x ? ix : ip;
      const Index lo = std::max<Index>(i - 1, 0), hi = std::min<Index>(i + 1, r - 1);
      const auto at = [&](Index k) { return along_x ? v(k, ip) : v(ix, k); };
      return (at(hi) - at(lo)) / (Real(hi - lo) * h);
    };
    MatrixC<Real> out(r, r);
    for (Index ip = 0; ip < r; ++ip)
      for (Index ix = 0; ix < r; ++ix)
        out(ix, ip) = diff(sa->values, ix, ip, false) * diff(sb->values, ix, ip, true) -
                      diff(sa->values, ix, ip, true) * diff(sb->values, ix, ip, false);
    return F::sampled(sa->window, std::move(out));
  }
  return F::callable([f, g](const P& q) {
    const auto a = gradient(f, q), b = gradient(g, q);
    return a.second * b.first - a.first * b.second;
  });
}

class FlowEscape : public std::runtime_error {
 public:
  FlowEscape(const std::string& what, double exit_time) : std::runtime_error(what), exit_time_(exit_time) {}
  double exit_time() const { return exit_time_; }

 private:
  double exit_time_;
};

namespace detail {

template <typename Real>
PhasePoint<Real, 1> hamilton_field(const PhaseSpaceFunction<Real>& h, const PhasePoint<Real, 1>& xi) {
  const auto g = gradient(h, xi);
  return {g.second.real(), -g.first.real()};
}

template <typename Real>
PhasePoint<Real, 1> rk4(const PhaseSpaceFunction<Real>& h, PhasePoint<Real, 1> xi, Real t, Index steps,
                        const Window<Real>* escape) {
  const Real dt = t / Real(steps);
  for (Index k = 0; k < steps; ++k) {
    const auto k1 = hamilton_field(h, xi);
    const auto k2 = hamilton_field(h, xi + (dt / 2) * k1);
    const auto k3 = hamilton_field(h, xi + (dt / 2) * k2);
    const auto k4 = hamilton_field(h, xi + dt * k3);
    xi = xi + (dt / 6) * (k1 + Real(2) * k2 + Real(2) * k3 + k4);
    if (escape && !escape->contains(xi))
      throw FlowEscape("classical_flow: trajectory left the window at t = " + std::to_string(double(dt * Real(k + 1))),
                       double(dt * Real(k + 1)));
  }
  return xi;
}

}  // namespace detail

// Phi_t(xi) for xdot = dH/dp, pdot = -dH/dx. Exact rotation for the harmonic oscillator,
// otherwise RK4 with the step halved until two successive results agree to `tol`.
template <typename Real>
PhasePoint<Real, 1> classical_flow(const PhaseSpaceFunction<Real>& h, const PhasePoint<Real, 1>& xi, Real t,
                                   const Window<Real>* escape = nullptr, Real tol = Real(1e-11)) {
  using F = PhaseSpaceFunction<Real>;
  if (t == 0) return xi;
  if (const auto* hm = h.template as<typename F::Hamiltonian>(); hm && hm->harmonic) {
    const Real c = std::cos(t), s = std::sin(t);
    PhasePoint<Real, 1> out(c * xi.x(0) + s * xi.p(0), -s * xi.x(0) + c * xi.p(0));
    if (escape && !escape->contains(out)) throw FlowEscape("classical_flow: endpoint outside the window", double(t));
    return out;
  }
  Index steps = std::max<Index>(8, Index(std::ceil(std::abs(t) / Real(0.02))));
  auto coarse = detail::rk4(h, xi, t, steps, escape);
  for (int refine = 0; refine < 12; ++refine) {
    steps *= 2;
    auto fine = detail::rk4(h, xi, t, steps, escape);
    if ((fine - coarse).norm() <= tol * std::max(Real(1), fine.norm())) return fine;
    coarse = fine;
  }
  return coarse;
}

// gamma^0_t(f) = f o Phi_t.
template <typename Real>
PhaseSpaceFunction<Real> classical_evolve(const PhaseSpaceFunction<Real>& h, const PhaseSpaceFunction<Real>& f, Real t) {
  using F = PhaseSpaceFunction<Real>;
  using P = PhasePoint<Real, 1>;
  if (f.template as<typename F::Constant>()) return f;
  const auto* hm = h.template as<typename F::Hamiltonian>();
  const auto* fs = f.template as<typename F::FourierSeries>();
  if (hm && hm->harmonic && fs) {
    // sigma(eta, R_t xi) = sigma(R_{-t} eta, xi) because rotations are symplectic.
    auto atoms = fs->atoms;
    for (auto& a : atoms) a.eta = classical_flow(h, a.eta, -t);
    return F(typename F::FourierSeries{std::move(atoms)});
  }
  return F::callable([h, f, t](const P& q) { return evaluate(f, classical_flow(h, q, t)); });
}

// Integral of g against mu_d(d theta) = theta^{d-1} e^{-theta} / (d-1)! d theta.
template <typename Real, typename G>
Real mu_d_integral(const G& g, int d, Real tol = Real(1e-11)) {
  if (d < 1) throw std::invalid_argument("mu_d_integral: d must be positive");
  const Real log_norm = std::lgamma(Real(d));
  auto integrand = [&](Real th) {
    if (th <= 0) return d == 1 ? Real(g(Real(0))) : Real(0);
    return Real(g(th)) * std::exp(Real(d - 1) * std::log(th) - th - log_norm);
  };
  const Real upper = Real(d) + 40 + 12 * std::sqrt(Real(d));
  std::vector<Real> cuts = {0, Real(d) / 4, Real(d), Real(d) + 4 * std::sqrt(Real(d)) + 4, upper};
  Real total = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] > cuts[i]) total += numerics::adaptive_simpson<Real>(integrand, cuts[i], cuts[i + 1], tol);
  return total;
}

// E[theta^k] under mu_d.
template <typename Real = double>
Real mu_d_moment(int k, int d) {
  if (d < 1 || k < 0) throw std::invalid_argument("mu_d_moment: need d >= 1, k >= 0");
  return std::exp(std::lgamma(Real(d + k)) - std::lgamma(Real(d)));
}

// Polynomial sum_k c_k theta^k integrated exactly against mu_d.
template <typename Real = double>
Real mu_d_polynomial(const std::vector<Real>& coefficients, int d) {
  Real total = 0;
  for (std::size_t k = 0; k < coefficients.size(); ++k) total += coefficients[k] * mu_d_moment<Real>(int(k), d);
  return total;
}

}  // namespace qlimit
