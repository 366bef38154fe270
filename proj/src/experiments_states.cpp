#include <cmath>
#include <numbers>

#include "experiments.hpp"

namespace qlimit::experiments {

namespace {

using C = Complex<double>;
constexpr double kPi = std::numbers::pi;

// <chi_xi, psi> using only the coherent band of chi_xi.
C coherent_overlap(const VectorC<double>& psi, double hbar, const Point& xi) {
  const auto seg = coherent_segment(psi.size(), displacement_parameter(xi, hbar));
  if (seg.values.size() == 0) return 0;
  return seg.values.dot(psi.segment(seg.begin, seg.values.size()));
}

}  // namespace

Driver eigenstate() {
  Driver d;
  d.primary = "outside_mass";
  d.rate_metrics = {"outside_mass"};
  d.rows = [](const ExperimentConfig& cfg, double h) {
    const double lambda = cfg.number("lambda");
    const long n = std::lround(lambda / h - 0.5);
    const double eps = 4 * std::sqrt(h * lambda);
    const double r1 = std::sqrt(std::max(0.0, 2 * lambda - eps)), r2 = std::sqrt(2 * lambda + eps);
    const auto space = make_space(h, std::max<Index>(2 * n + 40, dimension(cfg, h, r2 + 3 * std::sqrt(h))));
    if (n >= space.dim()) throw DimensionError("eigenstate: level " + std::to_string(n) + " is not below the dimension");

    // Level n of the truncated Schrodinger operator with V = x^2/2.
    const auto hs = schrodinger_hamiltonian(space, 1.0, [](double x) { return x * x / 2; });
    Eigen::SelfAdjointEigenSolver<MatrixR<double>> es(hs.matrix().real());
    const VectorC<double> psi = es.eigenvectors().col(Index(n)).cast<C>();

    const auto rule = PolarRule<double>::make({r1, r2}, int(cfg.integer("radial_nodes")), cfg.integer("angular_samples"));
    const double dtheta = 2 * kPi / double(rule.angles);
    std::vector<double> marginal(std::size_t(rule.angles), 0.0);
    for (std::size_t j = 0; j < rule.radii.size(); ++j)
      for (Index l = 0; l < rule.angles; ++l) {
        const double r = rule.radii[j], th = rule.angle(l);
        marginal[std::size_t(l)] += rule.radial_weights[j] * std::norm(coherent_overlap(psi, h, {r * std::cos(th), r * std::sin(th)}));
      }
    double mass = 0, lo = 1e300, hi = 0;
    for (double m : marginal) {
      mass += m * dtheta / (2 * kPi * h);
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    const double mean = mass * (2 * kPi * h) / (dtheta * double(rule.angles));
    // |n> has Husimi density e^{-s} s^n / n! in s = |xi|^2/(2 hbar).
    const double exact = numerics::gamma_p(double(n + 1), r2 * r2 / (2 * h)) - numerics::gamma_p(double(n + 1), r1 * r1 / (2 * h));
    const double defect = std::abs(es.eigenvalues()(Index(n)) - h * (double(n) + 0.5));
    return std::vector{
        row(h, space.dim(), "annulus_mass", mass, exact, defect),
        row(h, space.dim(), "outside_mass", 1 - mass, 1 - exact, defect),
        row(h, space.dim(), "angular_variation", (hi - lo) / mean, 0.0, defect),
    };
  };
  d.judge = [](ConvergenceReport& r) {
    const auto& cfg = r.config;
    check_bound(r, "annulus_mass", cfg.number("mass_floor"), true);
    check_increasing(r, "annulus_mass");
    check_reference(r, "annulus_mass", cfg.number("exact_tol"));
    check_last(r, "angular_variation", cfg.number("variation_tol"));
  };
  return d;
}

namespace {

struct WkbState {
  std::function<double(double)> amplitude;
  std::function<double(double)> action;
  std::function<double(double)> slope;  // S'
  double support;
};

WkbState wkb_state(const ExperimentConfig& cfg) {
  const double p0 = cfg.number("p0");
  const double kappa = cfg.text("action") == "quadratic" ? cfg.number("kappa") : 0.0;
  WkbState s;
  if (cfg.text("amplitude") == "gaussian") {
    s.amplitude = [](double y) { return std::exp(-y * y / 2); };
    s.support = 12;
  } else {
    s.amplitude = [](double y) { return std::abs(y) < 2 ? std::pow(1 - y * y / 4, 2) : 0.0; };
    s.support = 2;
  }
  s.action = [p0, kappa](double y) { return p0 * y + kappa * y * y / 2; };
  s.slope = [p0, kappa](double y) { return p0 + kappa * y; };
  return s;
}

// Integral of |phi|^2 e^{i(p^ y - x^ S'(y))} dy / integral of |phi|^2.
C wkb_limit(const WkbState& s, const Point& eta) {
  auto density = [&](double y) { return s.amplitude(y) * s.amplitude(y); };
  const double tol = 1e-13;
  const double norm = numerics::adaptive_simpson<double>(density, -s.support, s.support, tol);
  auto phase = [&](double y) { return eta.p(0) * y - eta.x(0) * s.slope(y); };
  const double re = numerics::adaptive_simpson<double>([&](double y) { return density(y) * std::cos(phase(y)); }, -s.support,
                                                        s.support, tol);
  const double im = numerics::adaptive_simpson<double>([&](double y) { return density(y) * std::sin(phase(y)); }, -s.support,
                                                        s.support, tol);
  return C(re, im) / norm;
}

}  // namespace

Driver wkb() {
  Driver d;
  d.primary = "char_error";
  d.rate_metrics = {"char_error"};
  d.rows = [](const ExperimentConfig& cfg, double h) {
    const auto s = wkb_state(cfg);
    const auto etas = cfg.points("etas");
    const double target = cfg.number("projection_tol");
    // Double the dimension until the projection keeps the norm.
    Index dim = cfg.integer("dim") > 0 ? Index(cfg.integer("dim")) : 128;
    auto space = make_space(h, dim);
    auto psi = build_wkb_vector(space, s.amplitude, s.action, s.support);
    while (cfg.integer("dim") == 0 && psi.defect() > target && 2 * dim <= max_dim) {
      dim *= 2;
      space = make_space(h, dim);
      psi = build_wkb_vector(space, s.amplitude, s.action, s.support);
    }
    const auto table = characteristic_function(psi, etas);
    const bool closed = cfg.text("amplitude") == "gaussian" && cfg.text("action") == "linear";
    double err = 0, ref = 0, weyl_defect = 0;
    for (std::size_t i = 0; i < etas.size(); ++i) {
      err = std::max(err, std::abs(table.values[i] - wkb_limit(s, etas[i])));
      // Gaussian amplitude, linear action: the table equals the limit times e^{-hbar^2 x^2/4}.
      const double x = etas[i].x(0), p = etas[i].p(0);
      ref = std::max(ref, std::exp(-p * p / 4) * (1 - std::exp(-h * h * x * x / 4)));
      weyl_defect = std::max(weyl_defect, scaled_weyl_observable(space, etas[i]).defect());
    }
    const double defect = psi.defect() + weyl_defect;
    return std::vector{
        row(h, space.dim(), "char_error", err, closed ? std::optional<double>(ref) : std::nullopt, defect),
        row(h, space.dim(), "mean_momentum", expectation(psi, FockOperator<double>(space, space.momentum())).real(),
            closed ? std::optional<double>(cfg.number("p0")) : std::nullopt, defect),
    };
  };
  d.judge = [](ConvergenceReport& r) {
    const auto& cfg = r.config;
    const double fine_below = cfg.number("fine_below");
    bool ok = true;
    std::string detail;
    for (const auto& row : metric_rows(r, "char_error")) {
      const double tol = row.hbar <= fine_below ? cfg.number("tol_fine") : cfg.number("tol_coarse");
      if (!(row.value <= tol)) ok = false;
      detail += (detail.empty() ? "" : ", ") + fmt(row.value) + " <= " + fmt(tol);
    }
    add_check(r, "char_error within tolerance", ok, detail);
    check_nonincreasing(r, "char_error");
    if (cfg.text("amplitude") == "gaussian" && cfg.text("action") == "linear") check_reference(r, "char_error", 1e-6);
  };
  return d;
}

namespace {

struct CrossTerm {
  double value;
  double x_norm;
};

CrossTerm cross_term(const FockSpace<double>& space, const Function& bump, double half_width, Index resolution,
                     const VectorC<double>& a, const VectorC<double>& b) {
  const QuadratureGrid<double> grid(HbarValue<double>(space.hbar()), Window<double>(half_width, resolution), space.dim());
  const auto x = antiwick_quantize(space, bump, grid);
  return {std::abs(a.dot(x.matrix() * b)), operator_norm(x)};
}

}  // namespace

Driver interference() {
  Driver d;
  d.primary = "cross_term";
  d.rate_metrics = {"cross_term"};
  d.rows = [](const ExperimentConfig& cfg, double h) {
    const Point a = cfg.point("a"), b = cfg.point("b");
    const Point mid = 0.5 * (a + b);
    const double s = cfg.number("bump_width");
    const auto bump = Function::callable([mid, s](const Point& xi) { return C(std::exp(-(xi - mid).norm_squared() / (2 * s))); });
    const auto space = make_space(h, dimension(cfg, h, std::max(a.norm(), b.norm())));
    const auto ca = coherent_vector(space, a), cb = coherent_vector(space, b);

    const double lq = cfg.number("quad_window");
    const Index res = odd_at_least(2 * lq / (cfg.number("spacing_ratio") * std::sqrt(h)));
    const auto coarse = cross_term(space, bump, lq, res, ca.amplitudes(), cb.amplitudes());
    const auto fine = cross_term(space, bump, lq, odd_at_least(1.25 * double(res)), ca.amplitudes(), cb.amplitudes());
    // Resolution change plus the roundoff floor of a unit-norm operator.
    const double floor = 1e-15 * coarse.x_norm * ca.amplitudes().lpNorm<1>() * cb.amplitudes().lpNorm<1>();
    const double defect = std::abs(coarse.value - fine.value) + floor + ca.defect() + cb.defect();

    // Characteristic table of the normalized superposition against the equal mixture of point measures.
    VectorC<double> sum = ca.amplitudes() + cb.amplitudes();
    const auto psi = StateVector<double>::normalized(space, sum, sum.squaredNorm());
    const auto etas = cfg.points("etas");
    const auto table = characteristic_function(psi, etas);
    double gap = 0;
    for (std::size_t i = 0; i < etas.size(); ++i) {
      const C mixture = 0.5 * (std::polar(1.0, symplectic_form(etas[i], a)) + std::polar(1.0, symplectic_form(etas[i], b)));
      gap = std::max(gap, std::abs(table.values[i] - mixture));
    }
    return std::vector{
        row(h, space.dim(), "cross_term", coarse.value, std::nullopt, defect),
        row(h, space.dim(), "coherent_overlap", std::abs(ca.amplitudes().dot(cb.amplitudes())),
            std::exp(-(a - b).norm_squared() / (4 * h)), ca.defect() + cb.defect()),
        row(h, space.dim(), "mixture_gap", gap, std::nullopt, ca.defect() + cb.defect()),
    };
  };
  d.judge = [](ConvergenceReport& r) {
    const auto& cfg = r.config;
    check_nonincreasing(r, "cross_term");
    // log-linear slope of the cross term against 1/hbar, compared with that of the exact coherent overlap
    std::vector<double> xs, ys;
    for (const auto& row : metric_rows(r, "cross_term"))
      if (row.rate_flag) {
        xs.push_back(1 / row.hbar);
        ys.push_back(std::log(row.value));
      }
    const Point a = cfg.point("a"), b = cfg.point("b");
    const double oracle = -(a - b).norm_squared() / 4;
    if (xs.size() >= 3) {
      const double slope = numerics::least_squares_slope(xs, ys);
      r.rates["cross_term_vs_inverse_hbar"] = slope;
      const double tol = cfg.number("slope_tol");
      add_check(r, "cross_term log-linear slope near overlap slope", std::abs(slope - oracle) <= tol * std::abs(oracle),
                "slope " + fmt(slope) + " vs " + fmt(oracle) + " over " + std::to_string(xs.size()) + " rows");
      add_check(r, "cross_term decays at least like e^{-|a-b|^2/(8 hbar)}", slope <= oracle / 2,
                "slope " + fmt(slope) + " <= " + fmt(oracle / 2));
    } else {
      add_check(r, "cross_term log-linear slope near overlap slope", false, "fewer than 3 usable rows");
    }
    check_last(r, "mixture_gap", cfg.number("mixture_tol"));
  };
  return d;
}

Driver wigner_state() {
  Driver d;
  d.primary = "smooth_state_gap";
  d.rate_metrics = {"smooth_state_gap"};
  d.rows = [](const ExperimentConfig& cfg, double h) {
    const auto centres = cfg.weighted_points("mixture");
    const double var = cfg.number("variance");
    const auto etas = cfg.points("etas");
    std::vector<ReportRow> rows;

    // chi(eta) = sum_i p_i e^{i sigma(eta, c_i)} e^{-var eta^2/2}, the classical characteristic function.
    auto chi = [&](const Point& eta) {
      C acc(0);
      for (const auto& [p, c] : centres) acc += p * std::polar(1.0, symplectic_form(eta, c));
      return acc * std::exp(-var * eta.norm_squared() / 2);
    };
    double reach = 0;
    for (const auto& [p, c] : centres) reach = std::max(reach, c.norm());
    {
      const auto space = make_space(h, dimension(cfg, h, reach + 5 * std::sqrt(var)));
      const double cutoff = std::sqrt(72 / var);  // chi below e^{-36}
      const double c = std::sqrt(h / 2);
      const int radial = 40 + int(std::ceil(2 * c * cutoff * std::sqrt(double(space.dim()))));
      const Index angles = space.dim() + Index(std::ceil(cutoff * reach)) + 16;
      const auto rule = PolarRule<double>::make({0.0, cutoff}, radial, angles);
      const auto dh = fourier_integral_quantize(space, [&](const Point& eta) { return h / (2 * kPi) * chi(-eta); }, rule);
      double gap = 0, ref = 0;
      for (const auto& eta : etas) {
        const double damp = std::exp(-h * eta.norm_squared() / 4);
        const C omega = (dh.matrix() * scaled_weyl_observable(space, eta).matrix()).trace() * damp;
        gap = std::max(gap, std::abs(omega - chi(eta)));
        ref = std::max(ref, std::abs(chi(eta)) * (1 - damp));
      }
      const MatrixC<double> herm = 0.5 * (dh.matrix() + dh.matrix().adjoint());
      Eigen::SelfAdjointEigenSolver<MatrixC<double>> es(herm, Eigen::EigenvaluesOnly);
      const double asym = (dh.matrix() - dh.matrix().adjoint()).cwiseAbs().maxCoeff();
      const double trace_err = std::abs(dh.matrix().trace() - C(1));
      rows.push_back(row(h, space.dim(), "smooth_state_gap", gap, ref, trace_err + asym));
      rows.push_back(row(h, space.dim(), "smooth_min_eig", es.eigenvalues()(0), std::nullopt, asym));
      rows.push_back(row(h, space.dim(), "smooth_trace", dh.matrix().trace().real(), 1.0, asym));
    }
    {
      // Disc indicator normalized to unit mass for dx dp / (2 pi).
      const double r0 = cfg.number("disc_radius");
      const Index dim = cfg.integer("dim") > 0 ? Index(cfg.integer("dim")) : Index(std::ceil(3 * r0 * r0 / h)) + 40;
      if (dim > max_dim) throw DimensionError("wigner_state: disc needs " + std::to_string(dim) + " levels");
      const auto space = make_space(h, dim);
      const double c = std::sqrt(2 / h);
      const int radial = 40 + int(std::ceil(1.5 * c * r0 * std::sqrt(double(dim))));
      const auto rule = PolarRule<double>::make({0.0, r0}, radial, dim + 8);
      const double density = 2 / (r0 * r0);
      const auto dd = parity_quantize(space, [density](const Point&) { return density; }, rule);
      const MatrixC<double> herm = 0.5 * (dd.matrix() + dd.matrix().adjoint());
      Eigen::SelfAdjointEigenSolver<MatrixC<double>> es(herm, Eigen::EigenvaluesOnly);
      const double asym = (dd.matrix() - dd.matrix().adjoint()).cwiseAbs().maxCoeff();
      rows.push_back(row(h, dim, "disc_min_eig", es.eigenvalues()(0), std::nullopt, asym));
      rows.push_back(row(h, dim, "disc_trace_norm", es.eigenvalues().cwiseAbs().sum(), std::nullopt, asym));
      rows.push_back(row(h, dim, "disc_trace", dd.matrix().trace().real(), std::nullopt, asym));
      rows.push_back(row(h, dim, "disc_negativity_ratio", -es.eigenvalues()(0) / es.eigenvalues()(dim - 1), std::nullopt, asym));
    }
    return rows;
  };
  d.judge = [](ConvergenceReport& r) {
    const auto& cfg = r.config;
    check_nonincreasing(r, "smooth_state_gap");
    check_reference(r, "smooth_state_gap", cfg.number("reference_tol"));
    check_bound(r, "smooth_min_eig", -cfg.number("eig_tol"), true);
    // Asserted divergence of the disc: negative at every scheduled hbar, or a trace norm growing along the schedule.
    const auto eigs = metric_rows(r, "disc_min_eig");
    const auto norms = metric_rows(r, "disc_trace_norm");
    double max_eig = -1e300;
    for (const auto& row : eigs) max_eig = std::max(max_eig, row.value);
    const bool negative = !eigs.empty() && max_eig < cfg.number("min_eig_floor");
    const double growth = norms.size() >= 2 ? norms.back().value / norms.front().value : 0;
    const bool growing = growth > cfg.number("growth");
    add_check(r, "disc density is not a state sequence", negative || growing,
              "least negative min eigenvalue " + fmt(max_eig) + ", trace-norm growth " + fmt(growth));
  };
  return d;
}

}  // namespace qlimit::experiments
