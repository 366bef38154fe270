#include <cmath>

#include "experiments.hpp"

namespace qlimit::experiments {

namespace {

using C = Complex<double>;

// Sup over the window of |j_{0 hbar}(X) - f|, with the coherent tail as defect.
struct SymbolGap {
  double value;
  double tail;
};

SymbolGap symbol_gap(const FockOperator<double>& x, const Function& f, const Window<double>& w) {
  double tail = 0;
  const auto sym = sample(husimi_symbol(x, w, &tail), w);
  return {sup_gap(sym, sample(f, w)), tail};
}

// Sup over the window of |sum_k w_k (e^{-hbar eta_k^2/4} - 1) e^{i sigma(eta_k, xi)}|.
double damping_gap(const Function& f, double hbar, const Window<double>& w) {
  return sup_gap(sample(gaussian_smooth(f, hbar / 2), w), sample(f, w));
}

double max_eta(const Function& f) {
  double m = 0;
  for (const auto& a : f.as<Function::FourierSeries>()->atoms) m = std::max(m, a.eta.norm());
  return m;
}

void judge_closed_form(ConvergenceReport& r, const std::string& metric) {
  check_nonincreasing(r, metric);
  check_reference(r, metric, r.config.number("reference_tol"));
}

Driver fourier_family(std::string metric, std::function<Function(const ExperimentConfig&)> make) {
  Driver d;
  d.primary = metric;
  d.rate_metrics = {metric};
  d.rows = [metric, make](const ExperimentConfig& cfg, double h) {
    const auto f = make(cfg);
    const auto w = metric_window(cfg);
    const auto space = make_space(h, dimension(cfg, h, corner_radius(w) + h * max_eta(f)));
    const auto x = weyl_quantize(space, f);
    const auto gap = symbol_gap(x, f, w);
    return std::vector{row(h, space.dim(), metric, gap.value, damping_gap(f, h, w), 2 * gap.tail + x.defect())};
  };
  d.judge = [metric](ConvergenceReport& r) { judge_closed_form(r, metric); };
  return d;
}

}  // namespace

Driver position_momentum() {
  Driver d;
  d.primary = "position_gap";
  d.rate_metrics = {"position_gap", "momentum_gap"};
  d.rows = [](const ExperimentConfig& cfg, double h) {
    const double k = cfg.number("k");
    const auto w = metric_window(cfg);
    const auto space = make_space(h, dimension(cfg, h, corner_radius(w)));
    auto cosine = [k](double s) { return std::cos(k * s); };
    const double damp = std::exp(-h * k * k / 4);
    std::vector<ReportRow> rows;
    for (bool momentum : {false, true}) {
      const auto op = momentum ? momentum_operator(space, cosine) : potential_operator(space, cosine);
      const auto f = momentum ? Function::momentum_function([k](double p) { return C(std::cos(k * p)); })
                              : Function::position_function([k](double x) { return C(std::cos(k * x)); });
      const auto gap = symbol_gap(op, f, w);
      const double reference = (1 - damp) * sample(f, w).cwiseAbs().maxCoeff();
      rows.push_back(row(h, space.dim(), momentum ? "momentum_gap" : "position_gap", gap.value, reference, 2 * gap.tail));
    }
    return rows;
  };
  d.judge = [](ConvergenceReport& r) {
    judge_closed_form(r, "position_gap");
    judge_closed_form(r, "momentum_gap");
  };
  return d;
}

Driver weyl_limit() {
  return fourier_family("symbol_gap", [](const ExperimentConfig& cfg) { return Function::weyl_exponential(cfg.point("eta")); });
}

Driver fourier_measure() {
  return fourier_family("measure_gap", [](const ExperimentConfig& cfg) {
    std::vector<Function::Atom> atoms;
    for (const auto& [weight, eta] : cfg.weighted_points("atoms")) atoms.push_back({C(weight), eta});
    return Function::fourier_measure(std::move(atoms));
  });
}

namespace {

struct Pair {
  Point eta, eta_prime;
  FockSpace<double> space;
  FockOperator<double> a, b;
  double sigma;
  double damp_all;  // e^{-hbar (eta^2 + eta'^2 + (eta + eta')^2)/4}
};

Pair make_pair(const ExperimentConfig& cfg, double h, const Window<double>& w) {
  const Point eta = cfg.point("eta"), eta_prime = cfg.point("eta_prime");
  const double reach = corner_radius(w) + h * (eta.norm() + eta_prime.norm()) + 2 * std::sqrt(h);
  const auto space = make_space(h, dimension(cfg, h, reach));
  auto a = antiwick_quantize_exact(space, Function::weyl_exponential(eta));
  auto b = antiwick_quantize_exact(space, Function::weyl_exponential(eta_prime));
  const double damp = std::exp(-h * (eta.norm_squared() + eta_prime.norm_squared() + (eta + eta_prime).norm_squared()) / 4);
  return {eta, eta_prime, space, std::move(a), std::move(b), symplectic_form(eta, eta_prime), damp};
}

}  // namespace

Driver product() {
  Driver d;
  d.primary = "product_gap";
  d.rate_metrics = {"product_gap"};
  d.rows = [](const ExperimentConfig& cfg, double h) {
    const auto w = metric_window(cfg);
    const auto p = make_pair(cfg, h, w);
    const auto ab = p.a * p.b;
    const auto limit = multiply(Function::weyl_exponential(p.eta), Function::weyl_exponential(p.eta_prime));
    const auto gap = symbol_gap(ab, limit, w);
    const double reference = std::abs(p.damp_all * std::polar(1.0, h * p.sigma / 2) - C(1));
    return std::vector{row(h, p.space.dim(), "product_gap", gap.value, reference, 2 * gap.tail + ab.defect())};
  };
  d.judge = [](ConvergenceReport& r) {
    judge_closed_form(r, "product_gap");
    check_rate(r, "product_gap", r.config.number("rate_low"), r.config.number("rate_high"));
  };
  return d;
}

Driver bracket() {
  Driver d;
  d.primary = "bracket_gap";
  d.rate_metrics = {"bracket_gap", "factor_gap"};
  d.rows = [](const ExperimentConfig& cfg, double h) {
    const auto w = metric_window(cfg);
    const auto p = make_pair(cfg, h, w);
    const auto comm = C(0, 1 / h) * (p.a * p.b - p.b * p.a);
    const auto limit = poisson_bracket(Function::weyl_exponential(p.eta), Function::weyl_exponential(p.eta_prime));
    const auto gap = symbol_gap(comm, limit, w);
    const double factor_exact = -(2 / h) * std::sin(h * p.sigma / 2);
    std::vector<ReportRow> rows;
    rows.push_back(row(h, p.space.dim(), "bracket_gap", gap.value, std::abs(factor_exact * p.damp_all + p.sigma),
                       2 * gap.tail + comm.defect()));

    // Factor c in (i/hbar)[E(eta), E(eta')] = c E(eta + eta'), projected on the lower half of the levels.
    const Index m = p.space.dim() / 2;
    const auto e1 = scaled_weyl_observable(p.space, p.eta);
    const auto e2 = scaled_weyl_observable(p.space, p.eta_prime);
    const auto e12 = scaled_weyl_observable(p.space, p.eta + p.eta_prime);
    const MatrixC<double> c = (C(0, 1 / h) * (e1 * e2 - e2 * e1)).matrix().topLeftCorner(m, m);
    const MatrixC<double> base = e12.matrix().topLeftCorner(m, m);
    const C factor = (base.adjoint() * c).trace() / (base.adjoint() * base).trace();
    const double residual = (c - factor * base).cwiseAbs().maxCoeff();
    rows.push_back(row(h, p.space.dim(), "commutator_factor", factor.real(), factor_exact, std::abs(factor.imag()) + residual));
    rows.push_back(row(h, p.space.dim(), "factor_gap", std::abs(factor.real() + p.sigma), std::abs(factor_exact + p.sigma),
                       std::abs(factor.imag()) + residual));
    return rows;
  };
  d.judge = [](ConvergenceReport& r) {
    const auto& cfg = r.config;
    judge_closed_form(r, "bracket_gap");
    check_rate(r, "bracket_gap", cfg.number("rate_low"), cfg.number("rate_high"));
    check_reference(r, "commutator_factor", cfg.number("factor_tol"));
    const double fr = cfg.number("factor_rate"), ft = cfg.number("factor_rate_tol");
    check_rate(r, "factor_gap", fr - ft, fr + ft);
  };
  return d;
}

namespace {

// Highest level carrying coherent weight (log amplitude >= -40) for points within radius r.
Index coherent_reach(double hbar, double r) {
  const auto seg = coherent_segment<double>(Index(1) << 24, C(r / std::sqrt(2 * hbar), 0));
  return seg.begin + seg.values.size();
}

// Smallest window half-width whose quadrature is reliable on `levels` levels.
double quadrature_half_width(double hbar, Index levels) {
  double radius2 = double(levels) + 1;
  while (numerics::gamma_q(double(levels + 1), radius2) > 1e-8) radius2 *= 1.05;
  return std::sqrt(2 * hbar * radius2);
}

}  // namespace

Driver basic_sequence() {
  Driver d;
  d.primary = "basic_gap";
  d.rate_metrics = {"basic_gap"};
  d.rows = [](const ExperimentConfig& cfg, double h) {
    const double hp = cfg.number("hbar_prime");
    const Point eta = cfg.point("eta");
    const auto w = metric_window(cfg);
    const Index needed = coherent_reach(h, corner_radius(w));
    const double lq = quadrature_half_width(h, needed);
    const Window<double> qw(lq, odd_at_least(2 * lq / (cfg.number("spacing_ratio") * std::sqrt(h))));
    const Index target_dim = cfg.integer("dim") > 0 ? Index(cfg.integer("dim")) : needed + 10;
    const QuadratureGrid<double> grid(HbarValue<double>(h), qw, target_dim);
    if (grid.reliable_levels() < needed)
      throw DimensionError("basic_sequence: quadrature window is reliable on " + std::to_string(grid.reliable_levels()) +
                           " levels, " + std::to_string(needed) + " needed");
    const auto to = make_space(h, target_dim);
    const auto from = make_space(hp, coherent_dim(hp, corner_radius(qw) + hp * eta.norm()));
    const auto x = scaled_weyl_observable(from, eta);
    const auto xh = compare(to, from, x, grid);
    double t1 = 0, t2 = 0;
    const auto lhs = sample(husimi_symbol(xh, w, &t1), w);
    const auto rhs = sample(husimi_symbol(x, w, &t2), w);
    const double e2 = eta.norm_squared();
    const double reference = std::exp(-hp * e2 / 4) * (1 - std::exp(-h * e2 / 2));
    return std::vector{row(h, to.dim(), "basic_gap", sup_gap(lhs, rhs), reference, xh.defect() + 2 * (t1 + t2))};
  };
  d.judge = [](ConvergenceReport& r) { judge_closed_form(r, "basic_gap"); };
  return d;
}

Driver point_measure() {
  Driver d;
  d.primary = "char_gap";
  d.rate_metrics = {"char_gap"};
  d.rows = [](const ExperimentConfig& cfg, double h) {
    const auto etas = cfg.points("etas");
    const auto cos_points = cfg.points("cos_points");
    double reach = 0;
    for (const auto& e : etas) reach = std::max(reach, e.norm());
    for (const auto& e : cos_points) reach = std::max(reach, e.norm());
    const auto space = make_space(h, std::max<Index>(64, dimension(cfg, h, h * reach + 4 * std::sqrt(h))));
    const auto gamma = coherent_projector(space, Point{});
    const auto table = characteristic_function(gamma, etas);

    double gap = 0, gap_ref = 0, exact_err = 0;
    for (std::size_t i = 0; i < etas.size(); ++i) {
      const double expected = std::exp(-h * etas[i].norm_squared() / 4);
      gap = std::max(gap, std::abs(table.values[i] - C(1)));
      gap_ref = std::max(gap_ref, 1 - expected);
      exact_err = std::max(exact_err, std::abs(table.values[i] - C(expected)));
    }

    // 1/2 (E + E^dagger) - 1 + xi^2 H_osc >= 0 on the lower half of the levels.
    const Index m = space.dim() / 2;
    const auto hosc = oscillator_hamiltonian(space);
    double min_eig = 1e300;
    for (const auto& xi : cos_points) {
      const auto e = scaled_weyl_observable(space, xi);
      MatrixC<double> form = (0.5 * (e.matrix() + e.matrix().adjoint()) + xi.norm_squared() * hosc.matrix()).topLeftCorner(m, m);
      form -= MatrixC<double>::Identity(m, m);
      Eigen::SelfAdjointEigenSolver<MatrixC<double>> es(form, Eigen::EigenvaluesOnly);
      min_eig = std::min(min_eig, es.eigenvalues()(0));
    }
    const double defect = gamma.defect();
    return std::vector{
        row(h, space.dim(), "char_gap", gap, gap_ref, defect),
        row(h, space.dim(), "char_exact_error", exact_err, 0.0, defect),
        row(h, space.dim(), "cos_min_eig", min_eig, std::nullopt, 0),
        row(h, space.dim(), "oscillator_energy", expectation(gamma, hosc).real(), h / 2, defect),
    };
  };
  d.judge = [](ConvergenceReport& r) {
    const auto& cfg = r.config;
    judge_closed_form(r, "char_gap");
    check_bound(r, "char_exact_error", cfg.number("exact_tol"));
    check_bound(r, "cos_min_eig", -cfg.number("eig_tol"), true);
    check_reference(r, "oscillator_energy", 1e-12);
  };
  return d;
}

}  // namespace qlimit::experiments
