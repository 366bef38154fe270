#include <cmath>
#include <numbers>

#include "experiments.hpp"

namespace qlimit::experiments {

namespace {

using C = Complex<double>;

std::string time_label(double t_over_pi) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%gpi", t_over_pi);
  return buf;
}

}  // namespace

Driver evolution() {
  Driver d;
  d.primary = "quartic_gap";
  d.rate_metrics = {"quartic_gap"};
  d.rows = [](const ExperimentConfig& cfg, double h) {
    const Point eta = cfg.point("eta");
    const double g = cfg.number("quartic");
    const double tq = cfg.number("quartic_time");
    const auto w = metric_window(cfg);
    const auto nodes = nodes_of(w);
    const auto space = make_space(h, dimension(cfg, h, 1.25 * corner_radius(w) + h * eta.norm() + 0.5));
    const auto a0 = Function::weyl_exponential(eta);
    const auto a = antiwick_quantize_exact(space, a0);
    std::vector<ReportRow> rows;

    // Oscillator: both sides are exact, so the Husimi symbol intertwines with the flow.
    const auto osc = Function::oscillator();
    const HeisenbergFlow<double> flow(oscillator_hamiltonian(space));
    const double literal_ref = 1 - std::exp(-h * eta.norm_squared() / 2);
    for (double frac : cfg.numbers("times_over_pi")) {
      const double t = frac * std::numbers::pi;
      const auto evolved = flow.evolve(a, t);
      double tail = 0;
      const auto lhs = husimi_values(evolved, nodes, &tail);
      std::vector<Point> moved;
      for (const auto& xi : nodes) moved.push_back(classical_flow(osc, xi, t));
      double tail_moved = 0;
      const auto rhs = husimi_values(a, moved, &tail_moved);
      const auto limit = sample(classical_evolve(osc, a0, t), w);
      double intertwine = 0, literal = 0;
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        intertwine = std::max(intertwine, std::abs(lhs[k] - rhs[k]));
        literal = std::max(literal, std::abs(lhs[k] - limit(Index(k) % w.resolution(), Index(k) / w.resolution())));
      }
      const double defect = 2 * (tail + tail_moved) + a.defect();
      rows.push_back(row(h, space.dim(), "osc_intertwine@t=" + time_label(frac), intertwine, 0.0, defect));
      rows.push_back(row(h, space.dim(), "osc_gap@t=" + time_label(frac), literal, literal_ref, defect));
    }
    const auto period = flow.evolve(a, 2 * std::numbers::pi) - a;
    rows.push_back(row(h, space.dim(), "osc_period_defect", operator_norm(period), 0.0, 0));

    // Quartic perturbation: quantum side through the eigenbasis, classical side through RK4.
    auto v = [g](double x) { return x * x / 2 + g * x * x * x * x; };
    auto dv = [g](double x) { return x + 4 * g * x * x * x; };
    const auto hq = schrodinger_hamiltonian(space, 1.0, v);
    const auto evolved = HeisenbergFlow<double>(hq).evolve(a, tq);
    double tail = 0;
    const auto lhs = sample(husimi_symbol(evolved, w, &tail), w);
    const Window<double> escape(20 * w.half_width() + 10, 33);
    const auto h0 = Function::hamiltonian(1.0, v, dv);
    MatrixC<double> rhs(w.resolution(), w.resolution());
    for (Index k = 0; k < w.size(); ++k)
      rhs(k % w.resolution(), k / w.resolution()) = evaluate(a0, classical_flow(h0, w.node(k), tq, &escape));
    rows.push_back(row(h, space.dim(), "quartic_gap", sup_gap(lhs, rhs), std::nullopt, 2 * tail + a.defect()));
    return rows;
  };
  d.judge = [](ConvergenceReport& r) {
    const auto& cfg = r.config;
    for (double frac : cfg.numbers("times_over_pi")) {
      check_bound(r, "osc_intertwine@t=" + time_label(frac), cfg.number("intertwine_tol"));
      check_reference(r, "osc_gap@t=" + time_label(frac), cfg.number("intertwine_tol"));
    }
    check_bound(r, "osc_period_defect", cfg.number("period_tol"));
    check_nonincreasing(r, "quartic_gap");
    check_last(r, "quartic_gap", cfg.number("final_tol"));
  };
  return d;
}

namespace {

double cos_potential(double x) { return std::cos(x); }
double cos_force(double x) { return -std::sin(x); }

}  // namespace

Driver resolvent() {
  Driver d;
  d.primary = "cos_gap";
  d.rate_metrics = {"free_gap", "cos_gap"};
  d.rows = [](const ExperimentConfig& cfg, double h) {
    const Point zp = cfg.point("z");
    const C z(zp.x(0), zp.p(0));
    if (z.imag() == 0) throw ConfigError("resolvent: z must have nonzero imaginary part");
    const auto w = metric_window(cfg);
    const auto space = make_space(h, dimension(cfg, h, corner_radius(w)));
    std::vector<ReportRow> rows;
    for (bool with_cos : {false, true}) {
      auto v = [with_cos](double x) { return with_cos ? cos_potential(x) : 0.0; };
      auto dv = [with_cos](double x) { return with_cos ? cos_force(x) : 0.0; };
      const auto r = qlimit::resolvent(schrodinger_hamiltonian(space, 1.0, v), z);
      double tail = 0;
      const auto sym = sample(husimi_symbol(r, w, &tail), w);
      const auto r0 = sample(Function::classical_resolvent(1.0, v, dv, z), w);
      rows.push_back(row(h, space.dim(), with_cos ? "cos_gap" : "free_gap", sup_gap(sym, r0), std::nullopt,
                         2 * tail / std::abs(z.imag())));
    }
    return rows;
  };
  // Classical moduli at shrinking lambda: the Coulomb resolvent keeps an O(1) increment near x = 0,
  // the cos x resolvent does not.
  d.classical = [](const ExperimentConfig& cfg) {
    const Point zp = cfg.point("z");
    const C z(zp.x(0), zp.p(0));
    const double cap = 1 / std::abs(z.imag());
    const Index angular = cfg.integer("angular_samples");
    const double offset = cfg.angle_offset();
    auto coulomb = [z](double x, double p) { return C(1) / (C(p * p / 2 - 1 / std::abs(x)) - z); };
    std::vector<ReportRow> rows;
    for (double lambda : cfg.numbers("moduli_lambdas")) {
      const auto shifts = modulus_samples(lambda, angular, offset);
      double worst = 0;
      for (long k = 1; k <= cfg.integer("coulomb_points"); ++k) {
        const double x = std::ldexp(1.0, int(-k));
        const double p = std::sqrt(2 / x);
        const C base = coulomb(x, p);
        for (const auto& s : shifts)
          if (x - s.x(0) != 0) worst = std::max(worst, std::abs(coulomb(x - s.x(0), p - s.p(0)) - base));
      }
      const std::string tag = "@lambda=" + fmt(lambda);
      rows.push_back(row(0, 0, "coulomb_modulus" + tag, worst, cap, 0));
      const auto r0 = Function::classical_resolvent(1.0, cos_potential, cos_force, z);
      rows.push_back(row(0, 0, "cos_classical_modulus" + tag, classical_modulus(r0, lambda, metric_window(cfg), angular, offset),
                         std::nullopt, 0));
    }
    return rows;
  };
  d.judge = [](ConvergenceReport& r) {
    const auto& cfg = r.config;
    for (const char* m : {"free_gap", "cos_gap"}) {
      check_nonincreasing(r, m);
      check_last(r, m, cfg.number("final_tol"));
    }
    const Point zp = cfg.point("z");
    const double cap = 1 / std::abs(zp.p(0));
    const auto lambdas = cfg.numbers("moduli_lambdas");
    for (double lambda : lambdas) check_bound(r, "coulomb_modulus@lambda=" + fmt(lambda), 0.9 * cap, true);
    if (lambdas.size() >= 2) {
      const auto first = metric_rows(r, "cos_classical_modulus@lambda=" + fmt(lambdas.front()));
      const auto last = metric_rows(r, "cos_classical_modulus@lambda=" + fmt(lambdas.back()));
      const bool ok = !first.empty() && !last.empty() && last[0].value < 0.5 * first[0].value;
      add_check(r, "cos resolvent modulus shrinks with lambda", ok,
                ok ? fmt(first[0].value) + " -> " + fmt(last[0].value) : "modulus does not shrink");
    }
  };
  return d;
}

Driver oscillation_counterexample() {
  Driver d;
  d.primary = "modulus";
  d.rate_metrics = {"symbol_norm"};
  d.negative = true;
  d.rows = [](const ExperimentConfig& cfg, double h) {
    const Point eta = cfg.point("eta");
    const double lambda = cfg.number("lambda");
    const Index angular = cfg.integer("angular_samples");
    const double offset = cfg.angle_offset();
    const auto w = metric_window(cfg);
    // The block must hold both the levels of interest and their image under W(eta).
    const double shift2 = eta.norm_squared() / (2 * h);
    const Index levels = Index(std::ceil(shift2 + 6 * std::sqrt(shift2) + 16));
    const double reach = std::sqrt(2 * h * double(levels)) + eta.norm() + std::sqrt(lambda);
    const auto space = make_space(h, dimension(cfg, h, std::max(reach, corner_radius(w))));
    const auto x = weyl_operator(space, eta);
    double tail = 0;
    const double symbol = sample(husimi_symbol(x, w, &tail), w).cwiseAbs().maxCoeff();
    const double modulus = quantum_modulus(x, lambda, angular, levels, offset);
    // alpha_xi(W(eta)) = e^{i sigma(xi, eta)/hbar} W(eta), so the sampled sup of |phase - 1| is the closed form.
    double phase_sup = 0;
    for (const auto& xi : modulus_samples(lambda, angular, offset))
      phase_sup = std::max(phase_sup, std::abs(std::polar(1.0, symplectic_form(xi, eta) / h) - C(1)));
    return std::vector{
        row(h, space.dim(), "symbol_norm", symbol, std::exp(-eta.norm_squared() / (4 * h)), 2 * tail),
        row(h, space.dim(), "modulus", modulus, phase_sup, x.defect()),
    };
  };
  d.judge = [](ConvergenceReport& r) {
    const auto& cfg = r.config;
    bool ok = true;
    double worst = 0;
    for (const auto& row : metric_rows(r, "symbol_norm")) {
      worst = std::max(worst, row.value - *row.reference);
      if (row.value > *row.reference + cfg.number("symbol_slack")) ok = false;
    }
    add_check(r, "symbol_norm <= e^{-eta^2/(4 hbar)} + slack", ok, "max excess " + fmt(worst));
    check_bound(r, "modulus", cfg.number("modulus_floor"), true, cfg.number("small_hbar"));
  };
  return d;
}

}  // namespace qlimit::experiments
