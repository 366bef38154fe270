#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qlimit/numerics.hpp"
#include "qlimit/phasespace.hpp"
#include "support.hpp"

using namespace qlimit;
using C = std::complex<double>;
using test_support::PointGen;

namespace {

const Window<double> unit_window(2.0, 33);

Function cos_x() {
  return Function::position_function([](double x) { return C(std::cos(x)); }, [](double x) { return C(-std::sin(x)); });
}
Function cos_p() {
  return Function::momentum_function([](double p) { return C(std::cos(p)); }, [](double p) { return C(-std::sin(p)); });
}

}  // namespace

TEST_CASE("symplectic_form_examples") {
  CHECK(symplectic_form(Point{0, 1}, Point{1, 0}) == 1.0);
  PointGen gen(1, 3.0);
  for (int i = 0; i < 20; ++i) {
    const Point a = gen(), b = gen();
    CHECK(symplectic_form(a, a) == 0.0);
    CHECK(symplectic_form(a, b) == -symplectic_form(b, a));
  }
}

TEST_CASE("window_validation_and_nodes") {
  CHECK_THROWS(Window<double>(1.0, 32));
  CHECK_THROWS(Window<double>(1.0, 31));
  CHECK_THROWS(Window<double>(0.0, 33));
  const Window<double> w(1.0, 33);
  CHECK(w.node(0).x(0) == doctest::Approx(-1 + 1.0 / 33));
  CHECK(w.node(16 + 33 * 16).norm() == doctest::Approx(0.0));
}

TEST_CASE("evaluate_closed_forms") {
  CHECK(evaluate(Function::constant(1), Point{5, -7}) == C(1));
  const double k = 1.7;
  const Point xi{0.4, -1.1};
  CHECK(std::abs(evaluate(Function::weyl_exponential(Point{0, k}), xi) - std::polar(1.0, k * xi.x(0))) <= 1e-15);
  const auto r = Function::classical_resolvent(1.0, [](double) { return 0.0; }, [](double) { return 0.0; }, C(0, 1));
  for (double p : {0.0, 0.5, 2.0}) CHECK(std::abs(evaluate(r, Point{0, p}) - C(1) / C(p * p / 2, -1)) <= 1e-15);
}

TEST_CASE("sup_norm_examples") {
  CHECK(sup_norm(Function::weyl_exponential(Point{1, 2}), unit_window) == doctest::Approx(1.0));
  CHECK(sup_norm(add(cos_x(), scale(cos_x(), C(-1))), unit_window) == 0.0);
  const auto two = Function::fourier_measure({{C(1), Point{1, 0}}, {C(1), Point{0, 1}}});
  // Dense-grid oracle: both atoms equal 1 at the origin node.
  const double s = sup_norm(two, unit_window);
  CHECK(s <= 2.0);
  CHECK(s >= 1.99);
}

TEST_CASE("sampled_form_interpolates_bilinearly") {
  const Window<double> w(1.0, 33);
  const auto f = Function::sampled(w, sample(Function::position_function([](double x) { return C(2 * x + 1); }), w));
  // Linear data is reproduced exactly between nodes.
  CHECK(std::abs(evaluate(f, Point{0.123, -0.4}) - C(1.246)) <= 1e-12);
}

TEST_CASE("translate_classical_examples") {
  const Point zero{0, 0};
  PointGen gen(2, 1.5);
  for (int i = 0; i < 10; ++i) {
    const Point q = gen();
    CHECK(evaluate(translate_classical(cos_x(), zero), q) == evaluate(cos_x(), q));
    const double s = 0.7;
    CHECK(std::abs(evaluate(translate_classical(cos_x(), Point{s, 0}), q) - std::cos(q.x(0) - s)) <= 1e-15);
  }
}

TEST_CASE("translate_classical_group_law_property") {
  PointGen gen(9, 1.0);
  const auto f = Function::fourier_measure({{C(0.5), Point{1, 0}}, {C(0, 0.3), Point{-1, 2}}});
  const auto g = Function::callable([](const Point& q) { return C(std::exp(-q.norm_squared()) * std::cos(q.x(0) * q.p(0))); });
  for (int i = 0; i < 10; ++i) {
    const Point a = gen(), b = gen(), q = gen();
    for (const auto& h : {f, g}) {
      const C two = evaluate(translate_classical(translate_classical(h, a), b), q);
      CHECK(std::abs(two - evaluate(translate_classical(h, a + b), q)) <= 1e-10);
    }
  }
}

TEST_CASE("classical_modulus_examples") {
  CHECK(classical_modulus(cos_x(), 0.0, unit_window) == 0.0);
  CHECK(classical_modulus(Function::constant(3), 0.8, unit_window) == 0.0);
  // m0(cos x, lambda) = 2 |sin(sqrt(lambda)/2)|; the sampled radius sqrt(lambda) along the x axis attains it.
  const Window<double> w(std::numbers::pi, 101);
  CHECK(classical_modulus(cos_x(), 1.0, w, 16) == doctest::Approx(2 * std::sin(0.5)).epsilon(2e-3));
}

TEST_CASE("classical_modulus_monotone_and_subadditive_property") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const auto f = cos_x(), g = Function::weyl_exponential(Point{0.5, 1});
  const auto fg = multiply(f, g);
  for (int i = 0; i < 6; ++i) {
    const double l1 = u(rng), l2 = l1 + u(rng);
    CHECK(classical_modulus(f, l1, unit_window) <= classical_modulus(f, l2, unit_window) + 1e-15);
    const double lhs = classical_modulus(fg, l1, unit_window);
    const double rhs = classical_modulus(f, l1, unit_window) * sup_norm(g, unit_window) +
                       sup_norm(f, unit_window) * classical_modulus(g, l1, unit_window);
    CHECK(lhs <= rhs + 1e-12);
  }
}

TEST_CASE("gaussian_smooth_examples") {
  const Point q{0.3, -0.2};
  CHECK(evaluate(gaussian_smooth(Function::constant(2), 0.7), q) == C(2));
  const auto e = gaussian_smooth(Function::weyl_exponential(Point{0, 1}), 1.0);
  CHECK(std::abs(evaluate(e, q) - std::exp(-0.5) * std::polar(1.0, q.x(0))) <= 1e-15);
  const auto f = Function::fourier_measure({{C(1), Point{1, 0}}, {C(2), Point{1, -1}}});
  const auto twice = gaussian_smooth(gaussian_smooth(f, 0.3), 0.5);
  const auto once = gaussian_smooth(f, 0.8);
  CHECK(sup_distance(twice, once, unit_window) <= 1e-8);
}

TEST_CASE("gaussian_smooth_sampled_is_positive_and_unital") {
  const Window<double> w(4.0, 65);
  const auto ones = Function::sampled(w, MatrixC<double>::Ones(65, 65));
  const auto bump = Function::sampled(w, sample(Function::callable([](const Point& q) { return C(std::exp(-q.norm_squared())); }), w));
  const MatrixC<double> s1 = sample(gaussian_smooth(ones, 0.2), w);
  // Away from the window edge the smoothed constant is the constant.
  CHECK(std::abs(s1(32, 32) - C(1)) <= 1e-8);
  const MatrixC<double> s2 = sample(gaussian_smooth(bump, 0.2), w);
  CHECK(s2.real().minCoeff() >= 0.0);
}

TEST_CASE("poisson_bracket_weyl_exponentials") {
  PointGen gen(6, 1.5);
  for (int i = 0; i < 8; ++i) {
    const Point a = gen(), b = gen(), q = gen();
    const auto br = poisson_bracket(Function::weyl_exponential(a), Function::weyl_exponential(b));
    const C expect = -symplectic_form(a, b) * evaluate(Function::weyl_exponential(a + b), q);
    CHECK(std::abs(evaluate(br, q) - expect) <= 1e-12);
    CHECK(std::abs(evaluate(poisson_bracket(Function::weyl_exponential(a), Function::weyl_exponential(a)), q)) <= 1e-12);
  }
}

TEST_CASE("poisson_bracket_sign_matches_commutator_limit") {
  // (i/hbar)[E(eta), E(eta')] = -(2/hbar) sin(hbar sigma/2) E(eta + eta'); its hbar -> 0 limit fixes the sign.
  const Point a{1, 0}, b{0, 1};
  const double sigma = symplectic_form(a, b);
  const double h = 1e-6;
  const double factor = -(2 / h) * std::sin(h * sigma / 2);
  const auto br = poisson_bracket(Function::weyl_exponential(a), Function::weyl_exponential(b));
  const Point q{0.2, 0.9};
  CHECK(std::abs(evaluate(br, q) - factor * evaluate(Function::weyl_exponential(a + b), q)) <= 1e-9);
}

TEST_CASE("poisson_bracket_antisymmetric_bilinear_leibniz_property") {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  auto atoms = [&](int n) {
    std::vector<Function::Atom> v;
    for (int i = 0; i < n; ++i) v.push_back({C(u(rng), u(rng)), Point{u(rng), u(rng)}});
    return Function::fourier_measure(v);
  };
  for (int trial = 0; trial < 5; ++trial) {
    const auto f = atoms(2), g = atoms(3), k = atoms(2);
    const Point q{u(rng), u(rng)};
    CHECK(std::abs(evaluate(poisson_bracket(f, g), q) + evaluate(poisson_bracket(g, f), q)) <= 1e-8);
    const C lin = evaluate(poisson_bracket(add(f, scale(k, C(2))), g), q);
    CHECK(std::abs(lin - evaluate(poisson_bracket(f, g), q) - C(2) * evaluate(poisson_bracket(k, g), q)) <= 1e-8);
    const C leib = evaluate(poisson_bracket(multiply(f, k), g), q);
    const C rhs = evaluate(f, q) * evaluate(poisson_bracket(k, g), q) + evaluate(k, q) * evaluate(poisson_bracket(f, g), q);
    CHECK(std::abs(leib - rhs) <= 1e-8);
  }
}

TEST_CASE("poisson_bracket_grid_converges_to_analytic") {
  // {cos x, cos p} = d_p(cos x) d_x(cos p) - d_x(cos x) d_p(cos p) = -sin x sin p
  const auto exact = Function::callable([](const Point& q) { return C(-std::sin(q.x(0)) * std::sin(q.p(0))); });
  std::vector<double> errs;
  for (Index res : {33, 65, 129}) {
    const Window<double> w(2.0, res);
    const auto br = poisson_bracket(Function::sampled(w, sample(cos_x(), w)), Function::sampled(w, sample(cos_p(), w)));
    const Window<double> inner(1.0, 33);
    errs.push_back(sup_distance(br, exact, inner));
  }
  CHECK(errs[1] < errs[0] / 3);
  CHECK(errs[2] < errs[1] / 3);
  CHECK(sup_distance(poisson_bracket(cos_x(), cos_p()), exact, unit_window) <= 1e-14);
}

TEST_CASE("classical_flow_examples") {
  const auto osc = Function::oscillator();
  const Point start{1, 0};
  CHECK(classical_flow(osc, start, 0.0).x(0) == 1.0);
  const Point quarter = classical_flow(osc, start, std::numbers::pi / 2);
  CHECK(std::abs(quarter.x(0)) <= 1e-15);
  CHECK(quarter.p(0) == doctest::Approx(-1.0));
  // RK4 on the same Hamiltonian without the harmonic shortcut agrees with the rotation.
  const auto generic = Function::hamiltonian(1.0, [](double x) { return x * x / 2; }, [](double x) { return x; });
  CHECK((classical_flow(generic, Point{0.3, 0.8}, 2.0) - classical_flow(osc, Point{0.3, 0.8}, 2.0)).norm() <= 1e-9);
}

TEST_CASE("classical_flow_quartic_conserves_energy") {
  auto v = [](double x) { return x * x / 2 + 0.05 * x * x * x * x; };
  const auto h0 = Function::hamiltonian(1.0, v, [](double x) { return x + 0.2 * x * x * x; });
  PointGen gen(7, 1.5);
  for (int i = 0; i < 5; ++i) {
    const Point q = gen();
    const Point end = classical_flow(h0, q, 10.0);
    CHECK(std::abs(evaluate(h0, end) - evaluate(h0, q)) <= 1e-8);
  }
}

TEST_CASE("classical_flow_reports_escape_time") {
  const auto free = Function::hamiltonian(1.0, [](double) { return 0.0; }, [](double) { return 0.0; });
  const Window<double> w(1.0, 33);
  try {
    classical_flow(free, Point{0, 1}, 5.0, &w);
    FAIL("expected FlowEscape");
  } catch (const FlowEscape& e) {
    CHECK(e.exit_time() == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("classical_evolve_is_forward_flow") {
  const auto osc = Function::oscillator();
  const auto f = Function::weyl_exponential(Point{0.4, 1.2});
  const double t = 0.9;
  const auto ev = classical_evolve(osc, f, t);
  PointGen gen(10, 2.0);
  for (int i = 0; i < 6; ++i) {
    const Point q = gen();
    CHECK(std::abs(evaluate(ev, q) - evaluate(f, classical_flow(osc, q, t))) <= 1e-14);
  }
}

TEST_CASE("mu_d_integral_examples") {
  CHECK(mu_d_integral<double>([](double) { return 1.0; }, 1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mu_d_integral<double>([](double t) { return t; }, 1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mu_d_integral<double>([](double t) { return t * t; }, 3) == doctest::Approx(mu_d_polynomial<double>({0, 0, 1}, 3)));
  CHECK(mu_d_moment<double>(2, 3) == doctest::Approx(12.0));
}

TEST_CASE("mu_d_integral_matches_monte_carlo") {
  auto g = [](double t) { return std::min(2.0, std::sqrt(t)); };
  const double quad = mu_d_integral<double>(g, 1);
  std::mt19937 rng(2024);
  std::exponential_distribution<double> expo(1.0);
  double acc = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) acc += g(expo(rng));
  CHECK(std::abs(quad - acc / n) <= 1e-3);
  // Closed form: Gamma(3/2) P(3/2, 4) + 2 e^{-4}
  const double exact = std::tgamma(1.5) * numerics::gamma_p(1.5, 4.0) + 2 * std::exp(-4.0);
  CHECK(quad == doctest::Approx(exact).epsilon(1e-9));
}

TEST_CASE("numerics_least_squares_and_gauss_legendre") {
  std::vector<double> nodes, weights;
  numerics::gauss_legendre(8, 0.0, 2.0, nodes, weights);
  double acc = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * std::pow(nodes[i], 15);
  CHECK(acc == doctest::Approx(std::pow(2.0, 16) / 16).epsilon(1e-13));
  CHECK(numerics::least_squares_slope(std::vector<double>{0, 1, 2}, std::vector<double>{1, 3, 5}) == doctest::Approx(2.0));
}
