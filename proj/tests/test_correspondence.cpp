#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qlimit/correspondence.hpp"
#include "support.hpp"

using namespace qlimit;
using C = std::complex<double>;
using test_support::PointGen;

namespace {

double dist(const MatrixC<double>& a, const MatrixC<double>& b) { return matrix_norm(MatrixC<double>(a - b)); }

Function cos_x_family() { return Function::fourier_measure({{C(0.5), Point{0, 1}}, {C(0.5), Point{0, -1}}}); }

}  // namespace

TEST_CASE("husimi_symbol_examples") {
  const double h = 0.5;
  const auto s = make_space(h, 90);
  const Window<double> w(2.0, 33);
  const auto one = sample(husimi_symbol(FockOperator<double>::identity(s), w), w);
  CHECK((one.array() - C(1)).abs().maxCoeff() <= 1e-12);

  const Point eta{0.6, -1.3};
  const auto sym = husimi_symbol(scaled_weyl_observable(s, eta), w);
  const auto expect = scale(Function::weyl_exponential(eta), C(std::exp(-h * eta.norm_squared() / 4)));
  CHECK(sup_distance(sym, expect, w) <= 1e-12);

  const auto gamma = husimi_symbol(coherent_projector(s, Point{0, 0}).as_operator(), w);
  const auto gauss = Function::callable([h](const Point& q) { return C(std::exp(-q.norm_squared() / (2 * h))); });
  CHECK(sup_distance(gamma, gauss, w) <= 1e-12);
}

TEST_CASE("husimi_symbol_is_positive_property") {
  PointGen gen(21, 1.0);
  const auto s = make_space(1.0, 40);
  const Window<double> w(1.5, 33);
  for (int trial = 0; trial < 3; ++trial) {
    MatrixC<double> b = MatrixC<double>::Zero(40, 40);
    for (int k = 0; k < 4; ++k) b += weyl_operator(s, gen()).matrix() * double(k + 1);
    const FockOperator<double> pos(s, b.adjoint() * b);
    CHECK(sample(husimi_symbol(pos, w), w).real().minCoeff() >= -1e-12);
  }
}

TEST_CASE("antiwick_quantize_examples") {
  const double h = 1.0;
  const auto s = make_space(h, 30);
  const QuadratureGrid<double> q(HbarValue<double>(h), Window<double>(8.0, 129), 30);
  const Index m = std::min<Index>(q.reliable_levels(), 30);
  REQUIRE(m >= 5);
  const auto one = antiwick_quantize(s, Function::constant(1), q);
  CHECK(dist(one.matrix().topLeftCorner(m, m), MatrixC<double>::Identity(m, m)) <= 1e-7);

  const Point eta{0, 1};
  const auto a = antiwick_quantize(s, Function::weyl_exponential(eta), q);
  const MatrixC<double> expect = std::exp(-0.25) * scaled_weyl_observable(s, eta).matrix();
  CHECK(std::exp(-0.25) == doctest::Approx(0.7788).epsilon(1e-4));
  CHECK(dist(a.matrix().topLeftCorner(m, m), expect.topLeftCorner(m, m)) <= 1e-7);
  CHECK(dist(antiwick_quantize_exact(s, Function::weyl_exponential(eta)).matrix(), expect) <= 1e-14);

  const auto bump = Function::callable([](const Point& p) { return C(std::exp(-(p - Point{0.5, 0}).norm_squared())); });
  const auto b = antiwick_quantize(s, Function::sampled(q.window(), sample(bump, q.window())), q);
  Eigen::SelfAdjointEigenSolver<MatrixC<double>> es(b.matrix());
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("compare_kernel_and_unit") {
  for (auto [h, hp] : {std::pair{0.5, 0.5}, std::pair{1.0, 0.25}}) {
    const auto to = make_space(h, 40), from = make_space(hp, 160);
    const QuadratureGrid<double> q(HbarValue<double>(h), Window<double>(8.0, 129), 40);
    const Index m = std::min<Index>(q.reliable_levels(), 40);
    REQUIRE(m >= 5);
    for (const Point& eta : {Point{1, 0}, Point{0, 1}, Point{1, 1}}) {
      const auto out = compare(to, from, scaled_weyl_observable(from, eta), q);
      const double damp = std::exp(-(h + hp) * eta.norm_squared() / 4);
      const MatrixC<double> expect = damp * scaled_weyl_observable(to, eta).matrix();
      CHECK(dist(out.matrix().topLeftCorner(m, m), expect.topLeftCorner(m, m)) <= 1e-6);
    }
    const auto unit = compare(to, from, FockOperator<double>::identity(from), q);
    CHECK(dist(unit.matrix().topLeftCorner(m, m), MatrixC<double>::Identity(m, m)) <= 1e-6);
  }
  CHECK(std::exp(-0.25) == doctest::Approx(std::exp(-(0.5 + 0.5) * 1.0 / 4)));
}

TEST_CASE("compare_twice_is_gaussian_smearing") {
  const double h = 0.5;
  // The source space must hold coherent states out to the window corner.
  const auto s = make_space(h, 40), big = make_space(h, 200);
  const QuadratureGrid<double> q(HbarValue<double>(h), Window<double>(8.0, 129), 40);
  const Index m = std::min<Index>(q.reliable_levels(), 40);
  const Point eta{1, 0};
  const auto once = compare(s, big, scaled_weyl_observable(big, eta), q);
  // Rows beyond the reliable block are not trusted, so feed the second pass the exact first-pass value.
  const auto exact_once = FockOperator<double>(big, std::exp(-h / 2) * scaled_weyl_observable(big, eta).matrix());
  CHECK(dist(once.matrix().topLeftCorner(m, m), exact_once.matrix().topLeftCorner(m, m)) <= 1e-6);
  const auto twice = compare(s, big, exact_once, q);
  const MatrixC<double> expect = std::exp(-h * eta.norm_squared()) * scaled_weyl_observable(s, eta).matrix();
  CHECK(dist(twice.matrix().topLeftCorner(m, m), expect.topLeftCorner(m, m)) <= 1e-6);
}

TEST_CASE("compare_is_translation_covariant") {
  const double h = 0.5;
  const auto s = make_space(h, 60), big = make_space(h, 200);
  const QuadratureGrid<double> q(HbarValue<double>(h), Window<double>(8.0, 129), 60);
  const Index m = std::min<Index>(q.reliable_levels(), 60) / 2;
  const Point eta{0.5, 1}, xi{0.3, 0.2};
  const auto x = scaled_weyl_observable(big, eta);
  const auto moved = FockOperator<double>(big, translated_block(x, xi, 200));
  const auto lhs = compare(s, big, moved, q);
  const MatrixC<double> rhs = translated_block(compare(s, big, x, q), xi, m);
  CHECK(dist(lhs.matrix().topLeftCorner(m, m), rhs) <= 1e-5);
}

TEST_CASE("identity_resolution_defect_bounds_and_ladder") {
  const auto s = make_space(1.0, 16);
  std::vector<double> ladder;
  for (auto [l, res] : {std::pair{6.0, Index(97)}, std::pair{7.0, Index(113)}, std::pair{8.0, Index(129)}}) {
    const QuadratureGrid<double> q(HbarValue<double>(1.0), Window<double>(l, res), 16);
    const double d = identity_resolution_defect(s, q, 16);
    CHECK(d <= 1.0);
    ladder.push_back(d);
  }
  CHECK(ladder[1] < ladder[0]);
  CHECK(ladder[2] < ladder[1]);
  // Levels inside the reliable block reach the 1e-6 regime at the standard grid.
  const QuadratureGrid<double> std_grid(HbarValue<double>(1.0), Window<double>(8.0, 129), 16);
  CHECK(identity_resolution_defect(s, std_grid, 10) <= 1e-6);
}

TEST_CASE("quantum_modulus_examples") {
  const double h = 0.5;
  const auto s = make_space(h, 80);
  CHECK(quantum_modulus(scaled_weyl_observable(s, Point{0, 1}), 0.0) == 0.0);
  // For E(eta) the modulus is sup |e^{i sigma(xi, eta)} - 1| over the sampled xi, independent of hbar.
  const Point eta{0, 1};
  double sampled = 0;
  for (const auto& xi : modulus_samples(1.0, 16)) sampled = std::max(sampled, std::abs(std::polar(1.0, symplectic_form(xi, eta)) - C(1)));
  CHECK(sampled == doctest::Approx(2 * std::sin(0.5)).epsilon(1e-12));
  for (double hb : {1.0, 0.25}) {
    const auto sp = make_space(hb, 120);
    CHECK(quantum_modulus(scaled_weyl_observable(sp, eta), 1.0, 16, 40) == doctest::Approx(sampled).epsilon(1e-6));
  }
  const auto small = make_space(1.0 / 32, 220);
  CHECK(quantum_modulus(weyl_operator(small, Point{1, 0}), 0.5, 16, 60) >= 1.9);
}

TEST_CASE("modulus_contracts_under_comparison") {
  const double h = 0.5;
  const auto s = make_space(h, 60), big = make_space(h, 200);
  const QuadratureGrid<double> q(HbarValue<double>(h), Window<double>(8.0, 129), 60);
  const Index levels = std::min<Index>(q.reliable_levels(), 60) / 2;
  const auto x = FockOperator<double>(big, scaled_weyl_observable(big, Point{1, 0.5}).matrix() +
                                               0.5 * scaled_weyl_observable(big, Point{-0.5, 1}).matrix());
  const auto y = compare(s, big, x, q);
  for (double lambda : {0.01, 0.1, 0.5}) CHECK(quantum_modulus(y, lambda, 16, levels) <= quantum_modulus(x, lambda, 16, levels) + 1e-6);
}

TEST_CASE("estim_bound_examples") {
  const std::vector<double> lambdas = {1e-4, 1e-3, 0.01, 0.03, 0.1, 0.3, 1, 3, 10};
  // Displaced rows of the first 20 levels stay far inside 200 levels for every lambda here.
  const auto s = make_space(0.5, 200);
  const auto unit = modulus_profile(FockOperator<double>::identity(s), lambdas, 16, 20);
  CHECK(estim_bound(unit, HbarValue<double>(0.5)) == doctest::Approx(0.0).epsilon(1e-12));

  const Point eta{0, 1};
  const double h = 0.5;
  const auto x = scaled_weyl_observable(s, eta);
  const auto prof = modulus_profile(x, lambdas, 16, 20);
  const double bound = estim_bound(prof, HbarValue<double>(h));
  const double lhs = 1 - std::exp(-h * eta.norm_squared() / 2);
  CHECK(lhs <= bound + 1e-6);
  CHECK(bound <= prof.cap + 1e-12);
  for (std::size_t i = 1; i < prof.values.size(); ++i) CHECK(prof.values[i] >= prof.values[i - 1]);
}

TEST_CASE("equicontinuity_scan_verdicts") {
  const std::vector<double> schedule = {1, 0.5, 0.25, 0.125};
  const std::vector<double> lambdas = {0.001, 0.01, 0.1, 1};
  auto cos_seq = [](HbarValue<double> h) { return antiwick_quantize_exact(make_space(h, 64), cos_x_family()); };
  const auto good = equicontinuity_scan(cos_seq, schedule, lambdas);
  CHECK(good.equicontinuous);
  const Window<double> w(std::numbers::pi, 65);
  for (Index j = 0; j < 4; ++j) {
    const double m0 = classical_modulus(Function::position_function([](double x) { return C(std::cos(x)); }), lambdas[std::size_t(j)], w, 16);
    CHECK(good.values.col(j).maxCoeff() <= m0 + 1e-6);
  }

  auto weyl_seq = [](HbarValue<double> h) { return weyl_operator(make_space(h, 200), Point{1, 0}); };
  const auto bad = equicontinuity_scan(weyl_seq, std::vector<double>{1, 0.25, 1.0 / 16, 1.0 / 64}, lambdas, 16, 60);
  CHECK_FALSE(bad.equicontinuous);
  CHECK(bad.values(3, 3) >= 1.9);

  auto unit_seq = [](HbarValue<double> h) { return FockOperator<double>::identity(make_space(h, 120)); };
  CHECK(equicontinuity_scan(unit_seq, schedule, lambdas, 16, 8).values.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("wigner_function_examples") {
  for (double h : {1.0, 0.25}) {
    const auto s = make_space(h, 60);
    const Window<double> w(2.0, 33);
    double imag = 0;
    const auto wf = wigner_function(coherent_projector(s, Point{0, 0}), w, &imag);
    const auto expect = Function::callable([h](const Point& q) { return C((2 / h) * std::exp(-q.norm_squared() / h)); });
    CHECK(sup_distance(wf, expect, w) <= 1e-6);
    CHECK(imag <= 1e-10);
  }
  const auto s = make_space(1.0, 40);
  const Window<double> w(1.0, 33);
  const auto fock1 = DensityOperator<double>::pure(StateVector<double>::basis(s, 1));
  CHECK(evaluate(wigner_function(fock1, w), Point{0, 0}).real() == doctest::Approx(-2.0).epsilon(1e-3));

  const Window<double> big(6.0, 121);
  const MatrixC<double> vals = sample(wigner_function(coherent_projector(s, Point{0.5, 0}), big), big);
  CHECK(vals.sum().real() * big.spacing() * big.spacing() / (2 * std::numbers::pi) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("wigner_overlap_check_examples") {
  const auto s = make_space(1.0, 40);
  const Window<double> w(6.0, 121);
  const auto g = coherent_projector(s, Point{0, 0});
  const auto [i1, t1] = wigner_overlap_check(g, g, w);
  CHECK(t1 == doctest::Approx(1.0));
  CHECK(i1 == doctest::Approx(1.0).epsilon(1e-4));

  const auto f0 = DensityOperator<double>::pure(StateVector<double>::basis(s, 0));
  const auto f1 = DensityOperator<double>::pure(StateVector<double>::basis(s, 1));
  const auto [i2, t2] = wigner_overlap_check(f0, f1, w);
  CHECK(t2 == 0.0);
  CHECK(std::abs(i2) <= 1e-4);

  const auto mix = DensityOperator<double>::mixture({{0.5, StateVector<double>::basis(s, 0)}, {0.5, StateVector<double>::basis(s, 1)}});
  CHECK(wigner_overlap_check(f0, mix, w).second == doctest::Approx(0.5));
}

TEST_CASE("characteristic_function_examples") {
  const auto s = make_space(1.0, 60);
  const auto t = characteristic_function(coherent_projector(s, Point{0, 0}), {Point{0, 0}, Point{0, 2}});
  CHECK(std::abs(t.values[0] - C(1)) <= 1e-14);
  CHECK(std::abs(t.values[1] - std::exp(-1.0)) <= 1e-12);
  // The cosine inequality 1 - Re omega(E(xi)) <= xi^2 omega(H^osc) on coherent states at the origin.
  for (double h : {1.0, 0.25, 1.0 / 16}) {
    const auto sp = make_space(h, 80);
    const auto g = coherent_projector(sp, Point{0, 0});
    const double energy = expectation(g, oscillator_hamiltonian(sp)).real();
    for (const Point& xi : {Point{0.5, 0}, Point{0, 1}, Point{1, 1}}) {
      const C v = characteristic_function(g, {xi}).values[0];
      CHECK(std::abs(v) <= 1 + 1e-12);
      CHECK(1 - v.real() <= xi.norm_squared() * energy + 1e-12);
    }
  }
}

TEST_CASE("polar_quantizers_reproduce_coherent_projector") {
  // Gamma = (hbar/2pi) integral e^{-hbar eta^2/4} E(-eta) d^2 eta, and its Wigner density (2/hbar) e^{-xi^2/hbar}.
  const double h = 0.5;
  const auto s = make_space(h, 40);
  const MatrixC<double> gamma = coherent_projector(s, Point{0, 0}).matrix();
  const double cutoff = std::sqrt(4 * 40 / h);
  const auto rule = PolarRule<double>::make({0.0, cutoff}, 120, 60);
  const auto via_fourier = fourier_integral_quantize(
      s, [h](const Point& eta) { return C(h / (2 * std::numbers::pi) * std::exp(-h * eta.norm_squared() / 4)); }, rule);
  CHECK(dist(via_fourier.matrix().topLeftCorner(20, 20), gamma.topLeftCorner(20, 20)) <= 1e-8);
  const auto disc = PolarRule<double>::make({0.0, std::sqrt(40 * h)}, 120, 60);
  const auto via_parity = parity_quantize(s, [h](const Point& xi) { return (2 / h) * std::exp(-xi.norm_squared() / h); }, disc);
  CHECK(dist(via_parity.matrix().topLeftCorner(20, 20), gamma.topLeftCorner(20, 20)) <= 1e-8);
}
