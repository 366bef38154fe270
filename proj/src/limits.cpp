#include "qlimit/limits.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "experiments.hpp"
#include "qlimit/numerics.hpp"
#include "qlimit/parallel.hpp"

namespace qlimit {

namespace {

struct KindInfo {
  ExperimentKind kind;
  const char* name;
  const char* summary;
};

const KindInfo kKinds[] = {
    {ExperimentKind::position_momentum, "position_momentum",
     "Husimi symbols of cos(kQ) and cos(kP) against cos(kx) and cos(kp)."},
    {ExperimentKind::weyl_limit, "weyl_limit", "Husimi symbol of E_hbar(eta) against e^{i sigma(eta, xi)}."},
    {ExperimentKind::fourier_measure, "fourier_measure", "Husimi symbol of a finite weighted sum of rescaled Weyl operators."},
    {ExperimentKind::product, "product", "Symbol of A_hbar B_hbar against A_0 B_0 for anti-Wick quantized Weyl exponentials."},
    {ExperimentKind::bracket, "bracket", "Symbol of (i/hbar)[A_hbar, B_hbar] against the Poisson bracket; exact commutator factor."},
    {ExperimentKind::evolution, "evolution",
     "Heisenberg evolution against the classical flow: oscillator (exact on both sides) and a quartic perturbation."},
    {ExperimentKind::resolvent, "resolvent",
     "Symbol of (H_hbar - z)^{-1} against the classical resolvent for V = 0 and V = cos x; Coulomb modulus table."},
    {ExperimentKind::oscillation_counterexample, "oscillation_counterexample",
     "Fixed W(eta): symbols vanish while the modulus of continuity stays near 2 (asserted non-convergence)."},
    {ExperimentKind::point_measure, "point_measure", "Coherent projectors at the origin: characteristic values and the cosine inequality."},
    {ExperimentKind::eigenstate, "eigenstate", "Oscillator eigenstates at fixed energy: Husimi mass on the energy-shell annulus."},
    {ExperimentKind::wkb, "wkb", "WKB vectors: characteristic table against the measure on the Lagrangian graph."},
    {ExperimentKind::interference, "interference",
     "Superposed coherent states: cross term of a smooth observable vanishes, the limit is the equal mixture."},
    {ExperimentKind::basic_sequence, "basic_sequence", "Comparison images j_{hbar hbar'} X of a fixed operator across the schedule."},
    {ExperimentKind::wigner_state, "wigner_state",
     "States from Wigner densities: a Gaussian mixture converges; a disc indicator is not positive (asserted)."},
};

const KindInfo& info(ExperimentKind k) {
  for (const auto& i : kKinds)
    if (i.kind == k) return i;
  throw std::logic_error("unknown experiment kind");
}

using PT = ParamType;

std::vector<ParamSpec> window_params(const char* window, const char* resolution) {
  return {
      {"window", PT::number, window, "half-width L of the square window for symbol comparisons"},
      {"resolution", PT::integer, resolution, "odd number of window nodes per axis, at least 33"},
      {"dim", PT::integer, "0", "Fock dimension override; 0 uses the coherent-state policy"},
  };
}

std::vector<ParamSpec> build_specs(ExperimentKind k) {
  auto specs = window_params("2", "33");
  auto add = [&](std::vector<ParamSpec> more) { specs.insert(specs.end(), more.begin(), more.end()); };
  const ParamSpec ref_tol{"reference_tol", PT::number, "0.001", "allowed |metric - closed form| when larger than 5 x defect"};
  const ParamSpec eta{"eta", PT::point, "1,0", "first Fourier atom eta"};
  const ParamSpec eta_prime{"eta_prime", PT::point, "0,1", "second Fourier atom eta'"};
  switch (k) {
    case ExperimentKind::position_momentum:
      add({{"k", PT::number, "1", "wave number of cos(k Q) and cos(k P)"}, ref_tol});
      break;
    case ExperimentKind::weyl_limit:
      add({{"eta", PT::point, "0,1", "Fourier variable of E_hbar(eta)"}, ref_tol});
      break;
    case ExperimentKind::fourier_measure:
      add({{"atoms", PT::weighted_points, "0.5:1,0;0.3:0,2;0.2:-1,1", "atoms weight:x,p separated by ';'"}, ref_tol});
      break;
    case ExperimentKind::product:
      add({eta, eta_prime, ref_tol, {"rate_low", PT::number, "0.85", "lower end of the accepted rate"},
           {"rate_high", PT::number, "1.15", "upper end of the accepted rate"}});
      break;
    case ExperimentKind::bracket:
      add({eta, eta_prime, ref_tol, {"rate_low", PT::number, "0.85", "lower end of the accepted bracket rate"},
           {"rate_high", PT::number, "1.15", "upper end of the accepted bracket rate"},
           {"factor_tol", PT::number, "1e-6", "allowed error of the measured commutator factor"},
           {"factor_rate", PT::number, "2", "expected rate of the factor gap"},
           {"factor_rate_tol", PT::number, "0.1", "allowed deviation from factor_rate"}});
      break;
    case ExperimentKind::evolution:
      add({{"eta", PT::point, "0,1", "Fourier variable of the evolved observable"},
           {"times_over_pi", PT::number_list, "0.25,0.5,1,2", "oscillator times in units of pi"},
           {"quartic", PT::number, "0.05", "strength g of the g x^4 perturbation"},
           {"quartic_time", PT::number, "1", "time for the quartic run"},
           {"intertwine_tol", PT::number, "1e-4", "allowed oscillator intertwining defect"},
           {"period_tol", PT::number, "1e-6", "allowed deviation after a full period"},
           {"final_tol", PT::number, "0.05", "bound on the last quartic metric"}});
      break;
    case ExperimentKind::resolvent:
      specs = window_params("4", "33");
      add({{"z", PT::point, "0,1", "spectral parameter as re,im"},
           {"final_tol", PT::number, "0.05", "bound on the last metric for each potential"},
           {"moduli_lambdas", PT::number_list, "0.1,0.01,0.001,0.0001", "lambdas of the classical modulus tables"},
           {"coulomb_points", PT::integer, "40", "base points x = 2^-k, k = 1..n, on the zero-energy shell"},
           {"angular_samples", PT::integer, "16", "angles per radius in sampled moduli"}});
      break;
    case ExperimentKind::oscillation_counterexample:
      specs = window_params("1", "33");
      add({{"eta", PT::point, "1,0", "translation of the fixed Weyl operator"},
           {"lambda", PT::number, "0.5", "squared translation radius of the modulus"},
           {"angular_samples", PT::integer, "32", "angles per radius in the sampled modulus"},
           {"symbol_slack", PT::number, "0.002", "allowed excess of the symbol norm over e^{-eta^2/(4 hbar)}"},
           {"modulus_floor", PT::number, "1.9", "modulus required at small hbar"},
           {"small_hbar", PT::number, "0.0625", "hbar at and below which the modulus floor applies"}});
      break;
    case ExperimentKind::point_measure:
      add({{"etas", PT::point_list, "0,1;1,0;1,1;0,2", "Fourier variables of the characteristic table"},
           {"cos_points", PT::point_list, "0.5,0;0,1", "xi for the cosine inequality"},
           {"exact_tol", PT::number, "1e-6", "allowed |<E> - e^{-hbar xi^2/4}|"},
           {"eig_tol", PT::number, "1e-6", "allowed negativity of the cosine inequality"}, ref_tol});
      break;
    case ExperimentKind::eigenstate:
      add({{"levels", PT::number_list, "8,32,128", "oscillator levels n; hbar = lambda/(n + 1/2)"},
           {"lambda", PT::number, "1", "fixed energy hbar (n + 1/2)"},
           {"mass_floor", PT::number, "0.9", "required annulus mass"},
           {"variation_tol", PT::number, "0.02", "allowed angular variation at the last level"},
           {"radial_nodes", PT::integer, "64", "Gauss-Legendre radii across the annulus"},
           {"angular_samples", PT::integer, "64", "angles of the polar rule"},
           {"exact_tol", PT::number, "1e-6", "allowed |mass - closed form|"}});
      break;
    case ExperimentKind::wkb:
      add({{"p0", PT::number, "1", "momentum of the linear action"},
           {"amplitude", PT::name, "gaussian", "amplitude profile", {"gaussian", "bump"}},
           {"action", PT::name, "linear", "action S(y)", {"linear", "quadratic"}},
           {"kappa", PT::number, "0.5", "curvature of the quadratic action p0 y + kappa y^2/2"},
           {"etas", PT::point_list, "-1.5,-1;-1.5,0.5;-1.5,2;0.5,-1;0.5,0.5;0.5,2;1.5,-1;1.5,0.5;1.5,2",
            "test points (x^, p^)"},
           {"tol_coarse", PT::number, "0.02", "allowed table error above fine_below"},
           {"tol_fine", PT::number, "0.005", "allowed table error at and below fine_below"},
           {"fine_below", PT::number, "0.02", "hbar from which tol_fine applies"},
           {"projection_tol", PT::number, "1e-10", "target norm defect of the Fock projection"}});
      break;
    case ExperimentKind::interference:
      add({{"a", PT::point, "-1,0", "first coherent point"},
           {"b", PT::point, "1,0", "second coherent point"},
           {"bump_width", PT::number, "1", "variance of the Gaussian bump exp(-|xi - m|^2/(2 s)) at the midpoint m"},
           {"quad_window", PT::number, "4", "half-width of the quadrature window for j_{hbar 0}(bump)"},
           {"spacing_ratio", PT::number, "0.4", "grid spacing in units of sqrt(hbar)"},
           {"etas", PT::point_list, "0,1;1,0;1,1;0,2;2,0", "Fourier variables of the characteristic table"},
           {"slope_tol", PT::number, "0.2", "relative tolerance on the log-linear slope"},
           {"mixture_tol", PT::number, "0.02", "bound on the mixture gap at the last hbar"}});
      break;
    case ExperimentKind::basic_sequence:
      specs = window_params("1", "33");
      add({{"hbar_prime", PT::number, "0.5", "fixed hbar' of the source operator"},
           {"eta", PT::point, "1,0", "Fourier variable of X = E_hbar'(eta)"},
           {"spacing_ratio", PT::number, "0.6", "quadrature spacing in units of sqrt(hbar)"}, ref_tol});
      break;
    case ExperimentKind::wigner_state:
      add({{"mixture", PT::weighted_points, "0.5:-1,0;0.5:1,0", "Gaussian centres weight:x,p"},
           {"variance", PT::number, "0.5", "variance of each Gaussian (>= hbar/2 keeps the state positive)"},
           {"disc_radius", PT::number, "1", "radius of the disc indicator density"},
           {"etas", PT::point_list, "0,1;1,0;1,1;0,2", "Fourier variables for omega(A)"},
           {"eig_tol", PT::number, "1e-8", "allowed negativity of the smooth state"},
           {"min_eig_floor", PT::number, "-0.01", "disc diagnostic: min eigenvalue below this counts as divergence"},
           {"growth", PT::number, "2", "disc diagnostic: trace-norm growth factor counting as divergence"}, ref_tol});
      break;
  }
  return specs;
}

std::vector<double> default_schedule(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::wkb:
      return {0.1, 0.05, 0.02};
    case ExperimentKind::wigner_state:
      return HbarSchedule::geometric(1.0, 6).values();
    default:
      return HbarSchedule::geometric(1.0, 7).values();
  }
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Real number, or a fraction a/b.
double parse_number(const std::string& text) {
  const auto slash = text.find('/');
  if (slash != std::string::npos) return parse_number(text.substr(0, slash)) / parse_number(text.substr(slash + 1));
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) throw ConfigError("not a finite number: '" + text + "'");
  return v;
}

Point parse_point(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw ConfigError("expected a phase point x,p, got '" + text + "'");
  return {parse_number(parts[0]), parse_number(parts[1])};
}

}  // namespace

const std::vector<ExperimentKind>& all_kinds() {
  static const std::vector<ExperimentKind> kinds = [] {
    std::vector<ExperimentKind> v;
    for (const auto& i : kKinds) v.push_back(i.kind);
    return v;
  }();
  return kinds;
}

std::string to_string(ExperimentKind kind) { return info(kind).name; }

std::optional<ExperimentKind> parse_kind(std::string_view name) {
  for (const auto& i : kKinds)
    if (name == i.name) return i.kind;
  return std::nullopt;
}

std::string kind_list() {
  std::string out;
  for (const auto& i : kKinds) out += (out.empty() ? "" : ", ") + std::string(i.name);
  return out;
}

const std::vector<ParamSpec>& parameter_specs(ExperimentKind kind) {
  static const std::vector<std::vector<ParamSpec>> table = [] {
    std::vector<std::vector<ParamSpec>> t;
    for (const auto& i : kKinds) t.push_back(build_specs(i.kind));
    return t;
  }();
  for (std::size_t i = 0; i < std::size(kKinds); ++i)
    if (kKinds[i].kind == kind) return table[i];
  throw std::logic_error("unknown experiment kind");
}

std::string summary(ExperimentKind kind) { return info(kind).summary; }

std::string describe(ExperimentKind kind) {
  std::ostringstream os;
  os << info(kind).name << ": " << info(kind).summary << "\n";
  os << "default hbar schedule:";
  const ExperimentConfig cfg(kind);
  for (double h : cfg.schedule().values()) os << " " << h;
  os << "\nparameters:\n";
  for (const auto& p : parameter_specs(kind)) {
    os << "  " << p.key << " = " << p.default_value << "  (" << p.help;
    if (!p.choices.empty()) {
      os << "; one of";
      for (const auto& c : p.choices) os << " " << c;
    }
    os << ")\n";
  }
  return os.str();
}

HbarSchedule::HbarSchedule(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ConfigError("hbar schedule is empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] > 0) || !std::isfinite(values_[i])) throw ConfigError("hbar schedule values must be positive and finite");
    if (i > 0 && !(values_[i] < values_[i - 1])) throw ConfigError("hbar schedule must be strictly decreasing");
  }
}

HbarSchedule HbarSchedule::geometric(double first, int count) {
  if (count < 1) throw ConfigError("geometric schedule needs at least one value");
  std::vector<double> v;
  for (int i = 0; i < count; ++i) v.push_back(std::ldexp(first, -i));
  return HbarSchedule(std::move(v));
}

HbarSchedule HbarSchedule::parse(std::string_view text) {
  std::vector<double> v;
  for (const auto& tok : split(text, ',')) {
    if (tok.empty()) throw ConfigError("malformed hbar schedule '" + std::string(text) + "': empty entry");
    try {
      v.push_back(parse_number(tok));
    } catch (const ConfigError& e) {
      throw ConfigError("malformed hbar schedule '" + std::string(text) + "': " + e.what());
    }
  }
  return HbarSchedule(std::move(v));
}

ExperimentConfig::ExperimentConfig(ExperimentKind kind) : kind_(kind), schedule_(default_schedule(kind)) {
  for (const auto& p : parameter_specs(kind)) params_[p.key] = p.default_value;
  if (kind_ == ExperimentKind::eigenstate) set("levels", params_["levels"]);
}

void ExperimentConfig::set_schedule(HbarSchedule s) {
  if (kind_ == ExperimentKind::eigenstate)
    throw ConfigError("eigenstate derives its hbar schedule from 'levels' and 'lambda'; set those instead");
  schedule_ = std::move(s);
}

const ParamSpec& ExperimentConfig::spec(const std::string& key) const {
  for (const auto& p : parameter_specs(kind_))
    if (p.key == key) return p;
  throw ConfigError("unknown parameter '" + key + "' for " + to_string(kind_) + "; valid keys: " + valid_keys());
}

std::string ExperimentConfig::valid_keys() const {
  std::string out;
  for (const auto& p : parameter_specs(kind_)) out += (out.empty() ? "" : ", ") + p.key;
  return out;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const auto& p = spec(key);
  const std::string value = trim(raw);
  auto fail = [&](const std::string& why) { throw ConfigError("parameter " + key + "='" + value + "': " + why); };
  try {
    switch (p.type) {
      case PT::number:
        parse_number(value);
        break;
      case PT::integer: {
        const double v = parse_number(value);
        if (v != std::floor(v)) fail("expected an integer");
        break;
      }
      case PT::point:
        parse_point(value);
        break;
      case PT::point_list:
        for (const auto& tok : split(value, ';')) parse_point(tok);
        break;
      case PT::number_list:
        for (const auto& tok : split(value, ',')) parse_number(tok);
        break;
      case PT::weighted_points:
        for (const auto& tok : split(value, ';')) {
          const auto parts = split(tok, ':');
          if (parts.size() != 2) fail("expected weight:x,p entries");
          parse_number(parts[0]);
          parse_point(parts[1]);
        }
        break;
      case PT::name:
        if (std::find(p.choices.begin(), p.choices.end(), value) == p.choices.end()) {
          std::string c;
          for (const auto& s : p.choices) c += (c.empty() ? "" : ", ") + s;
          fail("expected one of " + c);
        }
        break;
    }
  } catch (const ConfigError& e) {
    if (std::string(e.what()).rfind("parameter ", 0) == 0) throw;
    fail(e.what());
  }
  if (key == "resolution") {
    const double r = parse_number(value);
    if (r < 33 || std::fmod(r, 2.0) == 0) fail("resolution must be odd and at least 33");
  }
  if (key == "window" && !(parse_number(value) > 0)) fail("window must be positive");
  if (key == "dim") {
    const double d = parse_number(value);
    if (d < 0 || d > double(max_dim) || (d > 0 && d < 2)) fail("dim must be 0 (policy) or in [2, " + std::to_string(max_dim) + "]");
  }
  std::string previous = params_[key];
  params_[key] = value;
  if (kind_ == ExperimentKind::eigenstate && (key == "levels" || key == "lambda")) {
    try {
      const double lambda = number("lambda");
      if (!(lambda > 0)) throw ConfigError("lambda must be positive");
      std::vector<double> hs;
      for (double n : numbers("levels")) {
        if (n < 0 || n != std::floor(n)) throw ConfigError("levels must be nonnegative integers");
        hs.push_back(lambda / (n + 0.5));
      }
      schedule_ = HbarSchedule(std::move(hs));
    } catch (const ConfigError& e) {
      params_[key] = previous;
      fail(std::string(e.what()) + " (levels must increase)");
    }
  }
}

double ExperimentConfig::number(const std::string& key) const { return parse_number(params_.at(spec(key).key)); }
long ExperimentConfig::integer(const std::string& key) const { return std::lround(number(key)); }
Point ExperimentConfig::point(const std::string& key) const { return parse_point(params_.at(spec(key).key)); }

std::vector<Point> ExperimentConfig::points(const std::string& key) const {
  std::vector<Point> out;
  for (const auto& tok : split(params_.at(spec(key).key), ';')) out.push_back(parse_point(tok));
  return out;
}

std::vector<double> ExperimentConfig::numbers(const std::string& key) const {
  std::vector<double> out;
  for (const auto& tok : split(params_.at(spec(key).key), ',')) out.push_back(parse_number(tok));
  return out;
}

std::vector<std::pair<double, Point>> ExperimentConfig::weighted_points(const std::string& key) const {
  std::vector<std::pair<double, Point>> out;
  for (const auto& tok : split(params_.at(spec(key).key), ';')) {
    const auto parts = split(tok, ':');
    out.emplace_back(parse_number(parts[0]), parse_point(parts[1]));
  }
  return out;
}

std::string ExperimentConfig::text(const std::string& key) const { return params_.at(spec(key).key); }

double ExperimentConfig::angle_offset() const {
  if (seed_ == 0) return 0;
  std::mt19937_64 rng(seed_);
  return std::uniform_real_distribution<double>(0, 2 * std::numbers::pi)(rng);
}

double fit_rate(const std::vector<double>& hbars, const std::vector<double>& values) {
  if (hbars.size() != values.size()) throw std::invalid_argument("fit_rate: size mismatch");
  if (hbars.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 rows, got " + std::to_string(hbars.size()));
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < hbars.size(); ++i) {
    if (!(hbars[i] > 0) || !(values[i] > 0)) throw std::invalid_argument("fit_rate: hbar and metric must be positive");
    xs.push_back(std::log(hbars[i]));
    ys.push_back(std::log(values[i]));
  }
  return numerics::least_squares_slope(xs, ys);
}

double fit_rate(const std::vector<ReportRow>& rows) {
  std::vector<double> hs, vs;
  for (const auto& r : rows) {
    hs.push_back(r.hbar);
    vs.push_back(r.value);
  }
  return fit_rate(hs, vs);
}

std::vector<ReportRow> metric_rows(const ConvergenceReport& report, const std::string& metric) {
  std::vector<ReportRow> out;
  for (const auto& r : report.rows)
    if (r.metric == metric) out.push_back(r);
  return out;
}

Index coherent_dim(double hbar, double radius) {
  const double n = radius * radius / (2 * hbar);
  return std::max<Index>(Index(std::ceil(n + 8 * std::sqrt(n) + 30)), 8);
}

namespace {

experiments::Driver driver_for(ExperimentKind k) {
  using namespace experiments;
  switch (k) {
    case ExperimentKind::position_momentum:
      return experiments::position_momentum();
    case ExperimentKind::weyl_limit:
      return experiments::weyl_limit();
    case ExperimentKind::fourier_measure:
      return experiments::fourier_measure();
    case ExperimentKind::product:
      return experiments::product();
    case ExperimentKind::bracket:
      return experiments::bracket();
    case ExperimentKind::evolution:
      return experiments::evolution();
    case ExperimentKind::resolvent:
      return experiments::resolvent();
    case ExperimentKind::oscillation_counterexample:
      return experiments::oscillation_counterexample();
    case ExperimentKind::point_measure:
      return experiments::point_measure();
    case ExperimentKind::eigenstate:
      return experiments::eigenstate();
    case ExperimentKind::wkb:
      return experiments::wkb();
    case ExperimentKind::interference:
      return experiments::interference();
    case ExperimentKind::basic_sequence:
      return experiments::basic_sequence();
    case ExperimentKind::wigner_state:
      return experiments::wigner_state();
  }
  throw std::logic_error("unknown experiment kind");
}

}  // namespace

ConvergenceReport run_experiment(const ExperimentConfig& config) {
  const auto driver = driver_for(config.kind());
  const auto& hs = config.schedule().values();
  std::vector<std::vector<ReportRow>> per(hs.size());
  parallel_for(hs.size(), [&](std::size_t i) { per[i] = driver.rows(config, hs[i]); });

  ConvergenceReport report{config.kind(), config, {}, driver.primary, std::nullopt, {}, {}};
  for (auto& rows : per) report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  if (driver.classical) {
    auto extra = driver.classical(config);
    report.rows.insert(report.rows.end(), extra.begin(), extra.end());
  }
  for (auto& r : report.rows)
    r.rate_flag = r.hbar > 0 && std::isfinite(r.value) && r.value > 0 && r.defect < 0.1 * r.value;

  for (const auto& m : driver.rate_metrics) {
    std::vector<ReportRow> usable;
    for (const auto& r : report.rows)
      if (r.metric == m && r.rate_flag) usable.push_back(r);
    if (usable.size() >= 3) report.rates[m] = fit_rate(usable);
  }
  if (auto it = report.rates.find(driver.primary); it != report.rates.end()) report.rate = it->second;

  report.verdict.negative = driver.negative;
  driver.judge(report);
  report.verdict.pass = !report.verdict.checks.empty() &&
                        std::all_of(report.verdict.checks.begin(), report.verdict.checks.end(), [](const Check& c) { return c.pass; });
  return report;
}

namespace experiments {

Window<double> metric_window(const ExperimentConfig& cfg) { return Window<double>(cfg.number("window"), cfg.integer("resolution")); }

double corner_radius(const Window<double>& w) { return w.half_width() * std::numbers::sqrt2; }

Index dimension(const ExperimentConfig& cfg, double hbar, double radius) {
  if (const long d = cfg.integer("dim"); d > 0) return Index(d);
  const Index d = coherent_dim(hbar, radius);
  if (d > max_dim)
    throw DimensionError(to_string(cfg.kind()) + ": dimension policy needs " + std::to_string(d) + " levels at hbar=" + fmt(hbar) +
                         " (limit " + std::to_string(max_dim) + "); shrink the window or raise hbar");
  return d;
}

std::vector<Point> nodes_of(const Window<double>& w) {
  std::vector<Point> out;
  out.reserve(std::size_t(w.size()));
  for (Index k = 0; k < w.size(); ++k) out.push_back(w.node(k));
  return out;
}

double sup_gap(const MatrixC<double>& a, const MatrixC<double>& b) { return (a - b).cwiseAbs().maxCoeff(); }

Index odd_at_least(double n) {
  Index r = std::max<Index>(33, Index(std::ceil(n)));
  return r % 2 ? r : r + 1;
}

ReportRow row(double hbar, Index dim, std::string metric, double value, std::optional<double> reference, double defect) {
  ReportRow r;
  r.hbar = hbar;
  r.dim = dim;
  r.metric = std::move(metric);
  r.value = value;
  r.reference = reference;
  r.defect = defect;
  return r;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void add_check(ConvergenceReport& r, std::string name, bool pass, std::string detail) {
  r.verdict.checks.push_back({std::move(name), pass, std::move(detail)});
}

namespace {

std::vector<ReportRow> rows_of(const ConvergenceReport& r, const std::string& metric, bool flagged_only) {
  std::vector<ReportRow> out;
  for (const auto& row : r.rows)
    if (row.metric == metric && (!flagged_only || row.rate_flag || row.defect <= 1e-12)) out.push_back(row);
  return out;
}

}  // namespace

void check_nonincreasing(ConvergenceReport& r, const std::string& metric) {
  const auto rows = rows_of(r, metric, true);
  bool ok = !rows.empty();
  std::string detail = rows.empty() ? "no usable rows" : "nonincreasing over " + std::to_string(rows.size()) + " rows";
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].value > rows[i - 1].value * (1 + 1e-9) + 1e-15) {
      ok = false;
      detail = "increases from " + fmt(rows[i - 1].value) + " at hbar=" + fmt(rows[i - 1].hbar) + " to " + fmt(rows[i].value) +
               " at hbar=" + fmt(rows[i].hbar);
      break;
    }
  add_check(r, metric + " nonincreasing", ok, detail);
}

void check_increasing(ConvergenceReport& r, const std::string& metric) {
  const auto rows = rows_of(r, metric, false);
  bool ok = !rows.empty();
  std::string detail = "increasing over " + std::to_string(rows.size()) + " rows";
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (!(rows[i].value > rows[i - 1].value)) {
      ok = false;
      detail = "does not increase from " + fmt(rows[i - 1].value) + " to " + fmt(rows[i].value);
      break;
    }
  add_check(r, metric + " increasing", ok, detail);
}

void check_reference(ConvergenceReport& r, const std::string& metric, double tol) {
  double worst = 0;
  bool ok = true;
  std::size_t n = 0;
  for (const auto& row : r.rows) {
    if (row.metric != metric || !row.reference) continue;
    ++n;
    const double err = std::abs(row.value - *row.reference);
    worst = std::max(worst, err);
    if (!(err <= std::max(tol, 5 * row.defect))) ok = false;
  }
  add_check(r, metric + " matches closed form", ok && n > 0, "max |value - reference| = " + fmt(worst) + " (tol " + fmt(tol) + ")");
}

void check_bound(ConvergenceReport& r, const std::string& metric, double bound, bool at_least, double hbar_max) {
  bool ok = true;
  std::size_t n = 0;
  double extreme = at_least ? 1e300 : -1e300;
  for (const auto& row : r.rows) {
    if (row.metric != metric || row.hbar > hbar_max) continue;
    ++n;
    extreme = at_least ? std::min(extreme, row.value) : std::max(extreme, row.value);
    if (at_least ? !(row.value >= bound) : !(row.value <= bound)) ok = false;
  }
  add_check(r, metric + (at_least ? " >= " : " <= ") + fmt(bound), ok && n > 0,
            (at_least ? "min " : "max ") + fmt(extreme) + " over " + std::to_string(n) + " rows");
}

void check_last(ConvergenceReport& r, const std::string& metric, double bound) {
  const auto rows = rows_of(r, metric, false);
  const bool ok = !rows.empty() && rows.back().value <= bound;
  add_check(r, metric + " final <= " + fmt(bound), ok,
            rows.empty() ? "no rows" : "final " + fmt(rows.back().value) + " at hbar=" + fmt(rows.back().hbar));
}

void check_rate(ConvergenceReport& r, const std::string& metric, double lo, double hi) {
  const auto it = r.rates.find(metric);
  const bool ok = it != r.rates.end() && it->second >= lo && it->second <= hi;
  add_check(r, metric + " rate in [" + fmt(lo) + ", " + fmt(hi) + "]", ok,
            it == r.rates.end() ? "fewer than 3 usable rows" : "fitted rate " + fmt(it->second));
}

}  // namespace experiments

}  // namespace qlimit
