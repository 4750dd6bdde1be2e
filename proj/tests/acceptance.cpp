// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "scenarios.hpp"
#include "vasotrans/analysis.hpp"
#include "vasotrans/experiments.hpp"

using namespace vasotrans;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

bool decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

std::string list(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(4);
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  os << ']';
  return os.str();
}

bool all_within(const std::vector<double>& v, double lo, double hi) {
  for (double x : v) {
    if (!(x >= lo && x <= hi)) return false;
  }
  return true;
}

std::vector<double> rates(const std::vector<double>& R, const std::vector<double>& E) {
  std::vector<double> r;
  for (std::size_t i = 0; i + 1 < R.size(); ++i) r.push_back(std::log(E[i] / E[i + 1]) / std::log(R[i] / R[i + 1]));
  return r;
}

// Example 1: E_v and E_s decrease with R, E_s rate in [1.2, 2.4], within 10 minutes.
Verdict criterion1() {
  const auto t0 = Clock::now();
  auto p = example1_params(resolve_config(default_config("example1")));
  p.radii = {0.1, 0.05, 0.025};
  std::vector<double> Ev, Es;
  for (double R : p.radii) {
    const auto run = run_example1_radius(p, R);
    Ev.push_back(run.errors.E_v);
    Es.push_back(run.errors.E_s);
  }
  const double secs = seconds_since(t0);
  const auto r = rates(p.radii, Es);
  Verdict v;
  v.pass = decreasing(Ev) && decreasing(Es) && all_within(r, 1.2, 2.4) && secs <= 600.0;
  v.detail = "E_v=" + list(Ev) + " E_s=" + list(Es) + " rate_Es=" + list(r) + " t=" + std::to_string(secs) + "s";
  return v;
}

// Example 2: E_v2, E_p, E_s decrease with R1, E_s rate in [0.7, 2.6], within 15 minutes.
Verdict criterion2() {
  const auto t0 = Clock::now();
  auto p = example2_params(resolve_config(default_config("example2")));
  p.radii = {0.1, 0.05, 0.025};
  std::vector<double> Ev, Ep, Es;
  for (double R1 : p.radii) {
    const auto run = run_example2_radius(p, R1);
    Ev.push_back(run.errors.E_v);
    Ep.push_back(run.errors.E_p.value_or(NAN));
    Es.push_back(run.errors.E_s);
  }
  const double secs = seconds_since(t0);
  const auto r = rates(p.radii, Es);
  Verdict v;
  v.pass = decreasing(Ev) && decreasing(Ep) && decreasing(Es) && all_within(r, 0.7, 2.6) && secs <= 900.0;
  v.detail = "E_v2=" + list(Ev) + " E_p=" + list(Ep) + " E_s=" + list(Es) + " rate_Es=" + list(r) +
             " t=" + std::to_string(secs) + "s";
  return v;
}

SweepControls controls_of(const Json& c, ConstantKind kind) {
  SweepControls sc;
  const Json& m = c.at("mesh");
  sc.n_azimuthal = m.at("n_azimuthal").get<int>();
  sc.max_levels = m.at("max_levels").get<int>();
  sc.tolerance = m.at("tolerance").get<double>();
  if (kind == ConstantKind::Poincare) {
    sc.n_radial = m.at("n_radial").get<int>();
  } else {
    sc.n_layers = m.at("n_layers").get<int>();
    sc.outer = c.at("geometry").at("outer").get<double>();
    sc.height = c.at("geometry").at("height").get<double>();
  }
  return sc;
}

// Poincare: disk K_p within 2% of 1/(2 j'_11), R^2 > 0.999, annulus K_p spread < 3x, within 2 minutes.
Verdict criterion3() {
  const auto t0 = Clock::now();
  const Json c = resolve_config(default_config("poincare"));
  const auto sc = controls_of(c, ConstantKind::Poincare);
  std::vector<std::pair<double, double>> disk, annulus;
  for (double R : c.at("geometry").at("disk_radii").get<std::vector<double>>()) disk.emplace_back(0.0, R);
  const double R2 = c.at("geometry").at("R2").get<double>();
  for (double q : c.at("geometry").at("ratios").get<std::vector<double>>()) annulus.emplace_back(q * R2, R2);
  const auto d = run_constant_sweep(ConstantKind::Poincare, disk, sc);
  const auto a = run_constant_sweep(ConstantKind::Poincare, annulus, sc);
  const double secs = seconds_since(t0);
  const double exact = 1.0 / (2.0 * 1.8411837813);
  double worst = 0.0, lo = 1e300, hi = 0.0;
  std::vector<double> kd, ka;
  for (const auto& e : d.entries) {
    worst = std::max(worst, std::abs(e.constant - exact) / exact);
    kd.push_back(e.constant);
  }
  for (const auto& e : a.entries) {
    lo = std::min(lo, e.constant);
    hi = std::max(hi, e.constant);
    ka.push_back(e.constant);
  }
  const double r2 = d.linear ? d.linear->r_squared : 0.0;
  Verdict v;
  v.pass = worst < 0.02 && r2 > 0.999 && hi / lo < 3.0 && secs <= 120.0;
  v.detail = "disk Kp=" + list(kd) + " max_rel_dev=" + std::to_string(worst) + " R2=" + std::to_string(r2) +
             " annulus Kp=" + list(ka) + " spread=" + std::to_string(hi / lo) + " t=" + std::to_string(secs) + "s";
  return v;
}

// Stekloff: lambda^{-1/2} decreasing over R1 = 0.2 .. 0.025, trace-law residual < 10%, within 5 minutes.
Verdict criterion4() {
  const auto t0 = Clock::now();
  const Json c = resolve_config(default_config("stekloff"));
  const auto sc = controls_of(c, ConstantKind::Stekloff);
  std::vector<std::pair<double, double>> schedule;
  for (double R : {0.2, 0.1, 0.05, 0.025}) schedule.emplace_back(R, sc.outer);
  const auto r = run_constant_sweep(ConstantKind::Stekloff, schedule, sc);
  const double secs = seconds_since(t0);
  std::vector<double> y;
  for (const auto& e : r.entries) y.push_back(e.constant);
  const double res = r.trace ? r.trace->relative_residual : 1.0;
  Verdict v;
  v.pass = decreasing(y) && res < 0.10 && secs <= 300.0;
  v.detail = "lambda^-1/2=" + list(y) + " C=" + std::to_string(r.trace ? r.trace->C : 0.0) +
             " rel_residual=" + std::to_string(res) + " t=" + std::to_string(secs) + "s";
  return v;
}

// Closed systems: per-step relative drift of total solute <= 1e-8.
Verdict criterion5() {
  const double a = scenario::drift_3d3d(16, 8);
  const double b = scenario::drift_3d1d_pulsating(6);
  const double c = scenario::drift_3d1d1d(6);
  Verdict v;
  v.pass = a <= 1e-8 && b <= 1e-8 && c <= 1e-8;
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << "3D-3D=" << a << " 3D-1D(pulsating)=" << b << " 3D-1D-1D=" << c;
  v.detail = os.str();
  return v;
}

// Oracles: Y-graph vs finite volumes 1e-6, element matrices 1e-14, coupling blocks 1e-8.
Verdict criterion6() {
  const double y = scenario::ygraph_difference(1000);
  const double e = scenario::element_matrix_error();
  const auto c = scenario::coupling_check(5);
  const double cw = std::max({c.facet_constant, c.facet_function, c.perimeter_operator, c.pi_m_pi, c.other_blocks});
  Verdict v;
  v.pass = y <= 1e-6 && e <= 1e-14 && cw <= 1e-8;
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << "ygraph=" << y << " element=" << e << " coupling=" << cw;
  v.detail = os.str();
  return v;
}

// Manufactured solution: spatial rate >= 1.8, temporal rate >= 0.9.
Verdict criterion7() {
  const auto sp = spatial_convergence({5, 10, 20, 40}, 0.1, 1.0);
  const auto tm = temporal_convergence(6, 0.4, {0.1, 0.05, 0.025, 0.0125}, 16);
  std::vector<double> h, es, tau, et;
  for (const auto& p : sp) {
    h.push_back(p.h);
    es.push_back(p.error);
  }
  for (const auto& p : tm) {
    tau.push_back(p.tau);
    et.push_back(p.error);
  }
  const auto rs = observed_rates(h, es);
  const auto rt = observed_rates(tau, et);
  Verdict v;
  v.pass = *std::min_element(rs.begin(), rs.end()) >= 1.8 && *std::min_element(rt.begin(), rt.end()) >= 0.9;
  v.detail = "space rates=" + list(rs) + " time rates=" + list(rt);
  return v;
}

// xi = 0 reproduces the standalone sub-models to 1e-10.
Verdict criterion8() {
  const double a = scenario::decoupled_3d1d(6);
  const double b = scenario::decoupled_3d1d1d(6);
  Verdict v;
  v.pass = a <= 1e-10 && b <= 1e-10;
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << "3D-1D=" << a << " 3D-1D-1D(xi_v=0)=" << b;
  v.detail = os.str();
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"1 example1 model error", criterion1}, {"2 example2 model error", criterion2},
      {"3 poincare constant", criterion3},    {"4 stekloff constant", criterion4},
      {"5 mass conservation", criterion5},    {"6 oracles", criterion6},
      {"7 manufactured rates", criterion7},   {"8 decoupled limits", criterion8},
  };
  // Optional argument: run only the criteria whose number is listed, e.g. "3,4".
  std::string only = argc > 1 ? argv[1] : "";
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && only.find(name.substr(0, 1)) == std::string::npos) continue;
    Verdict v;
    const auto t0 = Clock::now();
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
