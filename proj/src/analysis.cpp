#include "vasotrans/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "vasotrans/fem.hpp"

namespace vasotrans {

std::string to_string(ConstantKind k) { return k == ConstantKind::Poincare ? "poincare" : "stekloff"; }

SectionMesh poincare_section(double R1, double R2, int n_radial, int n_azimuthal) {
  if (R1 < 0.0 || !(R2 > R1)) throw AnalysisError("invalid annulus");
  SectionLayout layout;
  layout.n_azimuthal = n_azimuthal;
  layout.outer = OuterShape::Disk;
  if (R1 == 0.0) {
    layout.bands.push_back({R2, n_radial, Region::Vessel, RadialSpacing::Uniform});
    return build_section(layout);
  }
  layout.r_hole = R1;
  layout.hole_marker = FacetMarker::InnerWall;
  if (R1 / R2 < 0.5) {
    const int rings = std::max(n_radial, isotropic_ring_count(R1, R2, n_azimuthal));
    layout.bands.push_back({R2, rings, Region::Pvs, RadialSpacing::Geometric});
  } else {
    layout.bands.push_back({R2, n_radial, Region::Pvs, RadialSpacing::Uniform});
  }
  return build_section(layout);
}

PoincareResult poincare_constant(const SectionMesh& section, double R2, const EigenOptions& opt) {
  const SparseMatrix K = assemble_stiffness_2d(section);
  const SparseMatrix M = assemble_mass_2d(section);
  const Vector ones(section.vertices.size(), 1.0);
  const auto eig = smallest_nonzero_gevp(K, M, ones, opt);
  if (!(eig.lambda > 0.0)) throw AnalysisError("nonpositive Poincare eigenvalue");
  PoincareResult r;
  r.lambda1 = eig.lambda;
  r.eps = 2.0 * R2;
  r.Kp = 1.0 / (std::sqrt(eig.lambda) * r.eps);
  r.vector = eig.vector;
  return r;
}

TetMesh stekloff_mesh(double R1, double outer, double height, int n_azimuthal, int n_layers) {
  if (!(R1 > 0.0) || !(outer > R1)) throw AnalysisError("invalid annulus");
  SectionLayout layout;
  layout.n_azimuthal = n_azimuthal;
  layout.r_hole = R1;
  layout.hole_marker = FacetMarker::InnerWall;
  layout.bands.push_back({outer, isotropic_ring_count(R1, outer, n_azimuthal), Region::Surroundings,
                          RadialSpacing::Geometric});
  return extrude(build_section(layout), height, n_layers, ExtrusionAxis::along_z());
}

StekloffResult stekloff_constant(const TetMesh& mesh, FacetMarker gamma, const EigenOptions& opt) {
  if (!mesh.has_marker(gamma)) throw AnalysisError("empty Gamma marker " + to_string(gamma));
  const SparseMatrix A = add(assemble_stiffness(mesh, {}, TensorField(1.0), 0.0),
                             assemble_mass(mesh, {}, ScalarField(1.0), 0.0));
  const SparseMatrix B = assemble_facet_mass(mesh, gamma, ScalarField(1.0), 0.0);
  const auto eig = largest_mu_inverse(A, B, opt);
  StekloffResult r;
  r.lambda1 = eig.lambda;
  r.trace_bound = 1.0 / std::sqrt(eig.lambda);
  r.boundary_norm = std::sqrt(dot(eig.vector, B * eig.vector));
  r.vector = eig.vector;
  return r;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw AnalysisError("linear fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ss_res += r * r;
  }
  f.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

TraceLawFit trace_law_fit(const std::vector<double>& eps, const std::vector<double>& y) {
  const std::size_t n = eps.size();
  if (n < 1 || y.size() != n) throw AnalysisError("trace-law fit needs data");
  std::vector<double> g(n);
  double logC = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(eps[i] > 0.0 && eps[i] < 1.0)) throw AnalysisError("trace-law fit needs 0 < eps < 1");
    g[i] = std::sqrt(eps[i] * std::abs(std::log(eps[i])));
    logC += std::log(y[i]) - std::log(g[i]);
  }
  TraceLawFit f;
  f.C = std::exp(logC / n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (f.C * g[i] - y[i]) * (f.C * g[i] - y[i]);
    den += y[i] * y[i];
  }
  f.relative_residual = std::sqrt(num / den);
  return f;
}

ConstantSweepResult run_constant_sweep(ConstantKind kind, const std::vector<std::pair<double, double>>& schedule,
                                       const SweepControls& controls) {
  if (schedule.empty()) throw AnalysisError("empty radius schedule");
  const double tol = controls.tolerance > 0.0 ? controls.tolerance : (kind == ConstantKind::Poincare ? 1e-3 : 5e-2);
  ConstantSweepResult res;
  res.kind = kind;
  for (const auto& [R1, R2] : schedule) {
    ConstantEntry e;
    e.R1 = R1;
    e.R2 = kind == ConstantKind::Poincare ? R2 : controls.outer;
    e.eps = kind == ConstantKind::Poincare ? 2.0 * R2 : 2.0 * R1;
    double prev = 0.0;
    for (int level = 0; level <= controls.max_levels; ++level) {
      const int scale = 1 << level;
      double lambda = 0.0;
      if (kind == ConstantKind::Poincare) {
        const auto sec = poincare_section(R1, R2, controls.n_radial * scale, controls.n_azimuthal * scale);
        lambda = poincare_constant(sec, R2).lambda1;
      } else {
        const auto mesh =
            stekloff_mesh(R1, controls.outer, controls.height, controls.n_azimuthal * scale, controls.n_layers * scale);
        lambda = stekloff_constant(mesh).lambda1;
      }
      e.lambda1 = lambda;
      e.level = level;
      if (level > 0 && std::abs(lambda - prev) <= tol * std::abs(lambda)) {
        e.converged = true;
        break;
      }
      prev = lambda;
    }
    const double inv = 1.0 / std::sqrt(e.lambda1);
    e.constant = kind == ConstantKind::Poincare ? inv / e.eps : inv;
    res.partial = res.partial || !e.converged;
    res.entries.push_back(e);
  }
  if (res.entries.size() >= 2) {
    if (kind == ConstantKind::Poincare) {
      std::vector<double> x, y;
      for (const auto& e : res.entries) {
        x.push_back(e.eps);
        y.push_back(1.0 / std::sqrt(e.lambda1));
      }
      // A sweep at fixed eps (annuli with one R2) has no slope to fit.
      if (std::any_of(x.begin(), x.end(), [&](double v) { return v != x.front(); })) res.linear = linear_fit(x, y);
    } else {
      // The three smallest radii.
      std::vector<ConstantEntry> sorted = res.entries;
      std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.eps < b.eps; });
      sorted.resize(std::min<std::size_t>(3, sorted.size()));
      std::vector<double> x, y;
      for (const auto& e : sorted) {
        x.push_back(e.eps);
        y.push_back(e.constant);
      }
      res.trace = trace_law_fit(x, y);
    }
  }
  return res;
}

std::string sweep_csv(const ConstantSweepResult& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "R1,R2,eps,lambda1,constant\n";
  for (const auto& e : r.entries) os << e.R1 << ',' << e.R2 << ',' << e.eps << ',' << e.lambda1 << ',' << e.constant << '\n';
  os << "# kind=" << to_string(r.kind);
  if (r.linear) os << " slope=" << r.linear->slope << " intercept=" << r.linear->intercept << " r2=" << r.linear->r_squared;
  if (r.trace) os << " C=" << r.trace->C << " relative_residual=" << r.trace->relative_residual;
  if (!r.linear && !r.trace) os << " fit=skipped";
  os << " partial=" << (r.partial ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace vasotrans
