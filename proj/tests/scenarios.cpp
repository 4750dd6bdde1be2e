#include "scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "vasotrans/coupling.hpp"
#include "vasotrans/fem.hpp"
#include "vasotrans/models.hpp"

using namespace vasotrans;

namespace scenario {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kAlwaysDirect = std::size_t(1) << 40;

LineCoefficient constant_line(double v) {
  return [v](int, double, double) { return v; };
}

LineMesh axis_line(double h) {
  return build_line_mesh(CenterlineGraph::single(Curve::straight({0.5, 0.5, 0.0}, {0.5, 0.5, 1.0})), h);
}

double max_rel_diff(const Vector& a, const Vector& b) {
  double d = 0.0, s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a[i] - b[i]));
    s = std::max(s, std::abs(b[i]));
  }
  return d / std::max(s, 1e-300);
}

double rel_fro(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

// Largest per-step change of a total relative to its first value.
double step_drift(const std::vector<double>& total) {
  double worst = 0.0;
  for (std::size_t k = 1; k < total.size(); ++k) {
    worst = std::max(worst, std::abs(total[k] - total[k - 1]) / std::abs(total.front()));
  }
  return worst;
}

}  // namespace

Eigen::MatrixXd dense(const SparseMatrix& A) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) M(r, A.col_idx()[k]) = A.values()[k];
  }
  return M;
}

// ---------------------------------------------------------------------------

double ygraph_difference(int n) {
  const std::vector<Vec3> ends{{1.6, 0.8, 0.0}, {1.6, -0.8, 0.0}};
  const std::vector<double> radius{0.1, 0.08, 0.06};
  const std::vector<double> velocity{1.0, 1.0, 1.0};
  const double D = 1.0, xi = 0.1, f = 1.0, exterior = 0.25, inlet = 1.0;

  std::vector<Curve> curves{Curve::straight({0, 0, 0}, {1, 0, 0}), Curve::straight({1, 0, 0}, ends[0]),
                            Curve::straight({1, 0, 0}, ends[1])};
  CenterlineGraph graph(std::move(curves), {Junction{{1, 0, 0}, {0}, {1, 2}}}, {{0, CurveEnd::Start}},
                        {{1, CurveEnd::End}, {2, CurveEnd::End}});
  const LineMesh line = build_line_mesh(graph, 1.0 / n);

  NetworkSpec spec;
  spec.line = &line;
  for (double R : radius) spec.vessel.geometry.push_back(VesselGeometry::cylinder(R, 1.0));
  spec.vessel.coef.D = D;
  spec.vessel.coef.xi = xi;
  spec.vessel.coef.axial_velocity = [velocity](int c, double, double) { return velocity[c]; };
  spec.vessel.coef.source = constant_line(f);
  spec.exterior = Vector(line.num_vertices(), exterior);
  spec.dirichlet = {{"INLET", inlet}};
  const Vector c = solve_1d_network_steady(spec);

  oracle::FvNetwork net;
  for (int k = 0; k < 3; ++k) {
    oracle::FvCurve fc;
    fc.area = kPi * radius[k] * radius[k];
    fc.perimeter = 2.0 * kPi * radius[k];
    fc.u = velocity[k];
    if (k == 0) fc.to = 0;
    else fc.from = 0;
    net.curves.push_back(fc);
  }
  net.n_junctions = 1;
  net.D = D;
  net.xi = xi;
  net.f = f;
  net.exterior = exterior;
  net.fixed = {{0, true, inlet}};
  const auto ref = oracle::solve_fv_network(net, n);

  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    const auto& verts = line.curve_vertices[k];
    if (static_cast<int>(verts.size()) != n + 1) throw std::runtime_error("unexpected line mesh resolution");
    for (int i = 0; i <= n; ++i) worst = std::max(worst, std::abs(c[verts[i]] - ref.values[k][i]));
  }
  return worst;
}

// ---------------------------------------------------------------------------

double element_matrix_error() {
  const std::array<Vec3, 4> x{Vec3{0, 0, 0}, Vec3{2, 0, 0}, Vec3{1, 3, 0}, Vec3{1, 1, 4}};
  const Mat3 D{{{2.0, 0.5, 0.0}, {0.5, 1.0, 0.25}, {0.0, 0.25, 3.0}}};
  // exact rational values
  const double Ke[4][4] = {{23.0 / 9, -16.0 / 9, -35.0 / 72, -7.0 / 24},
                           {-16.0 / 9, 17.0 / 9, 13.0 / 72, -7.0 / 24},
                           {-35.0 / 72, 13.0 / 72, 17.0 / 36, -1.0 / 6},
                           {-7.0 / 24, -7.0 / 24, -1.0 / 6, 3.0 / 4}};
  const auto M = element_mass(x);
  const auto K = element_stiffness(x, D);
  double worst = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      worst = std::max(worst, std::abs(M[i][j] - (i == j ? 2.0 / 5 : 1.0 / 5)));
      worst = std::max(worst, std::abs(K[i][j] - Ke[i][j]));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------

CouplingCheck coupling_check(int n) {
  CouplingCheck out;

  const auto section = build_section_triangulation(0.0, 0.15, {OuterShape::Disk, 0.5}, 2, 16);
  const TetMesh cyl = extrude(section, 1.0, 4, ExtrusionAxis::along_x());
  const auto lib_const = dense(assemble_facet_mass(cyl, FacetMarker::GammaS, ScalarField(2.5), 0.0));
  const auto ora_const =
      oracle::facet_mass(cyl, FacetMarker::GammaS, [](const Vec3&) { return 2.5; }, oracle::triangle_rule_degree5());
  out.facet_constant = rel_fro(lib_const, ora_const);
  auto xi = [](const Vec3& p) { return 1.0 + p.x + p.y * p.y; };
  const auto lib_fn = dense(assemble_facet_mass(
      cyl, FacetMarker::GammaS, ScalarField::function([&](const Vec3& p, double) { return xi(p); }), 0.0));
  const auto ora_fn = oracle::facet_mass(cyl, FacetMarker::GammaS, xi, oracle::triangle_rule_interior3());
  out.facet_function = rel_fro(lib_fn, ora_fn);

  const TetMesh box = build_box_mesh({0, 0, 0}, {1, 1, 1}, n, n, n);
  const LineMesh line = axis_line(1.0 / n);
  const double R = 0.15, xi_v = 1.5;
  const std::vector<VesselGeometry> geom{VesselGeometry::cylinder(R, 1.0)};
  const int n_quad = 16;
  const auto op = build_perimeter_average(box, line, geom, n_quad, 0.0);
  const auto Pi = oracle::perimeter_average(box, line, std::vector<double>(line.num_vertices(), R), n_quad);
  out.perimeter_operator = rel_fro(dense(op.matrix), Pi);

  const SparseMatrix M = assemble_line_mass(line, constant_line(xi_v * 2.0 * kPi * R), 0.0);
  const Vector w(line.num_vertices(), 1.0);
  const auto B = assemble_exchange_blocks(op.matrix, M, w);
  const auto Md = oracle::line_mass(line, {xi_v * 2.0 * kPi * R});
  out.pi_m_pi = rel_fro(dense(B.cc), Pi.transpose() * Md * Pi);
  out.other_blocks = std::max({rel_fro(dense(B.c_chat), -Pi.transpose() * Md), rel_fro(dense(B.chat_c), -Md * Pi),
                               rel_fro(dense(B.chat_chat), Md)});
  return out;
}

// ---------------------------------------------------------------------------

double drift_3d3d(int n_azimuthal, int n_layers) {
  const auto section = build_section_triangulation(0.0, 0.1, {OuterShape::Disk, 0.5}, 2, n_azimuthal);
  const TetMesh mesh = extrude(section, 1.0, n_layers, ExtrusionAxis::along_x());
  MultidomainSpec spec;
  spec.mesh = &mesh;
  spec.domains = {
      {"vessel", {Region::Vessel}, TensorField(1.0), VectorField::constant({0.5, 0.1, 0.0}), ScalarField(0.0),
       ScalarField(1.0)},
      {"tissue", {Region::Surroundings}, TensorField(0.5), VectorField::constant({0.1, 0.0, 0.2}), ScalarField(0.0),
       ScalarField::function([](const Vec3& x, double) { return x.x * x.y; })},
  };
  spec.interfaces = {{0, 1, FacetMarker::GammaS, ScalarField(2.0)}};
  spec.dirichlet_outer = false;
  spec.step = {{0.02, 0.2}, 1, 5000};
  const auto res = solve_reference_multidomain(spec);
  std::vector<double> total;
  for (std::size_t k = 0; k < res.solution.levels(); ++k) {
    total.push_back(total_mass_3d(res.submeshes[0], res.solution.values[0][k]) +
                    total_mass_3d(res.submeshes[1], res.solution.values[1][k]));
  }
  return step_drift(total);
}

double drift_3d1d_pulsating(int n) {
  const TetMesh mesh = build_box_mesh({0, 0, 0}, {1, 1, 1}, n, n, n);
  const LineMesh line = axis_line(0.5 / n);
  Coupled3D1DSpec spec;
  spec.mesh = &mesh;
  spec.line = &line;
  spec.D = TensorField(0.8);
  spec.u = VectorField::constant({0.1, 0.05, 0.2});
  spec.initial = ScalarField::function([](const Vec3& x, double) { return x.z; });
  spec.vessel.geometry = {VesselGeometry(RadiusProfile::constant(0.0),
                                         RadiusProfile::sinusoidal_pulsation(0.1, 0.2, 1.0), 1.0)};
  spec.vessel.coef.D = 1.0;
  spec.vessel.coef.xi = 2.0;
  spec.vessel.coef.axial_velocity = constant_line(0.3);
  spec.vessel.initial = constant_line(1.0);
  spec.n_quad = 16;
  spec.time_derivative = TimeDerivative::Conservative;
  spec.dirichlet_outer = false;
  spec.step = {{0.05, 0.5}, 1, 5000};
  const auto res = solve_3d1d(spec);
  std::vector<double> total;
  for (std::size_t k = 0; k < res.solution.levels(); ++k) {
    total.push_back(total_mass_3d(mesh, res.solution.at("c", k)) +
                    total_mass_1d(line, spec.vessel.geometry, res.solution.at("chat", k), res.solution.times[k]));
  }
  return step_drift(total);
}

double drift_3d1d1d(int n) {
  const TetMesh mesh = build_box_mesh({0, 0, 0}, {1, 1, 1}, n, n, n);
  const LineMesh line = axis_line(0.5 / n);
  Coupled3D1D1DSpec spec;
  spec.mesh = &mesh;
  spec.line = &line;
  spec.u = VectorField::constant({0.05, 0.0, 0.1});
  spec.initial = ScalarField(0.0);
  spec.pvs.geometry = {VesselGeometry::annulus(0.06, 0.12, 1.0)};
  spec.pvs.coef.D = 1.0;
  spec.pvs.coef.xi = 1.0;
  spec.pvs.coef.axial_velocity = constant_line(0.1);
  spec.pvs.initial = constant_line(0.5);
  spec.vessel.geometry = {VesselGeometry::cylinder(0.06, 1.0)};
  spec.vessel.coef.D = 1.0;
  spec.vessel.coef.xi = 3.0;
  spec.vessel.coef.axial_velocity = constant_line(0.5);
  spec.vessel.initial = [](int, double s, double) { return 1.0 + s; };
  spec.n_quad = 16;
  spec.dirichlet_outer = false;
  spec.step = {{0.05, 0.5}, 1, 5000};
  const auto res = solve_3d1d1d(spec);
  std::vector<double> total;
  for (std::size_t k = 0; k < res.solution.levels(); ++k) {
    const double t = res.solution.times[k];
    total.push_back(total_mass_3d(mesh, res.solution.at("c", k)) +
                    total_mass_1d(line, spec.pvs.geometry, res.solution.at("chat_p", k), t) +
                    total_mass_1d(line, spec.vessel.geometry, res.solution.at("chat_v", k), t));
  }
  return step_drift(total);
}

// ---------------------------------------------------------------------------

namespace {

MultidomainResult standalone_3d(const TetMesh& mesh, const TensorField& D, const VectorField& u, const ScalarField& f,
                                const ScalarField& c0, const StepOptions& step) {
  MultidomainSpec spec;
  spec.mesh = &mesh;
  spec.domains = {{"c", {Region::Surroundings}, D, u, f, c0}};
  spec.step = step;
  return solve_reference_multidomain(spec);
}

// Reference submesh values scattered back to parent numbering.
Vector to_parent(const TetMesh& sub, const Vector& v, std::size_t n) {
  Vector out(n, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) out[sub.parent_vertex.empty() ? i : sub.parent_vertex[i]] = v[i];
  return out;
}

TransientSolution standalone_1d(const LineMesh& line, const VesselPhysics& vessel, const StepOptions& step) {
  NetworkSpec spec;
  spec.line = &line;
  spec.vessel = vessel;
  spec.vessel.coef.xi = 0.0;
  spec.step = step;
  return solve_1d_network(spec);
}

VesselPhysics vessel_physics(VesselGeometry g, double D, double xi, double u, double f, double c0) {
  VesselPhysics v;
  v.geometry = {std::move(g)};
  v.coef.D = D;
  v.coef.xi = xi;
  v.coef.axial_velocity = constant_line(u);
  v.coef.source = constant_line(f);
  v.initial = constant_line(c0);
  return v;
}

}  // namespace

double decoupled_3d1d(int n) {
  const TetMesh mesh = build_box_mesh({0, 0, 0}, {1, 1, 1}, n, n, n);
  const LineMesh line = axis_line(0.5 / n);
  const StepOptions step{{0.05, 0.3}, 1, kAlwaysDirect};
  Coupled3D1DSpec spec;
  spec.mesh = &mesh;
  spec.line = &line;
  spec.D = TensorField(0.7);
  spec.u = VectorField::constant({0.2, -0.1, 0.3});
  spec.f = ScalarField(1.0);
  spec.initial = ScalarField::function([](const Vec3& x, double) { return x.x + x.z * x.z; });
  spec.vessel = vessel_physics(VesselGeometry::cylinder(0.1, 1.0), 1.2, 0.0, 0.4, 0.5, 1.0);
  spec.n_quad = 16;
  spec.step = step;
  const auto red = solve_3d1d(spec);
  const auto ref3 = standalone_3d(mesh, spec.D, spec.u, spec.f, spec.initial, step);
  const auto ref1 = standalone_1d(line, spec.vessel, step);
  double worst = 0.0;
  for (std::size_t k = 0; k < red.solution.levels(); ++k) {
    worst = std::max(worst, max_rel_diff(red.solution.at("c", k),
                                         to_parent(ref3.submeshes[0], ref3.solution.values[0][k], mesh.num_vertices())));
    worst = std::max(worst, max_rel_diff(red.solution.at("chat", k), ref1.at("chat", k)));
  }
  return worst;
}

double decoupled_3d1d1d(int n) {
  const TetMesh mesh = build_box_mesh({0, 0, 0}, {1, 1, 1}, n, n, n);
  const LineMesh line = axis_line(0.5 / n);
  const StepOptions step{{0.05, 0.3}, 1, kAlwaysDirect};
  Coupled3D1D1DSpec spec;
  spec.mesh = &mesh;
  spec.line = &line;
  spec.D = TensorField(0.7);
  spec.u = VectorField::constant({0.2, -0.1, 0.3});
  spec.f = ScalarField(1.0);
  spec.initial = ScalarField::function([](const Vec3& x, double) { return x.y * x.z; });
  spec.pvs = vessel_physics(VesselGeometry::annulus(0.06, 0.12, 1.0), 0.9, 1.5, 0.1, 0.3, 0.2);
  spec.vessel = vessel_physics(VesselGeometry::cylinder(0.06, 1.0), 1.1, 0.0, 0.6, 0.5, 1.0);
  spec.n_quad = 16;
  spec.step = step;
  const auto red = solve_3d1d1d(spec);

  // PVS plus tissue as a plain 3D-1D problem, vessel on its own.
  Coupled3D1DSpec pair;
  pair.mesh = &mesh;
  pair.line = &line;
  pair.D = spec.D;
  pair.u = spec.u;
  pair.f = spec.f;
  pair.initial = spec.initial;
  pair.vessel = spec.pvs;
  pair.n_quad = spec.n_quad;
  pair.step = step;
  const auto ref_pair = solve_3d1d(pair);
  const auto ref_v = standalone_1d(line, spec.vessel, step);

  double worst = 0.0;
  for (std::size_t k = 0; k < red.solution.levels(); ++k) {
    worst = std::max(worst, max_rel_diff(red.solution.at("c", k), ref_pair.solution.at("c", k)));
    worst = std::max(worst, max_rel_diff(red.solution.at("chat_p", k), ref_pair.solution.at("chat", k)));
    worst = std::max(worst, max_rel_diff(red.solution.at("chat_v", k), ref_v.at("chat", k)));
  }
  return worst;
}

}  // namespace scenario
