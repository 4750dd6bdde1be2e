#include "vasotrans/fem.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace vasotrans {

namespace {

using Local4 = std::array<std::array<double, 4>, 4>;

bool selected(const RegionSet& regions, Region r) {
  return regions.empty() || std::find(regions.begin(), regions.end(), r) != regions.end();
}

std::array<Vec3, 4> cell_points(const TetMesh& mesh, std::size_t c) {
  const auto& t = mesh.cells[c];
  return {mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]], mesh.vertices[t[3]]};
}

Vec3 bary_point(const std::array<Vec3, 4>& x, const std::array<double, 4>& l) {
  return l[0] * x[0] + l[1] * x[1] + l[2] * x[2] + l[3] * x[3];
}

// Cells are split into contiguous chunks, one triplet buffer per chunk,
// concatenated in chunk order: the triplet sequence (and thus the finalized
// matrix) is the same as in the serial loop for any worker count.
template <class Kernel>
SparseMatrix assemble_cells(const TetMesh& mesh, const RegionSet& regions, Execution ex, Kernel&& kernel) {
  const std::size_t n = mesh.cells.size();
  const int parts = (ex == Execution::Parallel) ? std::max(1, std::min<int>(thread_count(), static_cast<int>(n)))
                                                : 1;
  const auto ranges = chunk_ranges(n, parts);
  std::vector<TripletList> buffers(parts);
  auto fill = [&](int p) {
    auto& buf = buffers[p];
    buf.reserve(16 * (ranges[p].second - ranges[p].first));
    Local4 local;
    for (std::size_t c = ranges[p].first; c < ranges[p].second; ++c) {
      if (!selected(regions, mesh.cell_region[c])) continue;
      kernel(c, local);
      const auto& t = mesh.cells[c];
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) buf.add(t[i], t[j], local[i][j]);
      }
    }
  };
  if (parts > 1) {
#pragma omp parallel for schedule(static, 1) num_threads(parts)
    for (int p = 0; p < parts; ++p) fill(p);
  } else {
    fill(0);
  }
  TripletList all = std::move(buffers[0]);
  for (int p = 1; p < parts; ++p) all.append(buffers[p]);
  return SparseMatrix::from_triplets(mesh.vertices.size(), mesh.vertices.size(), all);
}

bool is_spd(const Mat3& m) {
  const double scale = std::max({std::abs(m[0][0]), std::abs(m[1][1]), std::abs(m[2][2]), 1e-300});
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (std::abs(m[i][j] - m[j][i]) > 1e-12 * scale) return false;
    }
  }
  const double d1 = m[0][0];
  const double d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  const double d3 = det3({m[0][0], m[1][0], m[2][0]}, {m[0][1], m[1][1], m[2][1]}, {m[0][2], m[1][2], m[2][2]});
  return d1 > 0.0 && d2 > 0.0 && d3 > 0.0;
}

std::string point_string(const Vec3& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(' << x.x << ", " << x.y << ", " << x.z << ')';
  return os.str();
}

Vec3 tensor_times(const Mat3& D, const Vec3& g) { return D * g; }

}  // namespace

ScalarField ScalarField::constant(double v, std::string tag) { return ScalarField(Fn{}, v, true, std::move(tag)); }

ScalarField ScalarField::function(Fn fn, std::string tag) {
  return ScalarField(std::move(fn), 0.0, false, std::move(tag));
}

VectorField VectorField::constant(const Vec3& v, std::string tag) { return VectorField(Fn{}, v, true, std::move(tag)); }

VectorField VectorField::function(Fn fn, std::string tag) {
  return VectorField(std::move(fn), Vec3{}, false, std::move(tag));
}

TensorField TensorField::isotropic(double d, std::string tag) {
  Mat3 m{};
  m[0][0] = m[1][1] = m[2][2] = d;
  return constant(m, std::move(tag));
}

TensorField TensorField::constant(const Mat3& m, std::string tag) { return TensorField(Fn{}, m, true, std::move(tag)); }

TensorField TensorField::function(Fn fn, std::string tag) {
  return TensorField(std::move(fn), Mat3{}, false, std::move(tag));
}

void check_spd(const TensorField& D, const TetMesh& mesh, double t) {
  if (D.is_constant()) {
    if (!is_spd(D.value())) throw FemError("diffusion tensor is not symmetric positive definite");
    return;
  }
  for (const auto& x : mesh.vertices) {
    if (!is_spd(D(x, t))) throw FemError("diffusion tensor not SPD at " + point_string(x));
  }
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    const auto p = cell_points(mesh, c);
    const Vec3 x = 0.25 * (p[0] + p[1] + p[2] + p[3]);
    if (!is_spd(D(x, t))) throw FemError("diffusion tensor not SPD at " + point_string(x));
  }
}

void check_nonnegative(const ScalarField& xi, std::span<const Vec3> points, double t) {
  if (xi.is_constant()) {
    if (xi.value() < 0.0) throw FemError("exchange coefficient is negative");
    return;
  }
  for (const auto& x : points) {
    if (xi(x, t) < 0.0) throw FemError("exchange coefficient negative at " + point_string(x));
  }
}

std::array<Vec3, 4> barycentric_gradients(const std::array<Vec3, 4>& x, double* volume) {
  const Vec3 e1 = x[1] - x[0], e2 = x[2] - x[0], e3 = x[3] - x[0];
  const double det = det3(e1, e2, e3);
  if (det == 0.0) throw FemError("degenerate tetrahedron");
  std::array<Vec3, 4> g;
  g[1] = cross(e2, e3) / det;
  g[2] = cross(e3, e1) / det;
  g[3] = cross(e1, e2) / det;
  g[0] = -(g[1] + g[2] + g[3]);
  if (volume) *volume = std::abs(det) / 6.0;
  return g;
}

Local4 element_mass(const std::array<Vec3, 4>& x) {
  const double V = std::abs(det3(x[1] - x[0], x[2] - x[0], x[3] - x[0])) / 6.0;
  Local4 m;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) m[i][j] = (i == j) ? V / 10.0 : V / 20.0;
  }
  return m;
}

Local4 element_stiffness(const std::array<Vec3, 4>& x, const Mat3& D) {
  double V = 0.0;
  const auto g = barycentric_gradients(x, &V);
  Local4 k;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) k[i][j] = V * dot(g[i], tensor_times(D, g[j]));
  }
  return k;
}

const TetQuadrature& tet_rule_degree2() {
  static const TetQuadrature rule = [] {
    const double a = 0.5854101966249685, b = 0.1381966011250105;
    TetQuadrature q;
    for (int k = 0; k < 4; ++k) {
      for (int i = 0; i < 4; ++i) q.bary[k][i] = (i == k) ? a : b;
      q.weight[k] = 0.25;
    }
    return q;
  }();
  return rule;
}

SparseMatrix assemble_mass(const TetMesh& mesh, const RegionSet& regions, const ScalarField& rho, double t,
                           Execution ex) {
  const auto& Q = tet_rule_degree2();
  return assemble_cells(mesh, regions, ex, [&](std::size_t c, Local4& m) {
    const auto x = cell_points(mesh, c);
    if (rho.is_constant()) {
      m = element_mass(x);
      for (auto& row : m) {
        for (double& v : row) v *= rho.value();
      }
      return;
    }
    const double V = mesh.cell_volume(c);
    for (auto& row : m) row.fill(0.0);
    for (int q = 0; q < 4; ++q) {
      const auto& l = Q.bary[q];
      const double w = Q.weight[q] * V * rho(bary_point(x, l), t);
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) m[i][j] += w * l[i] * l[j];
      }
    }
  });
}

SparseMatrix assemble_stiffness(const TetMesh& mesh, const RegionSet& regions, const TensorField& D, double t,
                                Execution ex) {
  const auto& Q = tet_rule_degree2();
  return assemble_cells(mesh, regions, ex, [&](std::size_t c, Local4& k) {
    const auto x = cell_points(mesh, c);
    if (D.is_constant()) {
      k = element_stiffness(x, D.value());
      return;
    }
    double V = 0.0;
    const auto g = barycentric_gradients(x, &V);
    Mat3 Dq{};
    for (int q = 0; q < 4; ++q) {
      const Mat3 Dp = D(bary_point(x, Q.bary[q]), t);
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) Dq[a][b] += Q.weight[q] * Dp[a][b];
      }
    }
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) k[i][j] = V * dot(g[i], tensor_times(Dq, g[j]));
    }
  });
}

SparseMatrix assemble_convection(const TetMesh& mesh, const RegionSet& regions, const VectorField& u, double t,
                                 Execution ex) {
  const auto& Q = tet_rule_degree2();
  return assemble_cells(mesh, regions, ex, [&](std::size_t c, Local4& m) {
    const auto x = cell_points(mesh, c);
    double V = 0.0;
    const auto g = barycentric_gradients(x, &V);
    if (u.is_constant()) {
      for (int i = 0; i < 4; ++i) {
        const double ug = -0.25 * V * dot(u.value(), g[i]);
        for (int j = 0; j < 4; ++j) m[i][j] = ug;
      }
      return;
    }
    for (auto& row : m) row.fill(0.0);
    for (int q = 0; q < 4; ++q) {
      const auto& l = Q.bary[q];
      const Vec3 uq = u(bary_point(x, l), t);
      const double w = Q.weight[q] * V;
      for (int i = 0; i < 4; ++i) {
        const double ug = -w * dot(uq, g[i]);
        for (int j = 0; j < 4; ++j) m[i][j] += ug * l[j];
      }
    }
  });
}

SparseMatrix assemble_facet_mass(const TetMesh& mesh, FacetMarker marker, const ScalarField& xi, double t) {
  if (!mesh.has_marker(marker)) throw FemError("mesh has no facets marked " + to_string(marker));
  TripletList trip;
  // Degree-2 triangle rule: edge-midpoint-free interior points (2/3, 1/6, 1/6).
  constexpr double a = 2.0 / 3.0, b = 1.0 / 6.0;
  const std::array<std::array<double, 3>, 3> bary{{{a, b, b}, {b, a, b}, {b, b, a}}};
  for (std::size_t f = 0; f < mesh.facets.size(); ++f) {
    if (mesh.facet_marker[f] != marker) continue;
    const auto& v = mesh.facets[f];
    const double area = mesh.facet_area(f);
    std::array<std::array<double, 3>, 3> m{};
    if (xi.is_constant()) {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) m[i][j] = xi.value() * area * ((i == j) ? 1.0 / 6.0 : 1.0 / 12.0);
      }
    } else {
      for (const auto& l : bary) {
        const Vec3 x = l[0] * mesh.vertices[v[0]] + l[1] * mesh.vertices[v[1]] + l[2] * mesh.vertices[v[2]];
        const double w = area / 3.0 * xi(x, t);
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) m[i][j] += w * l[i] * l[j];
        }
      }
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trip.add(v[i], v[j], m[i][j]);
    }
  }
  return SparseMatrix::from_triplets(mesh.vertices.size(), mesh.vertices.size(), trip);
}

Vector assemble_load(const TetMesh& mesh, const RegionSet& regions, const ScalarField& f, double t) {
  Vector b(mesh.vertices.size(), 0.0);
  const auto& Q = tet_rule_degree2();
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    if (!selected(regions, mesh.cell_region[c])) continue;
    const auto x = cell_points(mesh, c);
    const double V = mesh.cell_volume(c);
    const auto& t4 = mesh.cells[c];
    if (f.is_constant()) {
      for (int i = 0; i < 4; ++i) b[t4[i]] += 0.25 * V * f.value();
      continue;
    }
    for (int q = 0; q < 4; ++q) {
      const auto& l = Q.bary[q];
      const double w = Q.weight[q] * V * f(bary_point(x, l), t);
      for (int i = 0; i < 4; ++i) b[t4[i]] += w * l[i];
    }
  }
  return b;
}

Matrices3D assemble_3d(const TetMesh& mesh, const RegionSet& regions, const Terms3D& terms, double t, Execution ex) {
  for (Region r : regions) {
    if (!mesh.has_region(r)) throw FemError("region " + to_string(r) + " not present in mesh");
  }
  Matrices3D out;
  if (terms.mass) out.mass = assemble_mass(mesh, regions, *terms.mass, t, ex);
  if (terms.stiffness) {
    check_spd(*terms.stiffness, mesh, t);
    out.stiffness = assemble_stiffness(mesh, regions, *terms.stiffness, t, ex);
  }
  if (terms.convection) out.convection = assemble_convection(mesh, regions, *terms.convection, t, ex);
  if (terms.facet_mass) {
    check_nonnegative(terms.facet_mass->first, mesh.vertices, t);
    out.facet_mass = assemble_facet_mass(mesh, terms.facet_mass->second, terms.facet_mass->first, t);
  }
  return out;
}

namespace {

struct Tri2 {
  double area;
  std::array<std::array<double, 2>, 3> grad;
};

Tri2 triangle_geometry(const SectionMesh& mesh, const std::array<int, 3>& t) {
  const auto& p0 = mesh.vertices[t[0]];
  const auto& p1 = mesh.vertices[t[1]];
  const auto& p2 = mesh.vertices[t[2]];
  const double a2 = (p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x);
  if (a2 == 0.0) throw FemError("degenerate triangle");
  Tri2 g;
  g.area = std::abs(a2) / 2.0;
  g.grad[0] = {(p1.y - p2.y) / a2, (p2.x - p1.x) / a2};
  g.grad[1] = {(p2.y - p0.y) / a2, (p0.x - p2.x) / a2};
  g.grad[2] = {(p0.y - p1.y) / a2, (p1.x - p0.x) / a2};
  return g;
}

}  // namespace

SparseMatrix assemble_mass_2d(const SectionMesh& mesh, double rho) {
  TripletList trip;
  trip.reserve(9 * mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    const double A = triangle_geometry(mesh, t).area;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trip.add(t[i], t[j], rho * A * ((i == j) ? 1.0 / 6.0 : 1.0 / 12.0));
    }
  }
  return SparseMatrix::from_triplets(mesh.vertices.size(), mesh.vertices.size(), trip);
}

SparseMatrix assemble_stiffness_2d(const SectionMesh& mesh, double d) {
  TripletList trip;
  trip.reserve(9 * mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    const auto g = triangle_geometry(mesh, t);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        trip.add(t[i], t[j], d * g.area * (g.grad[i][0] * g.grad[j][0] + g.grad[i][1] * g.grad[j][1]));
      }
    }
  }
  return SparseMatrix::from_triplets(mesh.vertices.size(), mesh.vertices.size(), trip);
}

Vector interpolate(const TetMesh& mesh, const ScalarField& f, double t) {
  Vector v(mesh.vertices.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(mesh.vertices[i], t);
  return v;
}

namespace {

constexpr double kGauss = 0.57735026918962576;  // 1/sqrt(3)

// Calls fn(e, s_q, w_q, phi0, phi1, dphi) for both Gauss points of every segment.
template <class Fn>
void for_line_quadrature(const LineMesh& mesh, Fn&& fn) {
  for (std::size_t e = 0; e < mesh.segments.size(); ++e) {
    const double s0 = mesh.segment_s[e][0], s1 = mesh.segment_s[e][1];
    const double h = s1 - s0;
    for (double g : {-kGauss, kGauss}) {
      const double xi = 0.5 * (1.0 + g);  // local coordinate in [0, 1]
      fn(e, s0 + xi * h, 0.5 * h, 1.0 - xi, xi, 1.0 / h);
    }
  }
}

template <class Local>
SparseMatrix assemble_line(const LineMesh& mesh, Local&& local) {
  TripletList trip;
  trip.reserve(8 * mesh.segments.size());
  for_line_quadrature(mesh, [&](std::size_t e, double s, double w, double p0, double p1, double dp) {
    const auto [a, b] = mesh.segments[e];
    const std::array<double, 2> phi{p0, p1};
    const std::array<double, 2> dphi{-dp, dp};
    const std::array<int, 2> v{a, b};
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) trip.add(v[i], v[j], local(mesh.segment_curve[e], s, w, phi, dphi, i, j));
    }
  });
  return SparseMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), trip);
}

}  // namespace

SparseMatrix assemble_line_mass(const LineMesh& mesh, const LineCoefficient& w, double t) {
  return assemble_line(mesh, [&](int c, double s, double wq, const auto& phi, const auto&, int i, int j) {
    return wq * w(c, s, t) * phi[i] * phi[j];
  });
}

SparseMatrix assemble_line_stiffness(const LineMesh& mesh, const LineCoefficient& k, double t) {
  return assemble_line(mesh, [&](int c, double s, double wq, const auto&, const auto& dphi, int i, int j) {
    return wq * k(c, s, t) * dphi[i] * dphi[j];
  });
}

SparseMatrix assemble_line_advection(const LineMesh& mesh, const LineCoefficient& beta, double t) {
  return assemble_line(mesh, [&](int c, double s, double wq, const auto& phi, const auto& dphi, int i, int j) {
    return wq * beta(c, s, t) * phi[j] * dphi[i];
  });
}

Vector assemble_line_load(const LineMesh& mesh, const LineCoefficient& f, double t) {
  Vector b(mesh.num_vertices(), 0.0);
  for_line_quadrature(mesh, [&](std::size_t e, double s, double w, double p0, double p1, double) {
    const double fq = w * f(mesh.segment_curve[e], s, t);
    b[mesh.segments[e][0]] += fq * p0;
    b[mesh.segments[e][1]] += fq * p1;
  });
  return b;
}

VesselForms1D assemble_1d(const LineMesh& mesh, std::span<const VesselGeometry> geometry,
                          const VesselCoefficients& coef, double t) {
  if (geometry.size() != mesh.graph.curves().size()) throw FemError("one vessel geometry per curve required");
  for (std::size_t e = 0; e < mesh.segments.size(); ++e) {
    const double L = geometry[mesh.segment_curve[e]].length();
    if (mesh.segment_s[e][1] > L * (1.0 + 1e-12) + 1e-14) {
      throw FemError("segment " + std::to_string(e) + " outside the geometry parameter range");
    }
  }
  auto clamp_s = [&](int c, double s) { return std::min(s, geometry[c].length()); };
  auto area = [&](int c, double s, double tt) { return geometry[c].metrics(clamp_s(c, s), tt).area; };
  VesselForms1D f;
  f.mass_A = assemble_line_mass(mesh, area, t);
  f.mass_dtA = assemble_line_mass(
      mesh, [&](int c, double s, double tt) { return geometry[c].metrics(clamp_s(c, s), tt).dA_dt; }, t);
  f.mass_xiP = assemble_line_mass(
      mesh, [&](int c, double s, double tt) { return coef.xi * geometry[c].metrics(clamp_s(c, s), tt).perimeter; },
      t);
  f.stiffness = assemble_line_stiffness(mesh, [&](int c, double s, double tt) { return coef.D * area(c, s, tt); }, t);
  f.drift = assemble_line_advection(
      mesh, [&](int c, double s, double tt) { return coef.D * geometry[c].gs(clamp_s(c, s), tt); }, t);
  if (coef.axial_velocity) {
    f.convection = assemble_line_advection(
        mesh, [&](int c, double s, double tt) { return -area(c, s, tt) * coef.axial_velocity(c, s, tt); }, t);
  } else {
    f.convection = SparseMatrix(mesh.num_vertices(), mesh.num_vertices());
  }
  if (coef.source) {
    f.load = assemble_line_load(mesh, [&](int c, double s, double tt) { return area(c, s, tt) * coef.source(c, s, tt); },
                                t);
  } else {
    f.load.assign(mesh.num_vertices(), 0.0);
  }
  f.w_bar.resize(mesh.num_vertices());
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const int c = mesh.vertex_curve[v];
    f.w_bar[v] = geometry[c].shape_perimeter_average(clamp_s(c, mesh.vertex_s[v]), t);
  }
  return f;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw FemError("Gauss rule needs at least one point");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[n - 1 - i] = x;
    weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

double section_average_axial(const VectorField& u, const LineMesh& mesh, const VesselGeometry& geom, int curve,
                             double s, double t, int n_r, int n_theta) {
  const auto& C = mesh.graph.curves()[curve];
  const Frame F = C.frame_at(s);
  const Vec3 center = C.point_at(s);
  if (u.is_constant() && geom.shape().is_uniform()) return dot(u.value(), F.T);
  const double R1 = geom.R1(s, t), R2 = geom.R2(s, t);
  std::vector<double> gx, gw;
  gauss_legendre(n_r, gx, gw);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n_r; ++i) {
    const double r = R1 + 0.5 * (R2 - R1) * (gx[i] + 1.0);
    const double wr = 0.5 * (R2 - R1) * gw[i] * r;
    const double wc = geom.shape()(r, R1, R2);
    for (int k = 0; k < n_theta; ++k) {
      const double th = 2.0 * std::numbers::pi * k / n_theta;
      const Vec3 x = center + r * std::cos(th) * F.N + r * std::sin(th) * F.B;
      num += wr * dot(u(x, t), F.T) * wc;
      den += wr;
    }
  }
  return num / den;
}

void apply_dirichlet(BlockSystem& system, std::size_t field, const TetMesh& mesh, FacetMarker marker, double value) {
  if (!mesh.has_marker(marker)) throw FemError("unknown marker " + to_string(marker));
  const auto dofs = mesh.marked_vertices(marker);
  system.apply_dirichlet(field, dofs, value);
}

void apply_dirichlet(BlockSystem& system, std::size_t field, const LineMesh& mesh, const std::string& marker,
                     double value) {
  auto it = mesh.markers.find(marker);
  if (it == mesh.markers.end() || it->second.empty()) throw FemError("unknown marker " + marker);
  system.apply_dirichlet(field, it->second, value);
}

}  // namespace vasotrans
