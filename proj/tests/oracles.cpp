#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oracle {

FvSolution solve_fv_network(const FvNetwork& net, int n) {
  const int nc = static_cast<int>(net.curves.size());
  // Junctions first, then the private nodes of each curve.
  std::vector<std::vector<int>> id(nc, std::vector<int>(n + 1, -1));
  int next = net.n_junctions;
  for (int k = 0; k < nc; ++k) {
    const auto& c = net.curves[k];
    for (int i = 0; i <= n; ++i) {
      if (i == 0 && c.from >= 0) {
        id[k][i] = c.from;
      } else if (i == n && c.to >= 0) {
        id[k][i] = c.to;
      } else {
        id[k][i] = next++;
      }
    }
  }
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(next, next);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(next);
  for (int k = 0; k < nc; ++k) {
    const auto& c = net.curves[k];
    const double h = c.length / n;
    const double xiP = net.xi * c.perimeter;
    for (int i = 0; i < n; ++i) {
      const int a = id[k][i], e = id[k][i + 1];
      // face flux from a to e
      const double ka = net.D * c.area / h + 0.5 * c.area * c.u;
      const double ke = -net.D * c.area / h + 0.5 * c.area * c.u;
      K(a, a) += ka;
      K(a, e) += ke;
      K(e, a) -= ka;
      K(e, e) -= ke;
      for (int v : {a, e}) {
        K(v, v) += 0.5 * h * xiP;
        b(v) += 0.5 * h * (c.area * net.f + xiP * net.exterior);
      }
    }
  }
  for (const auto& fx : net.fixed) {
    const int v = id[fx.curve][fx.at_start ? 0 : n];
    K.row(v).setZero();
    K(v, v) = 1.0;
    b(v) = fx.value;
  }
  const Eigen::VectorXd x = K.partialPivLu().solve(b);
  FvSolution sol;
  sol.values.resize(nc);
  for (int k = 0; k < nc; ++k) {
    for (int i = 0; i <= n; ++i) sol.values[k].push_back(x(id[k][i]));
  }
  return sol;
}

TriRule triangle_rule_degree5() {
  const double r = std::sqrt(15.0);
  const double a1 = (6.0 - r) / 21.0, w1 = (155.0 - r) / 1200.0;
  const double a2 = (6.0 + r) / 21.0, w2 = (155.0 + r) / 1200.0;
  TriRule q;
  q.bary = {{1.0 / 3, 1.0 / 3, 1.0 / 3},
            {a1, a1, 1 - 2 * a1}, {a1, 1 - 2 * a1, a1}, {1 - 2 * a1, a1, a1},
            {a2, a2, 1 - 2 * a2}, {a2, 1 - 2 * a2, a2}, {1 - 2 * a2, a2, a2}};
  q.weight = {9.0 / 40, w1, w1, w1, w2, w2, w2};
  return q;
}

TriRule triangle_rule_interior3() {
  TriRule q;
  q.bary = {{2.0 / 3, 1.0 / 6, 1.0 / 6}, {1.0 / 6, 2.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 6, 2.0 / 3}};
  q.weight = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  return q;
}

Eigen::MatrixXd facet_mass(const vasotrans::TetMesh& mesh, vasotrans::FacetMarker marker,
                           const std::function<double(const Vec3&)>& xi, const TriRule& rule) {
  const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t f = 0; f < mesh.facets.size(); ++f) {
    if (mesh.facet_marker[f] != marker) continue;
    const auto& t = mesh.facets[f];
    const Vec3 p0 = mesh.vertices[t[0]], p1 = mesh.vertices[t[1]], p2 = mesh.vertices[t[2]];
    const Vec3 e1 = p1 - p0, e2 = p2 - p0;
    // |e1 x e2| / 2 written out
    const double cx = e1.y * e2.z - e1.z * e2.y, cy = e1.z * e2.x - e1.x * e2.z, cz = e1.x * e2.y - e1.y * e2.x;
    const double area = 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
    for (std::size_t q = 0; q < rule.weight.size(); ++q) {
      const auto& l = rule.bary[q];
      const Vec3 x = l[0] * p0 + l[1] * p1 + l[2] * p2;
      const double w = rule.weight[q] * area * xi(x);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) M(t[i], t[j]) += w * l[i] * l[j];
      }
    }
  }
  return M;
}

Eigen::MatrixXd perimeter_average(const vasotrans::TetMesh& mesh, const vasotrans::LineMesh& line,
                                  const std::vector<double>& radius, int n_quad) {
  const auto n1 = static_cast<Eigen::Index>(line.num_vertices());
  const auto n3 = static_cast<Eigen::Index>(mesh.num_vertices());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n1, n3);
  for (Eigen::Index i = 0; i < n1; ++i) {
    const auto F = line.frame_at_vertex(static_cast<std::size_t>(i));
    for (int k = 0; k < n_quad; ++k) {
      const double th = 2.0 * std::numbers::pi * k / n_quad;
      const Vec3 x = line.points[i] + radius[i] * std::cos(th) * F.N + radius[i] * std::sin(th) * F.B;
      bool found = false;
      for (std::size_t c = 0; c < mesh.cells.size() && !found; ++c) {
        const auto& t = mesh.cells[c];
        Eigen::Matrix3d J;
        for (int d = 0; d < 3; ++d) {
          J(d, 0) = mesh.vertices[t[1]][d] - mesh.vertices[t[0]][d];
          J(d, 1) = mesh.vertices[t[2]][d] - mesh.vertices[t[0]][d];
          J(d, 2) = mesh.vertices[t[3]][d] - mesh.vertices[t[0]][d];
        }
        const Eigen::Vector3d r(x.x - mesh.vertices[t[0]].x, x.y - mesh.vertices[t[0]].y,
                                x.z - mesh.vertices[t[0]].z);
        const Eigen::Vector3d l = J.lu().solve(r);
        const double l0 = 1.0 - l.sum();
        if (std::min({l0, l(0), l(1), l(2)}) < -1e-10) continue;
        P(i, t[0]) += l0 / n_quad;
        for (int v = 0; v < 3; ++v) P(i, t[v + 1]) += l(v) / n_quad;
        found = true;
      }
      if (!found) throw std::runtime_error("circle point outside the mesh");
    }
  }
  return P;
}

Eigen::MatrixXd line_mass(const vasotrans::LineMesh& line, const std::vector<double>& weight) {
  const auto n = static_cast<Eigen::Index>(line.num_vertices());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t e = 0; e < line.segments.size(); ++e) {
    const double h = line.segment_length(e) * weight[line.segment_curve[e]];
    const int a = line.segments[e][0], b = line.segments[e][1];
    M(a, a) += h / 3.0;
    M(b, b) += h / 3.0;
    M(a, b) += h / 6.0;
    M(b, a) += h / 6.0;
  }
  return M;
}

}  // namespace oracle
