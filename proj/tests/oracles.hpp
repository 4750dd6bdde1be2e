#pragma once

// Independent reference implementations used by the unit and acceptance tests.
// None of these call into the library's assembly or coupling code.

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "vasotrans/geometry.hpp"
#include "vasotrans/mesh.hpp"

namespace oracle {

using vasotrans::Vec3;

// Steady reduced transport on a graph of straight vessels, second-order finite
// volumes on a uniform grid per curve. Flux along s is F = -D A c' + A u c;
// outlets carry F = 0, junctions continuity and flux balance.
struct FvCurve {
  double length = 1.0;
  double area = 1.0;
  double perimeter = 1.0;
  double u = 0.0;
  int from = -1;  // junction index at s = 0, -1 for a free end
  int to = -1;    // junction index at s = L
};

struct FvNetwork {
  std::vector<FvCurve> curves;
  int n_junctions = 0;
  double D = 1.0;
  double xi = 0.0;
  double f = 0.0;         // cross-section average source
  double exterior = 0.0;  // fixed c_bar
  // Free-end Dirichlet data: (curve, at_start, value).
  struct Fixed {
    int curve;
    bool at_start;
    double value;
  };
  std::vector<Fixed> fixed;
};

struct FvSolution {
  // values[k][i] at s = i L_k / n
  std::vector<std::vector<double>> values;
};

FvSolution solve_fv_network(const FvNetwork& net, int n_per_curve);

// Triangle rules in barycentric coordinates; weights sum to 1.
struct TriRule {
  std::vector<std::array<double, 3>> bary;
  std::vector<double> weight;
};
TriRule triangle_rule_degree5();
TriRule triangle_rule_interior3();

// Dense int_Gamma xi phi_i phi_j over facets with the marker.
Eigen::MatrixXd facet_mass(const vasotrans::TetMesh& mesh, vasotrans::FacetMarker marker,
                           const std::function<double(const Vec3&)>& xi, const TriRule& rule);

// Dense perimeter-average matrix by scanning every cell for every circle point.
Eigen::MatrixXd perimeter_average(const vasotrans::TetMesh& mesh, const vasotrans::LineMesh& line,
                                  const std::vector<double>& radius, int n_quad);

// 1D P1 mass with a constant weight per curve, dense.
Eigen::MatrixXd line_mass(const vasotrans::LineMesh& line, const std::vector<double>& weight);

}  // namespace oracle
