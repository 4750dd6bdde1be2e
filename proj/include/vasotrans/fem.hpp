#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vasotrans/geometry.hpp"
#include "vasotrans/mesh.hpp"
#include "vasotrans/parallel.hpp"
#include "vasotrans/sparse.hpp"

namespace vasotrans {

class FemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scalar coefficient c(x, t). Constant fields use closed-form element
/// matrices; others are sampled at quadrature points.
class ScalarField {
 public:
  using Fn = std::function<double(const Vec3&, double)>;
  ScalarField() : ScalarField(constant(0.0)) {}
  ScalarField(double v) : ScalarField(constant(v)) {}  // NOLINT: implicit on purpose
  static ScalarField constant(double v, std::string tag = {});
  static ScalarField function(Fn fn, std::string tag = {});

  double operator()(const Vec3& x, double t) const { return is_constant_ ? value_ : fn_(x, t); }
  bool is_constant() const { return is_constant_; }
  double value() const { return value_; }
  const std::string& tag() const { return tag_; }

 private:
  ScalarField(Fn fn, double v, bool is_constant, std::string tag)
      : fn_(std::move(fn)), value_(v), is_constant_(is_constant), tag_(std::move(tag)) {}

  Fn fn_;
  double value_ = 0.0;
  bool is_constant_ = true;
  std::string tag_;
};

class VectorField {
 public:
  using Fn = std::function<Vec3(const Vec3&, double)>;
  VectorField() : VectorField(constant({0.0, 0.0, 0.0})) {}
  static VectorField constant(const Vec3& v, std::string tag = {});
  static VectorField function(Fn fn, std::string tag = {});

  Vec3 operator()(const Vec3& x, double t) const { return is_constant_ ? value_ : fn_(x, t); }
  bool is_constant() const { return is_constant_; }
  const Vec3& value() const { return value_; }
  bool is_zero() const { return is_constant_ && value_ == Vec3{0.0, 0.0, 0.0}; }
  const std::string& tag() const { return tag_; }

 private:
  VectorField(Fn fn, const Vec3& v, bool is_constant, std::string tag)
      : fn_(std::move(fn)), value_(v), is_constant_(is_constant), tag_(std::move(tag)) {}

  Fn fn_;
  Vec3 value_;
  bool is_constant_ = true;
  std::string tag_;
};

class TensorField {
 public:
  using Fn = std::function<Mat3(const Vec3&, double)>;
  TensorField() : TensorField(isotropic(1.0)) {}
  TensorField(double d) : TensorField(isotropic(d)) {}  // NOLINT: implicit on purpose
  static TensorField isotropic(double d, std::string tag = {});
  static TensorField constant(const Mat3& m, std::string tag = {});
  static TensorField function(Fn fn, std::string tag = {});

  Mat3 operator()(const Vec3& x, double t) const { return is_constant_ ? value_ : fn_(x, t); }
  bool is_constant() const { return is_constant_; }
  const Mat3& value() const { return value_; }
  const std::string& tag() const { return tag_; }

 private:
  TensorField(Fn fn, const Mat3& v, bool is_constant, std::string tag)
      : fn_(std::move(fn)), value_(v), is_constant_(is_constant), tag_(std::move(tag)) {}

  Fn fn_;
  Mat3 value_{};
  bool is_constant_ = true;
  std::string tag_;
};

/// Samples the tensor at the mesh vertices (and cell centroids) at time t;
/// throws FemError naming the point if a sample is not symmetric positive definite.
void check_spd(const TensorField& D, const TetMesh& mesh, double t);
/// Throws FemError if a sample of xi is negative.
void check_nonnegative(const ScalarField& xi, std::span<const Vec3> points, double t);

/// Cell filter; empty means every cell.
using RegionSet = std::vector<Region>;

// 3D P1 forms. Matrix size is the vertex count of the mesh; rows and
// columns of vertices outside the selected regions stay empty.
SparseMatrix assemble_mass(const TetMesh& mesh, const RegionSet& regions, const ScalarField& rho, double t,
                           Execution ex = Execution::Parallel);
SparseMatrix assemble_stiffness(const TetMesh& mesh, const RegionSet& regions, const TensorField& D, double t,
                                Execution ex = Execution::Parallel);
/// C_ij = -int (u phi_j) . grad phi_i.
SparseMatrix assemble_convection(const TetMesh& mesh, const RegionSet& regions, const VectorField& u, double t,
                                 Execution ex = Execution::Parallel);
SparseMatrix assemble_facet_mass(const TetMesh& mesh, FacetMarker marker, const ScalarField& xi, double t);
Vector assemble_load(const TetMesh& mesh, const RegionSet& regions, const ScalarField& f, double t);

struct Terms3D {
  std::optional<ScalarField> mass;
  std::optional<TensorField> stiffness;
  std::optional<VectorField> convection;
  std::optional<std::pair<ScalarField, FacetMarker>> facet_mass;
};
struct Matrices3D {
  std::optional<SparseMatrix> mass;
  std::optional<SparseMatrix> stiffness;
  std::optional<SparseMatrix> convection;
  std::optional<SparseMatrix> facet_mass;
};
Matrices3D assemble_3d(const TetMesh& mesh, const RegionSet& regions, const Terms3D& terms, double t,
                       Execution ex = Execution::Parallel);

/// 2D P1 forms on a section triangulation (used by the eigenvalue lab).
SparseMatrix assemble_mass_2d(const SectionMesh& mesh, double rho = 1.0);
SparseMatrix assemble_stiffness_2d(const SectionMesh& mesh, double d = 1.0);

/// Nodal interpolation of a field on the mesh vertices.
Vector interpolate(const TetMesh& mesh, const ScalarField& f, double t);

/// Closed-form P1 element matrices of a tetrahedron (exposed for testing).
std::array<std::array<double, 4>, 4> element_mass(const std::array<Vec3, 4>& x);
std::array<std::array<double, 4>, 4> element_stiffness(const std::array<Vec3, 4>& x, const Mat3& D);
std::array<Vec3, 4> barycentric_gradients(const std::array<Vec3, 4>& x, double* volume = nullptr);

/// Degree-2 tetrahedron rule (barycentric coordinates, weights summing to 1).
struct TetQuadrature {
  std::array<std::array<double, 4>, 4> bary;
  std::array<double, 4> weight;
};
const TetQuadrature& tet_rule_degree2();

// 1D P1 forms on a line mesh; coefficients are functions of (curve, s, t).
// Two-point Gauss quadrature per segment.
using LineCoefficient = std::function<double(int curve, double s, double t)>;

/// int w phi_j phi_i ds
SparseMatrix assemble_line_mass(const LineMesh& mesh, const LineCoefficient& w, double t);
/// int k phi_j' phi_i' ds
SparseMatrix assemble_line_stiffness(const LineMesh& mesh, const LineCoefficient& k, double t);
/// int beta phi_j phi_i' ds (trial value against test derivative)
SparseMatrix assemble_line_advection(const LineMesh& mesh, const LineCoefficient& beta, double t);
Vector assemble_line_load(const LineMesh& mesh, const LineCoefficient& f, double t);

/// Coefficients of one reduced vessel equation.
struct VesselCoefficients {
  double D = 1.0;   // D_v
  double xi = 1.0;  // exchange coefficient on the outer circle
  /// <u_{v,s} w_c>(s, t) per curve; zero when empty.
  LineCoefficient axial_velocity;
  /// <f_v>(s, t) per curve; zero when empty.
  LineCoefficient source;
};

/// Building blocks of the reduced 1D forms at time t.
struct VesselForms1D {
  SparseMatrix mass_A;       // (A c, phi)
  SparseMatrix mass_dtA;     // (dA/dt c, phi)
  SparseMatrix mass_xiP;     // (xi P c, phi)
  SparseMatrix stiffness;    // (D A c', phi')
  SparseMatrix drift;        // (D g_s c, phi')
  SparseMatrix convection;   // -(A <u w> c, phi')
  Vector load;               // (A <f>, phi)
  Vector w_bar;              // perimeter average of w_c at the vertices
};

/// geometry[k] describes curve k of the line mesh.
VesselForms1D assemble_1d(const LineMesh& mesh, std::span<const VesselGeometry> geometry,
                          const VesselCoefficients& coef, double t);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// <(u . T) w_c> over the section of curve `curve` at (s, t) by tensor quadrature.
double section_average_axial(const VectorField& u, const LineMesh& mesh, const VesselGeometry& geom, int curve,
                             double s, double t, int n_r = 6, int n_theta = 16);

/// Dirichlet data on the vertices of facets with the marker; throws FemError
/// if the mesh carries no such facet.
void apply_dirichlet(BlockSystem& system, std::size_t field, const TetMesh& mesh, FacetMarker marker, double value);
/// Dirichlet data on a named vertex set of a line mesh (e.g. "INLET").
void apply_dirichlet(BlockSystem& system, std::size_t field, const LineMesh& mesh, const std::string& marker,
                     double value);

}  // namespace vasotrans
