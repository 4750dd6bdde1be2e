#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vasotrans/coupling.hpp"
#include "vasotrans/fem.hpp"
#include "vasotrans/geometry.hpp"
#include "vasotrans/mesh.hpp"
#include "vasotrans/sparse.hpp"

namespace vasotrans {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TimeGrid {
  double tau = 0.01;
  double T = 0.1;
  /// Throws ModelError unless tau > 0 and T is a multiple of tau.
  int steps() const;
};

/// Nodal vectors per field and stored time level.
struct TransientSolution {
  std::vector<std::string> fields;
  std::vector<double> times;
  std::vector<std::vector<Vector>> values;  // values[field][level]

  std::size_t field(const std::string& name) const;
  std::size_t levels() const { return times.size(); }
  const Vector& at(const std::string& name, std::size_t level) const { return values[field(name)][level]; }
  const Vector& final_value(const std::string& name) const { return values[field(name)].back(); }
  double final_time() const { return times.back(); }
  void push(double t, std::vector<Vector> v);
};

struct SolveStats {
  int steps = 0;
  int factorizations = 0;
  int iterative_solves = 0;
  int iterations = 0;
  std::size_t dofs = 0;
};

/// How d/dt of the A-weighted 1D mass is discretized.
/// Conservative: (M_A(t+) c+ - M_A(t) c) / tau, total solute exact under pulsation.
/// Analytic: M_A(t+) (c+ - c) / tau + M_dtA(t+) c+.
enum class TimeDerivative { Conservative, Analytic };

struct StepOptions {
  TimeGrid time;
  /// Store every n-th level (the initial and final levels are always kept); 0 keeps only those two.
  int keep_every = 1;
  /// Monolithic systems larger than this are solved by ILU0-BiCGSTAB.
  std::size_t direct_limit = 5000;
};

// ---------------------------------------------------------------------------
// 3D-3D (and 3D-3D-3D) reference model

/// One concentration field living on the union of `regions`.
struct DomainPhysics {
  std::string name;
  RegionSet regions;
  TensorField D = TensorField(1.0);
  VectorField u;
  ScalarField f;
  ScalarField initial;
};

/// Semi-permeable interface between two domains, realized on marked facets.
struct InterfacePhysics {
  std::size_t a = 0;  // domain indices
  std::size_t b = 1;
  FacetMarker marker = FacetMarker::GammaS;
  ScalarField xi = ScalarField(1.0);
};

struct MultidomainSpec {
  const TetMesh* mesh = nullptr;  // parent mesh carrying all regions
  std::vector<DomainPhysics> domains;
  std::vector<InterfacePhysics> interfaces;
  /// Homogeneous value on OuterBoundary for every domain touching it; natural otherwise.
  bool dirichlet_outer = true;
  double outer_value = 0.0;
  StepOptions step;
};

struct MultidomainResult {
  std::vector<TetMesh> submeshes;  // one per domain, parent maps into spec.mesh
  TransientSolution solution;      // fields named after the domains
  SolveStats stats;
};

MultidomainResult solve_reference_multidomain(const MultidomainSpec& spec);

// ---------------------------------------------------------------------------
// Reduced vessel equations

struct VesselPhysics {
  std::vector<VesselGeometry> geometry;  // one per curve
  VesselCoefficients coef;
  /// Initial cross-section average per (curve, s); constant 0 when empty.
  LineCoefficient initial;
};

/// Initial 1D data from an analytic 3D field by cross-section averaging.
LineCoefficient section_average_initial(const ScalarField& c0, const LineMesh& line,
                                        const std::vector<VesselGeometry>& geometry, int n_r = 6, int n_theta = 24);

struct Coupled3D1DSpec {
  const TetMesh* mesh = nullptr;
  const LineMesh* line = nullptr;
  TensorField D = TensorField(1.0);
  VectorField u;
  ScalarField f;
  ScalarField initial;
  VesselPhysics vessel;
  /// Circle points of the perimeter average; 0 picks default_circle_points.
  int n_quad = 0;
  ExchangeTest exchange = ExchangeTest::Plain;
  TimeDerivative time_derivative = TimeDerivative::Conservative;
  bool dirichlet_outer = true;
  double outer_value = 0.0;
  StepOptions step;
};

struct Coupled3D1DResult {
  TransientSolution solution;  // fields "c", "chat"
  SolveStats stats;
  int n_quad = 0;
};

Coupled3D1DResult solve_3d1d(const Coupled3D1DSpec& spec);

/// Vessel network on its own; `exterior` is a fixed perimeter average c_bar
/// (1D nodal vector) entering through xi P, omitted when absent.
struct NetworkSpec {
  const LineMesh* line = nullptr;
  VesselPhysics vessel;
  std::optional<Vector> exterior;
  /// Named line-mesh vertex sets held at fixed values.
  std::vector<std::pair<std::string, double>> dirichlet;
  TimeDerivative time_derivative = TimeDerivative::Conservative;
  StepOptions step;
};

TransientSolution solve_1d_network(const NetworkSpec& spec);
/// Steady state a_L(c, v) + b_L(w c - c_bar, v) = (A f, v) at time t.
Vector solve_1d_network_steady(const NetworkSpec& spec, double t = 0.0);
/// Assembled steady operator and load before boundary conditions, for residual checks.
SparseMatrix network_operator(const NetworkSpec& spec, double t, Vector* load = nullptr);

struct Coupled3D1D1DSpec {
  const TetMesh* mesh = nullptr;
  const LineMesh* line = nullptr;
  TensorField D = TensorField(1.0);
  VectorField u;
  ScalarField f;
  ScalarField initial;
  VesselPhysics pvs;     // annulus geometry [R1, R2]; coef.xi is xi_s
  VesselPhysics vessel;  // cylinder geometry [0, R1]; coef.xi is xi_v
  int n_quad = 0;
  TimeDerivative time_derivative = TimeDerivative::Conservative;
  bool dirichlet_outer = true;
  double outer_value = 0.0;
  StepOptions step;
};

struct Coupled3D1D1DResult {
  TransientSolution solution;  // fields "c", "chat_p", "chat_v"
  SolveStats stats;
  int n_quad = 0;
};

Coupled3D1D1DResult solve_3d1d1d(const Coupled3D1D1DSpec& spec);

/// Total solute: int c over the mesh (P1 mass) and int A chat over the line.
double total_mass_3d(const TetMesh& mesh, const Vector& c);
double total_mass_1d(const LineMesh& line, const std::vector<VesselGeometry>& geometry, const Vector& chat, double t);

// ---------------------------------------------------------------------------
// Model errors

/// L2 norm over `mesh` of c3 - E chat, with E the centerline extension,
/// by the degree-2 cell rule.
double l2_error_vs_extension(const TetMesh& mesh, const Vector& c3, const LineMesh& line, const Vector& chat);

/// L2 norm over `mesh` of a - b, where b lives on `other`. Quadrature points
/// are mapped through the parent cell map when `mesh` was extracted from
/// `other`, and located by point search otherwise.
double l2_difference(const TetMesh& mesh, const Vector& a, const TetMesh& other, const Vector& b);

/// L2 norm over `mesh` of c - g for an analytic g.
double l2_error_vs_field(const TetMesh& mesh, const Vector& c, const ScalarField& g, double t);

struct ModelErrors {
  double E_v = 0.0;
  double Etilde_v = 0.0;
  double E_s = 0.0;
  std::optional<double> E_p;
  std::optional<double> Etilde_p;
};

/// Example 1 errors at the final time: reference fields named `vessel_field`
/// (on submeshes[vessel_index]) and `tissue_field`, reduced fields "c" and "chat".
ModelErrors compute_model_error(const MultidomainResult& reference, std::size_t vessel_index,
                                std::size_t tissue_index, const Coupled3D1DResult& reduced, const TetMesh& mesh,
                                const LineMesh& line);

/// Example 2 errors: domains (vessel, pvs, tissue) against (chat_v, chat_p, c).
ModelErrors compute_model_error(const MultidomainResult& reference, std::size_t vessel_index,
                                std::size_t pvs_index, std::size_t tissue_index, const Coupled3D1D1DResult& reduced,
                                const TetMesh& mesh, const LineMesh& line);

/// rate_i = log(E_i / E_{i+1}) / log(R_i / R_{i+1}); first entry NaN.
std::vector<double> convergence_rates(const std::vector<double>& R, const std::vector<double>& E);

struct ErrorRow {
  double R = 0.0;
  ModelErrors errors;
};

/// CSV with header R,E_v,rate_Ev,Etilde_v,rate,E_s,rate_Es (17 significant digits).
std::string error_table_csv(const std::vector<ErrorRow>& rows);
/// CSV with header R1,E_v2,rate_Ev2,Etilde_v2,rate,E_p,rate_Ep,Etilde_p,rate_Etp,E_s,rate_Es.
std::string error_table_csv_3d1d1d(const std::vector<ErrorRow>& rows);

}  // namespace vasotrans
