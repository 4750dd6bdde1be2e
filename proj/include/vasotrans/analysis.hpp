#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vasotrans/eigensolver.hpp"
#include "vasotrans/mesh.hpp"
#include "vasotrans/sparse.hpp"

namespace vasotrans {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PoincareResult {
  double lambda1 = 0.0;
  double Kp = 0.0;  // lambda1^{-1/2} / eps
  double eps = 0.0;
  Vector vector;  // M-normalized, mean zero
};

/// Smallest nonzero Neumann eigenvalue of the section, constants deflated.
/// eps is the section diameter 2 R2.
PoincareResult poincare_constant(const SectionMesh& section, double R2, const EigenOptions& opt = {});

/// Disk (R1 = 0) or annulus triangulation with rings on both circles; thin
/// gaps use uniform rings, wide ones geometric rings.
SectionMesh poincare_section(double R1, double R2, int n_radial, int n_azimuthal);

struct StekloffResult {
  double lambda1 = 0.0;
  double trace_bound = 0.0;  // lambda1^{-1/2}
  double boundary_norm = 0.0;  // |u|_{L2(Gamma)} of the eigenvector
  Vector vector;               // A-normalized
};

/// Delta u = u in the mesh, du/dn = lambda u on the marked facets, natural elsewhere.
StekloffResult stekloff_constant(const TetMesh& mesh, FacetMarker gamma = FacetMarker::InnerWall,
                                 const EigenOptions& opt = {});

/// Cylinder of radius `outer` and height `height` with an unmeshed coaxial
/// hole of radius R1 whose wall is marked InnerWall.
TetMesh stekloff_mesh(double R1, double outer, double height, int n_azimuthal, int n_layers);

enum class ConstantKind { Poincare, Stekloff };

struct ConstantEntry {
  double R1 = 0.0;
  double R2 = 0.0;
  double eps = 0.0;
  double lambda1 = 0.0;
  double constant = 0.0;  // K_p for Poincare, lambda1^{-1/2} for Stekloff
  int level = 0;          // refinement level reached
  bool converged = false;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

struct TraceLawFit {
  double C = 0.0;
  double relative_residual = 0.0;  // |C g - y|_2 / |y|_2
};
/// y ~ C eps^{1/2} |ln eps|^{1/2} with C from least squares in log space.
TraceLawFit trace_law_fit(const std::vector<double>& eps, const std::vector<double>& y);

struct SweepControls {
  int n_radial = 4;
  int n_azimuthal = 16;
  int n_layers = 2;  // Stekloff only
  double outer = 1.0;   // Stekloff cylinder radius
  double height = 1.0;  // Stekloff cylinder height
  int max_levels = 4;   // regenerated meshes with doubled resolution
  double tolerance = 0.0;  // relative inter-mesh change; 0 picks 1e-3 (Poincare) or 5e-2 (Stekloff)
};

struct ConstantSweepResult {
  ConstantKind kind = ConstantKind::Poincare;
  std::vector<ConstantEntry> entries;
  std::optional<LinearFit> linear;   // Poincare: lambda1^{-1/2} against eps
  std::optional<TraceLawFit> trace;  // Stekloff: on the three smallest radii
  bool partial = false;              // some entry missed the tolerance
};

/// schedule: (R1, R2) pairs; for Stekloff R2 is ignored (the hole radius is R1).
ConstantSweepResult run_constant_sweep(ConstantKind kind, const std::vector<std::pair<double, double>>& schedule,
                                       const SweepControls& controls = {});

/// Header R1,R2,eps,lambda1,constant; then one '#'-prefixed fit summary line.
std::string sweep_csv(const ConstantSweepResult& r);

std::string to_string(ConstantKind k);

}  // namespace vasotrans
