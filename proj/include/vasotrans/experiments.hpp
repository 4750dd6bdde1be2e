#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vasotrans/analysis.hpp"
#include "vasotrans/mesh.hpp"
#include "vasotrans/models.hpp"

namespace vasotrans {

using Json = nlohmann::json;

/// Itemized configuration problems; each entry names the offending key.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

struct ExperimentInfo {
  std::string name;
  std::string summary;
};
std::vector<ExperimentInfo> list_experiments();

/// Complete built-in configuration of an experiment.
Json default_config(const std::string& experiment);
/// Defaults overlaid with the user document. time.tau and time.T are not
/// defaulted for time-dependent experiments and must be present.
Json resolve_config(const Json& user);
/// Dotted-key overrides, e.g. "time.tau=0.005" or "radii=[0.1,0.05]".
Json apply_overrides(Json cfg, const std::vector<std::string>& assignments);
std::vector<std::string> validate_config(const Json& resolved);

// ---------------------------------------------------------------------------
// Example drivers

struct Example1Params {
  std::vector<double> radii{0.1, 0.05, 0.025};
  double length = 1.0;
  double outer_radius = 0.5;
  int n_azimuthal = 32;
  int n_radial = 4;
  int n_layers = 32;
  int n_quad = 0;
  double D_v = 1.0, D_s = 1.0, xi = 1.0;
  double f_v = 0.5, f_s = 0.5;
  Vec3 u_v{0.5, 0.0, 0.0};
  Vec3 u_s{0.1, 0.0, 0.0};
  double chat0 = 1.0, c0 = 0.0;
  TimeGrid time{0.01, 0.2};
  std::size_t direct_limit = 5000;
};
Example1Params example1_params(const Json& resolved);

struct Example2Params {
  std::vector<double> radii{0.1, 0.05, 0.025};  // R1
  double ratio = 2.0;                            // R2 / R1
  double half_width = 1.0;
  double height = 1.0;
  int n_azimuthal = 96;
  int n_radial = 3;
  int n_layers = 16;
  int n_quad = 0;
  double D_v = 1.0, D_p = 1.0, D_s = 1.0;
  double xi_v = 1.0, xi_p = 1.0;
  double f_v = 0.5, f_p = 0.5, f_s = 0.5;
  Vec3 u_v{0.5, 0.0, 0.0};
  Vec3 u_p{0.1, 0.0, 0.0};
  Vec3 u_s{0.05, 0.0, 0.0};
  double cv0 = 1.0, cp0 = 0.0, c0 = 0.0;
  TimeGrid time{0.01, 0.1};
  std::size_t direct_limit = 5000;
};
Example2Params example2_params(const Json& resolved);

struct MeshReport {
  std::size_t vertices = 0;
  std::size_t cells = 0;
  std::map<std::string, SizeRange> size;  // per region name
};
MeshReport mesh_report(const TetMesh& mesh);

/// Everything one radius of an example produces.
struct RadiusRun {
  double R = 0.0;
  ModelErrors errors;
  Json info;  // mesh statistics, solver statistics, timings
  TetMesh mesh;
  LineMesh line;
  MultidomainResult reference;
  TransientSolution reduced;
};

/// Example 1 (3D-3D against 3D-1D) for one vessel radius.
RadiusRun run_example1_radius(const Example1Params& p, double R, int keep_every = 0);
/// Example 2 (3D-3D-3D against 3D-1D-1D) for one inner radius R1.
RadiusRun run_example2_radius(const Example2Params& p, double R1, int keep_every = 0);

/// Runs jobs on up to thread_count() workers; results in index order.
template <class F>
auto run_pool(std::size_t n, F&& job) -> std::vector<decltype(job(std::size_t{}))>;

// ---------------------------------------------------------------------------
// Convergence suite

struct ConvergencePoint {
  double h = 0.0;
  double tau = 0.0;
  double error = 0.0;
};

/// Manufactured c = exp(-t) sin(pi x) sin(pi y) sin(pi z) on the unit cube,
/// tau = tau_factor h^2, error in L2 at T.
std::vector<ConvergencePoint> spatial_convergence(const std::vector<int>& cells_per_side, double T, double tau_factor);
/// Same problem on a fixed n^3 mesh, tau halved each level; errors against a
/// run with tau_min / reference_factor on the same mesh.
std::vector<ConvergencePoint> temporal_convergence(int cells_per_side, double T, const std::vector<double>& taus,
                                                   int reference_factor);
/// log(E_i / E_{i+1}) / log(x_i / x_{i+1}) for consecutive points.
std::vector<double> observed_rates(const std::vector<double>& x, const std::vector<double>& e);

// ---------------------------------------------------------------------------
// Outputs and the CLI entry

/// One emitted field: either on a 3D mesh, or a 1D field with an optional
/// 3D mesh it is extended onto for side-by-side viewing.
struct FieldOutput {
  const TetMesh* mesh = nullptr;
  const LineMesh* line = nullptr;
  const TetMesh* extend_to = nullptr;
};

/// Snapshots whose step index is a multiple of every_n_steps (and the final
/// one) as <field>_t<index>.vtk; 1D fields also as <field>_ext_t<index>.vtk.
std::vector<std::string> emit_outputs(const TransientSolution& solution, const std::map<std::string, FieldOutput>& fields,
                                      double tau, int every_n_steps, const std::string& dir);

struct RunOutcome {
  int exit_code = 0;  // 0 success, 1 runtime failure, 2 validation error
  std::vector<std::string> files;
  std::string message;
};

/// Validates, runs and writes CSVs, VTK series and manifest.json into out_dir.
/// The manifest is written even when the run fails.
RunOutcome run_experiment(const Json& user_config, const std::string& out_dir);

}  // namespace vasotrans

#include "vasotrans/experiments_pool.hpp"
