#include "vasotrans/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "vasotrans/mesh_io.hpp"

namespace vasotrans {

namespace fs = std::filesystem;

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error([&] {
        std::string s = "invalid configuration:";
        for (const auto& i : issues) s += "\n  " + i;
        return s;
      }()),
      issues_(std::move(issues)) {}

std::vector<ExperimentInfo> list_experiments() {
  return {
      {"example1", "3D-3D reference against the 3D-1D model over vessel radii"},
      {"example2", "3D-3D-3D reference against the 3D-1D-1D model over inner radii"},
      {"poincare", "Neumann eigenvalue of disk and annulus sections"},
      {"stekloff", "Stekloff trace constant around a thin hole"},
      {"convergence", "manufactured-solution rates in space and time"},
      {"custom", "reduced transport on a vessel network read from JSON"},
  };
}

// ---------------------------------------------------------------------------
// Configuration

Json default_config(const std::string& experiment) {
  Json c;
  c["experiment"] = experiment;
  c["output"] = {{"vtk_every", 0}};
  c["solver"] = {{"direct_limit", 5000}, {"time_derivative", "conservative"}};
  if (experiment == "example1") {
    c["geometry"] = {{"radii", {0.1, 0.05, 0.025}}, {"length", 1.0}, {"outer_radius", 0.5}};
    c["mesh"] = {{"n_azimuthal", 32}, {"n_radial", 4}, {"n_layers", 32}, {"n_quad", 0}};
    c["physics"] = {{"D_v", 1.0},          {"D_s", 1.0},          {"xi", 1.0},          {"f_v", 0.5}, {"f_s", 0.5},
                    {"u_v", {0.5, 0, 0}},  {"u_s", {0.1, 0, 0}},  {"chat0", 1.0},       {"c0", 0.0}};
    c["time"] = {{"tau", 0.01}, {"T", 0.2}};
  } else if (experiment == "example2") {
    c["geometry"] = {{"radii", {0.1, 0.05, 0.025}}, {"ratio", 2.0}, {"half_width", 1.0}, {"height", 1.0}};
    c["mesh"] = {{"n_azimuthal", 96}, {"n_radial", 3}, {"n_layers", 16}, {"n_quad", 0}};
    c["physics"] = {{"D_v", 1.0},         {"D_p", 1.0},         {"D_s", 1.0},          {"xi_v", 1.0},
                    {"xi_p", 1.0},        {"f_v", 0.5},         {"f_p", 0.5},          {"f_s", 0.5},
                    {"u_v", {0.5, 0, 0}}, {"u_p", {0.1, 0, 0}}, {"u_s", {0.05, 0, 0}}, {"cv0", 1.0},
                    {"cp0", 0.0},         {"c0", 0.0}};
    c["time"] = {{"tau", 0.01}, {"T", 0.1}};
  } else if (experiment == "poincare") {
    c["geometry"] = {{"disk_radii", {0.025, 0.05, 0.1, 0.2, 0.4}},
                     {"ratios", {0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99}},
                     {"R2", 1.0}};
    c["mesh"] = {{"n_radial", 4}, {"n_azimuthal", 16}, {"max_levels", 4}, {"tolerance", 1e-3}};
  } else if (experiment == "stekloff") {
    c["geometry"] = {{"radii", {0.2, 0.1, 0.05, 0.025}}, {"outer", 1.0}, {"height", 1.0}};
    c["mesh"] = {{"n_azimuthal", 16}, {"n_layers", 2}, {"max_levels", 3}, {"tolerance", 5e-3}};
  } else if (experiment == "convergence") {
    c["space"] = {{"cells_per_side", {5, 10, 20, 40}}, {"T", 0.1}, {"tau_factor", 1.0}};
    c["time_study"] = {{"cells_per_side", 6}, {"T", 0.4}, {"taus", {0.1, 0.05, 0.025, 0.0125}}, {"reference_factor", 16}};
  } else if (experiment == "custom") {
    c["network"] = {{"file", ""}, {"h", 0.05}};
    c["physics"] = {{"D", 1.0}, {"xi", 0.0}, {"velocity", 0.0}, {"source", 0.0}, {"chat0", 0.0},
                    {"exterior", 0.0}};
    c["boundary"] = Json::array({Json{{"marker", "INLET"}, {"value", 1.0}}});
    c["time"] = {{"tau", 0.01}, {"T", 0.1}};
  } else {
    throw ConfigError({"experiment: unknown experiment '" + experiment + "'"});
  }
  return c;
}

namespace {

bool time_dependent(const std::string& e) { return e == "example1" || e == "example2" || e == "custom"; }

void compare_shape(const Json& def, const Json& user, const std::string& path, std::vector<std::string>& issues) {
  if (!user.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!def.contains(it.key())) {
      issues.push_back(key + ": unknown key");
      continue;
    }
    const Json& d = def.at(it.key());
    const Json& u = it.value();
    if (d.is_object()) {
      if (!u.is_object()) {
        issues.push_back(key + ": expected an object");
      } else {
        compare_shape(d, u, key, issues);
      }
    } else if (d.is_number() && !u.is_number()) {
      issues.push_back(key + ": expected a number");
    } else if (d.is_string() && !u.is_string()) {
      issues.push_back(key + ": expected a string");
    } else if (d.is_array() && !u.is_array()) {
      issues.push_back(key + ": expected an array");
    }
  }
}

double num_at(const Json& c, const std::string& ptr) { return c.at(Json::json_pointer(ptr)).get<double>(); }
int int_at(const Json& c, const std::string& ptr) { return c.at(Json::json_pointer(ptr)).get<int>(); }

Vec3 vec_at(const Json& c, const std::string& ptr) {
  const Json& a = c.at(Json::json_pointer(ptr));
  return {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
}

std::vector<double> list_at(const Json& c, const std::string& ptr) {
  return c.at(Json::json_pointer(ptr)).get<std::vector<double>>();
}

std::string key_of(const std::string& ptr) {
  std::string k = ptr.substr(1);
  std::replace(k.begin(), k.end(), '/', '.');
  return k;
}

// Checks below report into `issues` and never throw.
struct Checker {
  const Json& c;
  std::vector<std::string>& issues;

  bool present(const std::string& ptr) {
    if (c.contains(Json::json_pointer(ptr))) return true;
    issues.push_back(key_of(ptr) + ": required");
    return false;
  }
  void positive(const std::string& ptr) {
    if (present(ptr) && c.at(Json::json_pointer(ptr)).is_number() && !(num_at(c, ptr) > 0.0)) {
      issues.push_back(key_of(ptr) + ": must be positive");
    }
  }
  void nonnegative(const std::string& ptr) {
    if (present(ptr) && c.at(Json::json_pointer(ptr)).is_number() && !(num_at(c, ptr) >= 0.0)) {
      issues.push_back(key_of(ptr) + ": must be nonnegative");
    }
  }
  void at_least(const std::string& ptr, int lo) {
    if (!present(ptr)) return;
    const Json& v = c.at(Json::json_pointer(ptr));
    if (!v.is_number_integer() || v.get<long long>() < lo) {
      issues.push_back(key_of(ptr) + ": must be an integer >= " + std::to_string(lo));
    }
  }
  void vec3(const std::string& ptr) {
    if (!present(ptr)) return;
    const Json& v = c.at(Json::json_pointer(ptr));
    if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_number(); })) {
      issues.push_back(key_of(ptr) + ": expected three numbers");
    }
  }
  // Nonempty list of numbers in (lo, hi).
  bool numbers(const std::string& ptr, double lo, double hi, const std::string& what) {
    if (!present(ptr)) return false;
    const Json& v = c.at(Json::json_pointer(ptr));
    if (!v.is_array() || v.empty()) {
      issues.push_back(key_of(ptr) + ": expected a nonempty list");
      return false;
    }
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !(v[i].get<double>() > lo && v[i].get<double>() < hi)) {
        std::ostringstream os;
        os << key_of(ptr) << "[" << i << "]: " << what;
        issues.push_back(os.str());
        ok = false;
      }
    }
    return ok;
  }
  void time_grid() {
    const bool has_tau = present("/time/tau");
    const bool has_T = present("/time/T");
    if (!has_tau || !has_T) return;
    if (!c.at("time").at("tau").is_number() || !c.at("time").at("T").is_number()) return;
    const double tau = num_at(c, "/time/tau"), T = num_at(c, "/time/T");
    if (!(tau > 0.0)) {
      issues.push_back("time.tau: must be positive");
    } else if (!(T > 0.0)) {
      issues.push_back("time.T: must be positive");
    } else {
      try {
        (void)TimeGrid{tau, T}.steps();
      } catch (const ModelError&) {
        issues.push_back("time.T: must be a positive multiple of time.tau");
      }
    }
  }
};

}  // namespace

Json resolve_config(const Json& user) {
  if (!user.is_object()) throw ConfigError({"config: expected a JSON object"});
  if (!user.contains("experiment") || !user.at("experiment").is_string()) {
    throw ConfigError({"experiment: required"});
  }
  const std::string name = user.at("experiment").get<std::string>();
  Json base = default_config(name);
  std::vector<std::string> issues;
  compare_shape(base, user, "", issues);
  if (!issues.empty()) throw ConfigError(issues);
  if (time_dependent(name)) base.erase("time");
  base.merge_patch(user);
  return base;
}

Json apply_overrides(Json cfg, const std::vector<std::string>& assignments) {
  std::vector<std::string> issues;
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) {
      issues.push_back(a + ": expected key=value");
      continue;
    }
    std::string key = a.substr(0, eq);
    const std::string text = a.substr(eq + 1);
    Json value;
    try {
      value = Json::parse(text);
    } catch (const Json::parse_error&) {
      value = text;  // bare strings need no quotes
    }
    std::replace(key.begin(), key.end(), '.', '/');
    try {
      cfg[Json::json_pointer("/" + key)] = value;
    } catch (const Json::exception& e) {
      issues.push_back(a + ": " + e.what());
    }
  }
  if (!issues.empty()) throw ConfigError(issues);
  return cfg;
}

std::vector<std::string> validate_config(const Json& c) {
  std::vector<std::string> issues;
  Checker k{c, issues};
  if (!c.contains("experiment") || !c.at("experiment").is_string()) {
    issues.push_back("experiment: required");
    return issues;
  }
  const std::string e = c.at("experiment").get<std::string>();
  Json def;
  try {
    def = default_config(e);
  } catch (const ConfigError& err) {
    return err.issues();
  }
  compare_shape(def, c, "", issues);
  if (!issues.empty()) return issues;

  k.at_least("/output/vtk_every", 0);
  k.at_least("/solver/direct_limit", 1);
  if (k.present("/solver/time_derivative")) {
    const auto td = c.at("solver").at("time_derivative").get<std::string>();
    if (td != "conservative" && td != "analytic") {
      issues.push_back("solver.time_derivative: expected 'conservative' or 'analytic'");
    }
  }
  if (time_dependent(e)) k.time_grid();

  if (e == "example1") {
    k.positive("/geometry/length");
    k.positive("/geometry/outer_radius");
    if (c.at("geometry").at("outer_radius").is_number()) {
      k.numbers("/geometry/radii", 0.0, num_at(c, "/geometry/outer_radius"),
                "radius must lie strictly between 0 and geometry.outer_radius");
    }
    k.at_least("/mesh/n_azimuthal", 8);
    k.at_least("/mesh/n_radial", 1);
    k.at_least("/mesh/n_layers", 1);
    k.at_least("/mesh/n_quad", 0);
    for (const char* p : {"/physics/D_v", "/physics/D_s"}) k.positive(p);
    k.nonnegative("/physics/xi");
    for (const char* p : {"/physics/u_v", "/physics/u_s"}) k.vec3(p);
  } else if (e == "example2") {
    k.positive("/geometry/height");
    k.positive("/geometry/half_width");
    if (k.present("/geometry/ratio") && !(num_at(c, "/geometry/ratio") > 1.0)) {
      issues.push_back("geometry.ratio: R2 = ratio R1 must exceed R1 (ratio > 1)");
    } else if (c.at("geometry").at("half_width").is_number()) {
      k.numbers("/geometry/radii", 0.0, num_at(c, "/geometry/half_width") / num_at(c, "/geometry/ratio"),
                "R1 must be positive with ratio * R1 < geometry.half_width");
    }
    k.at_least("/mesh/n_azimuthal", 8);
    if (c.at("mesh").at("n_azimuthal").is_number_integer() && c.at("mesh").at("n_azimuthal").get<int>() % 8 != 0) {
      issues.push_back("mesh.n_azimuthal: must be a multiple of 8 for the square outer boundary");
    }
    k.at_least("/mesh/n_radial", 1);
    k.at_least("/mesh/n_layers", 1);
    k.at_least("/mesh/n_quad", 0);
    for (const char* p : {"/physics/D_v", "/physics/D_p", "/physics/D_s"}) k.positive(p);
    for (const char* p : {"/physics/xi_v", "/physics/xi_p"}) k.nonnegative(p);
    for (const char* p : {"/physics/u_v", "/physics/u_p", "/physics/u_s"}) k.vec3(p);
  } else if (e == "poincare") {
    k.numbers("/geometry/disk_radii", 0.0, 1e300, "radius must be positive");
    k.numbers("/geometry/ratios", 0.0, 1.0, "ratio R1/R2 must lie in (0, 1)");
    k.positive("/geometry/R2");
    k.at_least("/mesh/n_radial", 1);
    k.at_least("/mesh/n_azimuthal", 8);
    k.at_least("/mesh/max_levels", 0);
    k.positive("/mesh/tolerance");
  } else if (e == "stekloff") {
    k.positive("/geometry/outer");
    k.positive("/geometry/height");
    if (c.at("geometry").at("outer").is_number()) {
      k.numbers("/geometry/radii", 0.0, num_at(c, "/geometry/outer"), "radius must lie in (0, geometry.outer)");
    }
    k.at_least("/mesh/n_azimuthal", 8);
    k.at_least("/mesh/n_layers", 1);
    k.at_least("/mesh/max_levels", 0);
    k.positive("/mesh/tolerance");
  } else if (e == "convergence") {
    k.numbers("/space/cells_per_side", 0.5, 1e9, "must be a positive integer");
    k.positive("/space/T");
    k.positive("/space/tau_factor");
    k.at_least("/time_study/cells_per_side", 1);
    k.positive("/time_study/T");
    if (k.numbers("/time_study/taus", 0.0, 1e300, "must be positive") && c.at("time_study").at("T").is_number()) {
      const double T = num_at(c, "/time_study/T");
      for (double tau : list_at(c, "/time_study/taus")) {
        try {
          (void)TimeGrid{tau, T}.steps();
        } catch (const ModelError&) {
          issues.push_back("time_study.taus: every tau must divide time_study.T");
          break;
        }
      }
    }
    k.at_least("/time_study/reference_factor", 2);
  } else if (e == "custom") {
    if (k.present("/network/file") && c.at("network").at("file").get<std::string>().empty()) {
      issues.push_back("network.file: required");
    }
    k.positive("/network/h");
    k.positive("/physics/D");
    k.nonnegative("/physics/xi");
    if (k.present("/boundary")) {
      for (std::size_t i = 0; i < c.at("boundary").size(); ++i) {
        const Json& b = c.at("boundary")[i];
        if (!b.is_object() || !b.contains("marker") || !b.at("marker").is_string() || !b.contains("value") ||
            !b.at("value").is_number()) {
          issues.push_back("boundary[" + std::to_string(i) + "]: expected {\"marker\": name, \"value\": number}");
        }
      }
    }
  }
  return issues;
}

// ---------------------------------------------------------------------------
// Example drivers

namespace {

TimeGrid time_of(const Json& c) { return {num_at(c, "/time/tau"), num_at(c, "/time/T")}; }

LineCoefficient constant_line(double v) {
  return [v](int, double, double) { return v; };
}

Json to_json(const SizeRange& s) { return {{"h_min", s.h_min}, {"h_max", s.h_max}}; }

Json to_json(const SolveStats& s) {
  return {{"steps", s.steps},
          {"factorizations", s.factorizations},
          {"iterative_solves", s.iterative_solves},
          {"iterations", s.iterations},
          {"dofs", s.dofs}};
}

Json to_json(const MeshReport& r) {
  Json size = Json::object();
  for (const auto& [name, s] : r.size) size[name] = to_json(s);
  return {{"vertices", r.vertices}, {"cells", r.cells}, {"size", size}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CenterlineGraph straight_graph(const Vec3& a, const Vec3& b) { return CenterlineGraph::single(Curve::straight(a, b)); }

}  // namespace

Example1Params example1_params(const Json& c) {
  Example1Params p;
  p.radii = list_at(c, "/geometry/radii");
  p.length = num_at(c, "/geometry/length");
  p.outer_radius = num_at(c, "/geometry/outer_radius");
  p.n_azimuthal = int_at(c, "/mesh/n_azimuthal");
  p.n_radial = int_at(c, "/mesh/n_radial");
  p.n_layers = int_at(c, "/mesh/n_layers");
  p.n_quad = int_at(c, "/mesh/n_quad");
  p.D_v = num_at(c, "/physics/D_v");
  p.D_s = num_at(c, "/physics/D_s");
  p.xi = num_at(c, "/physics/xi");
  p.f_v = num_at(c, "/physics/f_v");
  p.f_s = num_at(c, "/physics/f_s");
  p.u_v = vec_at(c, "/physics/u_v");
  p.u_s = vec_at(c, "/physics/u_s");
  p.chat0 = num_at(c, "/physics/chat0");
  p.c0 = num_at(c, "/physics/c0");
  p.time = time_of(c);
  p.direct_limit = c.at("solver").at("direct_limit").get<std::size_t>();
  return p;
}

Example2Params example2_params(const Json& c) {
  Example2Params p;
  p.radii = list_at(c, "/geometry/radii");
  p.ratio = num_at(c, "/geometry/ratio");
  p.half_width = num_at(c, "/geometry/half_width");
  p.height = num_at(c, "/geometry/height");
  p.n_azimuthal = int_at(c, "/mesh/n_azimuthal");
  p.n_radial = int_at(c, "/mesh/n_radial");
  p.n_layers = int_at(c, "/mesh/n_layers");
  p.n_quad = int_at(c, "/mesh/n_quad");
  p.D_v = num_at(c, "/physics/D_v");
  p.D_p = num_at(c, "/physics/D_p");
  p.D_s = num_at(c, "/physics/D_s");
  p.xi_v = num_at(c, "/physics/xi_v");
  p.xi_p = num_at(c, "/physics/xi_p");
  p.f_v = num_at(c, "/physics/f_v");
  p.f_p = num_at(c, "/physics/f_p");
  p.f_s = num_at(c, "/physics/f_s");
  p.u_v = vec_at(c, "/physics/u_v");
  p.u_p = vec_at(c, "/physics/u_p");
  p.u_s = vec_at(c, "/physics/u_s");
  p.cv0 = num_at(c, "/physics/cv0");
  p.cp0 = num_at(c, "/physics/cp0");
  p.c0 = num_at(c, "/physics/c0");
  p.time = time_of(c);
  p.direct_limit = c.at("solver").at("direct_limit").get<std::size_t>();
  return p;
}

MeshReport mesh_report(const TetMesh& mesh) {
  MeshReport r;
  r.vertices = mesh.num_vertices();
  r.cells = mesh.num_cells();
  for (Region g : {Region::Vessel, Region::Pvs, Region::Surroundings}) {
    if (mesh.has_region(g)) r.size[to_string(g)] = size_range(mesh, g);
  }
  return r;
}

RadiusRun run_example1_radius(const Example1Params& p, double R, int keep_every) {
  const auto t0 = std::chrono::steady_clock::now();
  RadiusRun run;
  run.R = R;
  const auto section = build_section_triangulation(0.0, R, {OuterShape::Disk, p.outer_radius}, p.n_radial, p.n_azimuthal);
  run.mesh = extrude(section, p.length, p.n_layers, ExtrusionAxis::along_x());
  run.line = build_line_mesh(straight_graph({0.0, 0.0, 0.0}, {p.length, 0.0, 0.0}), p.length / p.n_layers);
  const StepOptions step{p.time, keep_every, p.direct_limit};

  MultidomainSpec ref;
  ref.mesh = &run.mesh;
  ref.domains = {
      {"vessel", {Region::Vessel}, TensorField(p.D_v), VectorField::constant(p.u_v), ScalarField(p.f_v),
       ScalarField(p.chat0)},
      {"tissue", {Region::Surroundings}, TensorField(p.D_s), VectorField::constant(p.u_s), ScalarField(p.f_s),
       ScalarField(p.c0)},
  };
  ref.interfaces = {{0, 1, FacetMarker::GammaS, ScalarField(p.xi)}};
  ref.step = step;
  const auto t_ref = std::chrono::steady_clock::now();
  run.reference = solve_reference_multidomain(ref);
  const double ref_seconds = seconds_since(t_ref);

  Coupled3D1DSpec red;
  red.mesh = &run.mesh;
  red.line = &run.line;
  red.D = TensorField(p.D_s);
  red.u = VectorField::constant(p.u_s);
  red.f = ScalarField(p.f_s);
  red.initial = ScalarField(p.c0);
  red.vessel.geometry = {VesselGeometry::cylinder(R, p.length)};
  red.vessel.coef.D = p.D_v;
  red.vessel.coef.xi = p.xi;
  red.vessel.coef.axial_velocity = constant_line(p.u_v.x);  // axis along x, uniform profile
  red.vessel.coef.source = constant_line(p.f_v);
  red.vessel.initial = constant_line(p.chat0);
  red.n_quad = p.n_quad;
  red.step = step;
  const auto t_red = std::chrono::steady_clock::now();
  const auto reduced = solve_3d1d(red);
  const double red_seconds = seconds_since(t_red);

  run.errors = compute_model_error(run.reference, 0, 1, reduced, run.mesh, run.line);
  run.reduced = reduced.solution;
  run.info = {{"R", R},
              {"mesh", to_json(mesh_report(run.mesh))},
              {"line_vertices", run.line.num_vertices()},
              {"n_quad", reduced.n_quad},
              {"reference", {{"stats", to_json(run.reference.stats)}, {"seconds", ref_seconds}}},
              {"reduced", {{"stats", to_json(reduced.stats)}, {"seconds", red_seconds}}},
              {"seconds", seconds_since(t0)}};
  return run;
}

RadiusRun run_example2_radius(const Example2Params& p, double R1, int keep_every) {
  const auto t0 = std::chrono::steady_clock::now();
  const double R2 = p.ratio * R1;
  RadiusRun run;
  run.R = R1;
  const auto section =
      build_section_triangulation(R1, R2, {OuterShape::Square, p.half_width}, p.n_radial, p.n_azimuthal);
  const double z0 = -0.5 * p.height;
  run.mesh = extrude(section, p.height, p.n_layers, ExtrusionAxis::along_z(z0));
  run.line = build_line_mesh(straight_graph({0.0, 0.0, z0}, {0.0, 0.0, z0 + p.height}), p.height / p.n_layers);
  const StepOptions step{p.time, keep_every, p.direct_limit};

  MultidomainSpec ref;
  ref.mesh = &run.mesh;
  ref.domains = {
      {"vessel", {Region::Vessel}, TensorField(p.D_v), VectorField::constant(p.u_v), ScalarField(p.f_v),
       ScalarField(p.cv0)},
      {"pvs", {Region::Pvs}, TensorField(p.D_p), VectorField::constant(p.u_p), ScalarField(p.f_p), ScalarField(p.cp0)},
      {"tissue", {Region::Surroundings}, TensorField(p.D_s), VectorField::constant(p.u_s), ScalarField(p.f_s),
       ScalarField(p.c0)},
  };
  ref.interfaces = {{0, 1, FacetMarker::GammaV, ScalarField(p.xi_v)}, {1, 2, FacetMarker::GammaS, ScalarField(p.xi_p)}};
  ref.step = step;
  const auto t_ref = std::chrono::steady_clock::now();
  run.reference = solve_reference_multidomain(ref);
  const double ref_seconds = seconds_since(t_ref);

  Coupled3D1D1DSpec red;
  red.mesh = &run.mesh;
  red.line = &run.line;
  red.D = TensorField(p.D_s);
  red.u = VectorField::constant(p.u_s);
  red.f = ScalarField(p.f_s);
  red.initial = ScalarField(p.c0);
  red.pvs.geometry = {VesselGeometry::annulus(R1, R2, p.height)};
  red.pvs.coef.D = p.D_p;
  red.pvs.coef.xi = p.xi_p;
  red.pvs.coef.axial_velocity = constant_line(p.u_p.z);  // axis along z
  red.pvs.coef.source = constant_line(p.f_p);
  red.pvs.initial = constant_line(p.cp0);
  red.vessel.geometry = {VesselGeometry::cylinder(R1, p.height)};
  red.vessel.coef.D = p.D_v;
  red.vessel.coef.xi = p.xi_v;
  red.vessel.coef.axial_velocity = constant_line(p.u_v.z);
  red.vessel.coef.source = constant_line(p.f_v);
  red.vessel.initial = constant_line(p.cv0);
  red.n_quad = p.n_quad;
  red.step = step;
  const auto t_red = std::chrono::steady_clock::now();
  const auto reduced = solve_3d1d1d(red);
  const double red_seconds = seconds_since(t_red);

  run.errors = compute_model_error(run.reference, 0, 1, 2, reduced, run.mesh, run.line);
  run.reduced = reduced.solution;
  run.info = {{"R1", R1},
              {"R2", R2},
              {"mesh", to_json(mesh_report(run.mesh))},
              {"line_vertices", run.line.num_vertices()},
              {"n_quad", reduced.n_quad},
              {"reference", {{"stats", to_json(run.reference.stats)}, {"seconds", ref_seconds}}},
              {"reduced", {{"stats", to_json(reduced.stats)}, {"seconds", red_seconds}}},
              {"seconds", seconds_since(t0)}};
  return run;
}

// ---------------------------------------------------------------------------
// Convergence suite

namespace {

constexpr double kPi = std::numbers::pi;
const Vec3 kMmsVelocity{0.2, 0.1, 0.05};

double mms_exact(const Vec3& x, double t) {
  return std::exp(-t) * std::sin(kPi * x.x) * std::sin(kPi * x.y) * std::sin(kPi * x.z);
}

// f = dc/dt - laplace c + u . grad c for D = 1 and a constant u.
double mms_source(const Vec3& x, double t) {
  const double e = std::exp(-t);
  const double sx = std::sin(kPi * x.x), sy = std::sin(kPi * x.y), sz = std::sin(kPi * x.z);
  const double cx = std::cos(kPi * x.x), cy = std::cos(kPi * x.y), cz = std::cos(kPi * x.z);
  const double c = e * sx * sy * sz;
  const double adv = kPi * e * (kMmsVelocity.x * cx * sy * sz + kMmsVelocity.y * sx * cy * sz + kMmsVelocity.z * sx * sy * cz);
  return (3.0 * kPi * kPi - 1.0) * c + adv;
}

MultidomainResult solve_mms(const TetMesh& mesh, const TimeGrid& time) {
  MultidomainSpec spec;
  spec.mesh = &mesh;
  spec.domains = {{"c", {Region::Surroundings}, TensorField(1.0), VectorField::constant(kMmsVelocity),
                   ScalarField::function(mms_source), ScalarField::function(mms_exact)}};
  spec.step.time = time;
  spec.step.keep_every = 0;
  return solve_reference_multidomain(spec);
}

}  // namespace

std::vector<ConvergencePoint> spatial_convergence(const std::vector<int>& cells_per_side, double T, double tau_factor) {
  std::vector<ConvergencePoint> out;
  for (int n : cells_per_side) {
    const double h = 1.0 / n;
    const int steps = std::max(1, static_cast<int>(std::ceil(T / (tau_factor * h * h) - 1e-9)));
    const TimeGrid time{T / steps, T};
    const TetMesh mesh = build_box_mesh({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, n, n, n);
    const auto res = solve_mms(mesh, time);
    const auto& sub = res.submeshes.front();
    out.push_back({h, time.tau, l2_error_vs_field(sub, res.solution.values[0].back(), ScalarField::function(mms_exact), T)});
  }
  return out;
}

std::vector<ConvergencePoint> temporal_convergence(int cells_per_side, double T, const std::vector<double>& taus,
                                                   int reference_factor) {
  if (taus.empty()) throw ModelError("no time steps given");
  const int n = cells_per_side;
  const TetMesh mesh = build_box_mesh({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, n, n, n);
  const double tau_ref = *std::min_element(taus.begin(), taus.end()) / reference_factor;
  const auto ref = solve_mms(mesh, {tau_ref, T});
  const Vector& c_ref = ref.solution.values[0].back();
  std::vector<ConvergencePoint> out;
  for (double tau : taus) {
    const auto res = solve_mms(mesh, {tau, T});
    Vector d = res.solution.values[0].back();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= c_ref[i];
    out.push_back({1.0 / n, tau, l2_error_vs_field(res.submeshes.front(), d, ScalarField(0.0), T)});
  }
  return out;
}

std::vector<double> observed_rates(const std::vector<double>& x, const std::vector<double>& e) {
  if (x.size() != e.size()) throw ModelError("rate table size mismatch");
  std::vector<double> r;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) r.push_back(std::log(e[i] / e[i + 1]) / std::log(x[i] / x[i + 1]));
  return r;
}

// ---------------------------------------------------------------------------
// Outputs

std::vector<std::string> emit_outputs(const TransientSolution& solution, const std::map<std::string, FieldOutput>& fields,
                                      double tau, int every_n_steps, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  std::vector<std::string> files;
  const std::size_t last = solution.levels() - 1;
  for (std::size_t level = 0; level < solution.levels(); ++level) {
    const long k = std::lround(solution.times[level] / tau);
    if (level != last && (every_n_steps <= 0 || k % every_n_steps != 0)) continue;
    for (const auto& [name, out] : fields) {
      const Vector& v = solution.at(name, level);
      const std::string stem = dir + "/" + name;
      const std::string suffix = "_t" + std::to_string(k) + ".vtk";
      if (out.mesh) {
        files.push_back(stem + suffix);
        write_vtk(files.back(), *out.mesh, {{name, v}});
      }
      if (out.line) {
        files.push_back(stem + suffix);
        write_vtk_polyline(files.back(), *out.line, {{name, v}});
        if (out.extend_to) {
          files.push_back(stem + "_ext" + suffix);
          write_vtk(files.back(), *out.extend_to, {{name, extend_1d_to_3d(*out.line, v, out.extend_to->vertices)}});
        }
      }
    }
  }
  return files;
}

namespace {

void write_text(const std::string& path, const std::string& text, std::vector<std::string>& files) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("write failed: " + path);
  files.push_back(path);
}

std::string fmt(double x) {
  if (std::isnan(x)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

struct RunContext {
  Json resolved;
  std::string dir;
  std::vector<std::string> files;
  Json runs = Json::array();
  Json summary = Json::object();
};

int vtk_every(const Json& c) { return c.at("output").at("vtk_every").get<int>(); }

// Per-radius runs on the worker pool. Rows of failed radii are left out of
// the CSV and recorded in the manifest, then the run is reported failed.
template <class RunOne, class Emit, class ErrorsJson, class Csv>
void sweep_radii(RunContext& ctx, const std::vector<double>& radii, RunOne run_one, Emit emit, ErrorsJson errors_json,
                 Csv csv) {
  const int every = vtk_every(ctx.resolved);
  struct Outcome {
    std::optional<RadiusRun> run;
    std::string error;
  };
  const auto outcomes = run_pool(radii.size(), [&](std::size_t i) {
    Outcome o;
    try {
      RadiusRun r = run_one(radii[i], every);
      if (every > 0) r.info["files"] = emit(r, ctx.dir + "/R" + std::to_string(i), every);
      r.reference = {};
      r.reduced = {};
      o.run = std::move(r);
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    return o;
  });
  std::vector<ErrorRow> rows;
  std::string failures;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (!o.run) {
      ctx.runs.push_back({{"R", radii[i]}, {"status", "failed"}, {"error", o.error}});
      failures += (failures.empty() ? "" : "; ") + std::string("R=") + fmt(radii[i]) + ": " + o.error;
      continue;
    }
    rows.push_back({o.run->R, o.run->errors});
    Json info = o.run->info;
    info["status"] = "ok";
    info["errors"] = errors_json(o.run->errors);
    if (info.contains("files")) {
      for (const auto& f : info["files"]) ctx.files.push_back(f.get<std::string>());
      info.erase("files");
    }
    ctx.runs.push_back(info);
  }
  write_text(ctx.dir + "/model_error.csv", csv(rows), ctx.files);
  if (!failures.empty()) throw ModelError(failures);
}

void run_example1(RunContext& ctx) {
  const auto p = example1_params(ctx.resolved);
  sweep_radii(
      ctx, p.radii, [&](double R, int every) { return run_example1_radius(p, R, every); },
      [&](const RadiusRun& r, const std::string& sub, int every) {
        const auto& sm = r.reference.submeshes;
        auto a = emit_outputs(r.reference.solution, {{"vessel", {&sm[0]}}, {"tissue", {&sm[1]}}}, p.time.tau, every, sub);
        auto b = emit_outputs(r.reduced, {{"c", {&r.mesh}}, {"chat", {nullptr, &r.line, &sm[0]}}}, p.time.tau, every, sub);
        a.insert(a.end(), b.begin(), b.end());
        return a;
      },
      [](const ModelErrors& e) { return Json{{"E_v", e.E_v}, {"Etilde_v", e.Etilde_v}, {"E_s", e.E_s}}; },
      error_table_csv);
}

void run_example2(RunContext& ctx) {
  const auto p = example2_params(ctx.resolved);
  sweep_radii(
      ctx, p.radii, [&](double R1, int every) { return run_example2_radius(p, R1, every); },
      [&](const RadiusRun& r, const std::string& sub, int every) {
        const auto& sm = r.reference.submeshes;
        auto a = emit_outputs(r.reference.solution, {{"vessel", {&sm[0]}}, {"pvs", {&sm[1]}}, {"tissue", {&sm[2]}}},
                              p.time.tau, every, sub);
        auto b = emit_outputs(r.reduced,
                              {{"c", {&r.mesh}}, {"chat_v", {nullptr, &r.line, &sm[0]}}, {"chat_p", {nullptr, &r.line, &sm[1]}}},
                              p.time.tau, every, sub);
        a.insert(a.end(), b.begin(), b.end());
        return a;
      },
      [](const ModelErrors& e) {
        return Json{{"E_v2", e.E_v}, {"Etilde_v2", e.Etilde_v}, {"E_p", e.E_p.value_or(0.0)},
                    {"Etilde_p", e.Etilde_p.value_or(0.0)}, {"E_s", e.E_s}};
      },
      error_table_csv_3d1d1d);
}

Json sweep_summary(const ConstantSweepResult& r) {
  Json s = {{"partial", r.partial}};
  if (r.linear) s["linear"] = {{"slope", r.linear->slope}, {"intercept", r.linear->intercept}, {"r2", r.linear->r_squared}};
  if (r.trace) s["trace"] = {{"C", r.trace->C}, {"relative_residual", r.trace->relative_residual}};
  return s;
}

void run_poincare(RunContext& ctx) {
  const Json& c = ctx.resolved;
  SweepControls sc;
  sc.n_radial = int_at(c, "/mesh/n_radial");
  sc.n_azimuthal = int_at(c, "/mesh/n_azimuthal");
  sc.max_levels = int_at(c, "/mesh/max_levels");
  sc.tolerance = num_at(c, "/mesh/tolerance");
  std::vector<std::pair<double, double>> disk, annulus;
  for (double R : list_at(c, "/geometry/disk_radii")) disk.emplace_back(0.0, R);
  const double R2 = num_at(c, "/geometry/R2");
  for (double q : list_at(c, "/geometry/ratios")) annulus.emplace_back(q * R2, R2);
  auto sweeps = run_pool(2, [&](std::size_t i) { return run_constant_sweep(ConstantKind::Poincare, i ? annulus : disk, sc); });
  write_text(ctx.dir + "/poincare_disk.csv", sweep_csv(sweeps[0]), ctx.files);
  write_text(ctx.dir + "/poincare_annulus.csv", sweep_csv(sweeps[1]), ctx.files);
  double lo = 1e300, hi = 0.0;
  for (const auto& e : sweeps[1].entries) {
    lo = std::min(lo, e.constant);
    hi = std::max(hi, e.constant);
  }
  ctx.summary = {{"disk", sweep_summary(sweeps[0])}, {"annulus", sweep_summary(sweeps[1])}, {"Kp_variation", hi / lo}};
}

void run_stekloff(RunContext& ctx) {
  const Json& c = ctx.resolved;
  SweepControls sc;
  sc.n_azimuthal = int_at(c, "/mesh/n_azimuthal");
  sc.n_layers = int_at(c, "/mesh/n_layers");
  sc.max_levels = int_at(c, "/mesh/max_levels");
  sc.tolerance = num_at(c, "/mesh/tolerance");
  sc.outer = num_at(c, "/geometry/outer");
  sc.height = num_at(c, "/geometry/height");
  std::vector<std::pair<double, double>> schedule;
  for (double R : list_at(c, "/geometry/radii")) schedule.emplace_back(R, sc.outer);
  const auto r = run_constant_sweep(ConstantKind::Stekloff, schedule, sc);
  write_text(ctx.dir + "/stekloff.csv", sweep_csv(r), ctx.files);
  ctx.summary = sweep_summary(r);
}

void run_convergence(RunContext& ctx) {
  const Json& c = ctx.resolved;
  const auto levels = c.at("space").at("cells_per_side").get<std::vector<int>>();
  const auto space = spatial_convergence(levels, num_at(c, "/space/T"), num_at(c, "/space/tau_factor"));
  const auto time = temporal_convergence(int_at(c, "/time_study/cells_per_side"), num_at(c, "/time_study/T"),
                                         list_at(c, "/time_study/taus"), int_at(c, "/time_study/reference_factor"));
  auto table = [](const std::vector<ConvergencePoint>& pts, bool by_h) {
    std::vector<double> x, e;
    for (const auto& p : pts) {
      x.push_back(by_h ? p.h : p.tau);
      e.push_back(p.error);
    }
    const auto r = observed_rates(x, e);
    std::ostringstream os;
    os << "h,tau,error,rate\n";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      os << fmt(pts[i].h) << ',' << fmt(pts[i].tau) << ',' << fmt(pts[i].error) << ',' << (i ? fmt(r[i - 1]) : "")
         << '\n';
    }
    return std::make_pair(os.str(), r);
  };
  const auto [space_csv, space_rates] = table(space, true);
  const auto [time_csv, time_rates] = table(time, false);
  write_text(ctx.dir + "/convergence_space.csv", space_csv, ctx.files);
  write_text(ctx.dir + "/convergence_time.csv", time_csv, ctx.files);
  ctx.summary = {{"space_rates", space_rates}, {"time_rates", time_rates}};
}

void run_custom(RunContext& ctx) {
  const Json& c = ctx.resolved;
  const auto net = load_network_file(c.at("network").at("file").get<std::string>());
  net.graph.validate();
  const LineMesh line = build_line_mesh(net.graph, num_at(c, "/network/h"));
  NetworkSpec spec;
  spec.line = &line;
  spec.vessel.geometry = net.geometry;
  spec.vessel.coef.D = num_at(c, "/physics/D");
  spec.vessel.coef.xi = num_at(c, "/physics/xi");
  spec.vessel.coef.axial_velocity = constant_line(num_at(c, "/physics/velocity"));
  spec.vessel.coef.source = constant_line(num_at(c, "/physics/source"));
  spec.vessel.initial = constant_line(num_at(c, "/physics/chat0"));
  if (spec.vessel.coef.xi > 0.0) spec.exterior = Vector(line.num_vertices(), num_at(c, "/physics/exterior"));
  for (const auto& b : c.at("boundary")) {
    const auto marker = b.at("marker").get<std::string>();
    if (!line.markers.count(marker)) throw ModelError("unknown line marker '" + marker + "'");
    spec.dirichlet.emplace_back(marker, b.at("value").get<double>());
  }
  spec.time_derivative =
      c.at("solver").at("time_derivative") == "analytic" ? TimeDerivative::Analytic : TimeDerivative::Conservative;
  spec.step = {time_of(c), vtk_every(c), c.at("solver").at("direct_limit").get<std::size_t>()};
  const auto sol = solve_1d_network(spec);
  std::ostringstream os;
  os << "vertex,curve,s,x,y,z,chat\n";
  const Vector& v = sol.final_value("chat");
  for (std::size_t i = 0; i < line.num_vertices(); ++i) {
    os << i << ',' << line.vertex_curve[i] << ',' << fmt(line.vertex_s[i]) << ',' << fmt(line.points[i].x) << ','
       << fmt(line.points[i].y) << ',' << fmt(line.points[i].z) << ',' << fmt(v[i]) << '\n';
  }
  write_text(ctx.dir + "/network_final.csv", os.str(), ctx.files);
  if (vtk_every(c) > 0) {
    auto f = emit_outputs(sol, {{"chat", {nullptr, &line, nullptr}}}, spec.step.time.tau, vtk_every(c), ctx.dir);
    ctx.files.insert(ctx.files.end(), f.begin(), f.end());
  }
  ctx.summary = {{"line_vertices", line.num_vertices()},
                 {"total_mass", total_mass_1d(line, net.geometry, v, sol.final_time())}};
}

}  // namespace

RunOutcome run_experiment(const Json& user_config, const std::string& out_dir) {
  RunOutcome out;
  Json manifest;
  manifest["input"] = user_config;
  manifest["threads"] = thread_count();
  RunContext ctx;
  ctx.dir = out_dir;
  const auto t0 = std::chrono::steady_clock::now();

  auto write_manifest = [&] {
    manifest["files"] = ctx.files;
    manifest["seconds"] = seconds_since(t0);
    const std::string path = out_dir + "/manifest.json";
    std::ofstream f(path);
    if (f) {
      f << manifest.dump(2) << '\n';
      out.files = ctx.files;
      out.files.push_back(path);
    } else {
      out.exit_code = 1;
      out.message += (out.message.empty() ? "" : "\n") + std::string("cannot write ") + path;
    }
  };

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    out.exit_code = 1;
    out.message = "cannot create output directory " + out_dir + ": " + ec.message();
    return out;
  }

  std::vector<std::string> issues;
  try {
    ctx.resolved = resolve_config(user_config);
    issues = validate_config(ctx.resolved);
  } catch (const ConfigError& e) {
    issues = e.issues();
  }
  if (!issues.empty()) {
    manifest["status"] = "invalid";
    manifest["issues"] = issues;
    out.exit_code = 2;
    out.message = ConfigError(issues).what();
    write_manifest();
    return out;
  }
  manifest["config"] = ctx.resolved;

  const std::string e = ctx.resolved.at("experiment").get<std::string>();
  try {
    if (e == "example1") {
      run_example1(ctx);
    } else if (e == "example2") {
      run_example2(ctx);
    } else if (e == "poincare") {
      run_poincare(ctx);
    } else if (e == "stekloff") {
      run_stekloff(ctx);
    } else if (e == "convergence") {
      run_convergence(ctx);
    } else if (e == "custom") {
      run_custom(ctx);
    }
    manifest["status"] = "ok";
  } catch (const std::exception& err) {
    manifest["status"] = "failed";
    manifest["error"] = err.what();
    out.exit_code = 1;
    out.message = err.what();
  }
  manifest["runs"] = ctx.runs;
  manifest["summary"] = ctx.summary;
  write_manifest();
  return out;
}

}  // namespace vasotrans
