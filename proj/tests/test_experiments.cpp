#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vasotrans/experiments.hpp"
#include "vasotrans/mesh_io.hpp"

using namespace vasotrans;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vasotrans_exp_" + name);
  fs::remove_all(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool mentions(const std::vector<std::string>& issues, const std::string& needle) {
  for (const auto& i : issues) {
    if (i.find(needle) != std::string::npos) return true;
  }
  return false;
}

const char* kYNetwork = R"({
  "curves": [
    {"points": [[0,0,0],[1,0,0]], "radius": {"profile": "constant", "R2": 0.1}},
    {"points": [[1,0,0],[1.6,0.8,0]], "radius": {"profile": "constant", "R2": 0.08}},
    {"points": [[1,0,0],[1.6,-0.8,0]], "radius": {"profile": "constant", "R2": 0.06}}
  ],
  "junctions": [{"members": [{"curve": 0, "end": "end"}, {"curve": 1, "end": "start"}, {"curve": 2, "end": "start"}]}],
  "inlets": [{"curve": 0, "end": "start"}],
  "outlets": [{"curve": 1, "end": "end"}, {"curve": 2, "end": "end"}]
})";

Json custom_config(const std::string& network_file) {
  Json c = default_config("custom");
  c["network"]["file"] = network_file;
  c["network"]["h"] = 0.1;
  c["physics"]["velocity"] = 0.5;
  c["time"] = {{"tau", 0.05}, {"T", 0.2}};
  return c;
}

}  // namespace

TEST(Config, DefaultsResolveAndValidate) {
  for (const auto& e : list_experiments()) {
    if (e.name == "custom") continue;  // needs a network file
    const Json r = resolve_config(default_config(e.name));
    EXPECT_TRUE(validate_config(r).empty()) << e.name;
  }
  EXPECT_THROW(default_config("nope"), ConfigError);
}

TEST(Config, TimeIsRequiredForTransientExperiments) {
  const Json r = resolve_config(Json{{"experiment", "example1"}});
  const auto issues = validate_config(r);
  EXPECT_TRUE(mentions(issues, "time.tau: required"));
  EXPECT_TRUE(mentions(issues, "time.T: required"));
  const Json ok = resolve_config(Json{{"experiment", "poincare"}});
  EXPECT_TRUE(validate_config(ok).empty());
}

TEST(Config, UnknownKeysAndWrongTypesAreNamed) {
  try {
    resolve_config(Json{{"experiment", "example1"}, {"mesh", {{"n_layer", 3}}}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e.issues(), "mesh.n_layer"));
  }
  Json c = default_config("example1");
  c["mesh"]["n_layers"] = "many";
  EXPECT_ANY_THROW({
    const auto issues = validate_config(resolve_config(c));
    if (!issues.empty()) throw ConfigError(issues);
  });
}

TEST(Config, RangeChecks) {
  Json c = default_config("example1");
  c["geometry"]["radii"] = {0.1, 0.7};
  EXPECT_TRUE(mentions(validate_config(resolve_config(c)), "geometry.radii"));
  c = default_config("example2");
  c["mesh"]["n_azimuthal"] = 20;
  EXPECT_TRUE(mentions(validate_config(resolve_config(c)), "multiple of 8"));
  c = default_config("example1");
  c["time"] = {{"tau", 0.03}, {"T", 0.1}};
  EXPECT_TRUE(mentions(validate_config(resolve_config(c)), "time.T"));
}

TEST(Config, DottedOverrides) {
  Json c = apply_overrides(default_config("example1"),
                           {"time.tau=0.02", "geometry.radii=[0.2,0.1]", "solver.time_derivative=analytic"});
  EXPECT_DOUBLE_EQ(c["time"]["tau"].get<double>(), 0.02);
  EXPECT_EQ(c["geometry"]["radii"].size(), 2u);
  EXPECT_EQ(c["solver"]["time_derivative"], "analytic");
  EXPECT_THROW(apply_overrides(c, {"novalue"}), ConfigError);
}

TEST(Rates, ObservedRatesOfPowerLaw) {
  const auto r = observed_rates({0.2, 0.1, 0.05}, {0.04 * 8, 0.04, 0.005});
  EXPECT_NEAR(r[0], 3.0, 1e-12);
  EXPECT_NEAR(r[1], 3.0, 1e-12);
}

TEST(Outputs, SnapshotSelectionAndPointCount) {
  const TetMesh m = build_box_mesh({0, 0, 0}, {1, 1, 1}, 2, 2, 2);
  TransientSolution s;
  s.fields = {"c"};
  s.values.resize(1);
  for (int k = 0; k <= 4; ++k) s.push(0.1 * k, {Vector(m.num_vertices(), double(k))});
  const std::string dir = scratch("snapshots");
  const auto files = emit_outputs(s, {{"c", {&m, nullptr, nullptr}}}, 0.1, 4, dir);
  ASSERT_EQ(files.size(), 2u);
  EXPECT_EQ(fs::path(files[0]).filename(), "c_t0.vtk");
  EXPECT_EQ(fs::path(files[1]).filename(), "c_t4.vtk");
  const auto back = read_vtk(files[1]);
  EXPECT_EQ(back.mesh.num_vertices(), m.num_vertices());
  EXPECT_EQ(back.point_data.at("c").size(), m.num_vertices());
  EXPECT_EQ(back.point_data.at("c")[0], 4.0);

  const auto every = emit_outputs(s, {{"c", {&m, nullptr, nullptr}}}, 0.1, 3, dir);
  EXPECT_EQ(every.size(), 3u);  // t0, t3 and the final t4
}

TEST(Outputs, LineFieldsWithExtension) {
  const TetMesh m = build_box_mesh({0, 0, 0}, {1, 1, 1}, 2, 2, 2);
  const LineMesh line = build_line_mesh(CenterlineGraph::single(Curve::straight({0.5, 0.5, 0}, {0.5, 0.5, 1})), 0.25);
  TransientSolution s;
  s.fields = {"chat"};
  s.values.resize(1);
  s.push(0.0, {Vector(line.num_vertices(), 1.0)});
  s.push(0.5, {Vector(line.num_vertices(), 2.0)});
  const auto files = emit_outputs(s, {{"chat", {nullptr, &line, &m}}}, 0.5, 0, scratch("line"));
  ASSERT_EQ(files.size(), 2u);
  EXPECT_NE(files[1].find("chat_ext_t1.vtk"), std::string::npos);
  const auto back = read_vtk(files[1]);
  EXPECT_EQ(back.mesh.num_vertices(), m.num_vertices());
  for (double v : back.point_data.at("chat")) EXPECT_DOUBLE_EQ(v, 2.0);
}

TEST(Run, InvalidConfigWritesManifestAndExitsTwo) {
  const std::string dir = scratch("invalid");
  Json c = default_config("example1");
  c.erase("time");
  const auto out = run_experiment(c, dir);
  EXPECT_EQ(out.exit_code, 2);
  const Json manifest = Json::parse(slurp(dir + "/manifest.json"));
  EXPECT_EQ(manifest["status"], "invalid");
  EXPECT_FALSE(manifest["issues"].empty());
}

TEST(Run, RuntimeFailureExitsOne) {
  const auto out = run_experiment(custom_config("/nonexistent/network.json"), scratch("missing"));
  EXPECT_EQ(out.exit_code, 1);
}

TEST(Run, CustomNetworkIsReproducible) {
  const std::string net = scratch("net.json");
  std::ofstream(net) << kYNetwork;
  const std::string a = scratch("custom_a"), b = scratch("custom_b");
  const auto ra = run_experiment(custom_config(net), a);
  const auto rb = run_experiment(custom_config(net), b);
  ASSERT_EQ(ra.exit_code, 0) << ra.message;
  ASSERT_EQ(rb.exit_code, 0);
  const std::string csv = slurp(a + "/network_final.csv");
  EXPECT_EQ(csv, slurp(b + "/network_final.csv"));
  EXPECT_EQ(csv.rfind("vertex,curve,s,x,y,z,chat\n", 0), 0u);
  const Json manifest = Json::parse(slurp(a + "/manifest.json"));
  EXPECT_EQ(manifest["status"], "ok");
  EXPECT_DOUBLE_EQ(manifest["config"]["time"]["T"].get<double>(), 0.2);
}

TEST(Run, ConvergenceCsvRatesRecompute) {
  Json c = default_config("convergence");
  c["space"]["cells_per_side"] = {2, 4, 8};
  c["space"]["T"] = 0.05;
  c["time_study"] = {{"cells_per_side", 2}, {"T", 0.2}, {"taus", {0.1, 0.05}}, {"reference_factor", 4}};
  const std::string dir = scratch("convergence");
  const auto out = run_experiment(c, dir);
  ASSERT_EQ(out.exit_code, 0) << out.message;
  std::istringstream csv(slurp(dir + "/convergence_space.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "h,tau,error,rate");
  std::vector<double> h, e, rate;
  while (std::getline(csv, line)) {
    std::vector<std::string> col;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) col.push_back(cell);
    h.push_back(std::stod(col[0]));
    e.push_back(std::stod(col[2]));
    if (col.size() > 3 && !col[3].empty()) rate.push_back(std::stod(col[3]));
  }
  ASSERT_EQ(h.size(), 3u);
  ASSERT_EQ(rate.size(), 2u);
  for (std::size_t i = 0; i < rate.size(); ++i) {
    EXPECT_NEAR(rate[i], std::log(e[i] / e[i + 1]) / std::log(h[i] / h[i + 1]), 1e-12);
  }
}
