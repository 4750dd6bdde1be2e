#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "vasotrans/experiments.hpp"
#include "vasotrans/parallel.hpp"

using namespace vasotrans;

namespace {

// Config document: the --config file, or the built-in defaults of --experiment.
Json load_document(const std::string& path, const std::string& experiment) {
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw ConfigError({"config: cannot read " + path});
    try {
      return Json::parse(f);
    } catch (const Json::parse_error& e) {
      throw ConfigError({std::string("config: ") + e.what()});
    }
  }
  if (experiment.empty()) throw ConfigError({"config: pass --config <file> or --experiment <name>"});
  return default_config(experiment);
}

void print_issues(const std::vector<std::string>& issues) {
  std::cerr << "invalid configuration:\n";
  for (const auto& i : issues) std::cerr << "  " << i << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-dimensional solute transport experiments"};
  app.require_subcommand(1);

  std::string config_path, experiment, out_dir;
  std::vector<std::string> sets;

  auto* run = app.add_subcommand("run", "run an experiment and write CSV, VTK and manifest.json");
  run->add_option("--config", config_path, "JSON config file");
  run->add_option("--experiment", experiment, "use the built-in config of this experiment");
  run->add_option("--set", sets, "override key=value (dotted keys, JSON values)")->take_all();
  run->add_option("--out", out_dir, "output directory (default results/<experiment>)");

  auto* validate = app.add_subcommand("validate", "check a config and print the resolved document");
  validate->add_option("--config", config_path, "JSON config file");
  validate->add_option("--experiment", experiment, "use the built-in config of this experiment");
  validate->add_option("--set", sets, "override key=value")->take_all();

  auto* list = app.add_subcommand("list-experiments", "list experiment names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (list->parsed()) {
    for (const auto& e : list_experiments()) std::cout << e.name << "\t" << e.summary << '\n';
    return 0;
  }

  Json doc;
  try {
    doc = apply_overrides(load_document(config_path, experiment), sets);
  } catch (const ConfigError& e) {
    print_issues(e.issues());
    return 2;
  }

  if (validate->parsed()) {
    try {
      const Json resolved = resolve_config(doc);
      const auto issues = validate_config(resolved);
      if (!issues.empty()) {
        print_issues(issues);
        return 2;
      }
      std::cout << resolved.dump(2) << '\n';
      return 0;
    } catch (const ConfigError& e) {
      print_issues(e.issues());
      return 2;
    }
  }

  if (out_dir.empty()) out_dir = "results/" + doc.value("experiment", std::string("unnamed"));
  std::cerr << "threads: " << thread_count() << ", output: " << out_dir << '\n';
  const auto outcome = run_experiment(doc, out_dir);
  if (outcome.exit_code != 0) std::cerr << outcome.message << '\n';
  for (const auto& f : outcome.files) std::cout << f << '\n';
  return outcome.exit_code;
}
