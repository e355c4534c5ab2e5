// Command-line front end: ultrajump <experiment> --config file.json --out dir [--seed N] [--exact]
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "ultrajump/config.hpp"
#include "ultrajump/error.hpp"
#include "ultrajump/experiments.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitConfig = 1;
constexpr int kExitAssertion = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace ultrajump;

  CLI::App app{"Averaged jump processes on truncated ultrametric spaces"};
  app.set_version_flag("--version", tool_version());
  std::string experiment;
  std::string config_path;
  std::string preset_name;
  std::string out_dir = "ultrajump-out";
  std::optional<std::uint64_t> seed;
  bool exact = false;

  std::string names = "describe";
  for (const auto& n : experiment_names()) names += ", " + n;
  app.add_option("experiment", experiment, "One of: " + names)->required();
  auto* cfg = app.add_option("--config,-c", config_path, "Experiment config (JSON)");
  auto* pre = app.add_option("--preset,-p", preset_name, "Shipped preset instead of a config file");
  cfg->excludes(pre);
  app.add_option("--out,-o", out_dir, "Report directory");
  app.add_option("--seed,-s", seed, "Master seed (overrides parameters.seed)");
  app.add_flag("--exact", exact, "Re-check every sampled identity in rational arithmetic");
  app.footer("Presets: q2-stable-alpha1, q2-perturbed, q3-mixed, qp-haar, q2-wide.\n"
             "Exit status: 0 all checks pass, 2 a check failed, 1 configuration error.\n"
             "ULTRAJUMP_THREADS caps the number of simulation threads.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (experiment != "describe" && !is_experiment(experiment))
      throw Error(ErrorKind::ConfigParseError, "unknown experiment '" + experiment + "' (expected " + names + ")");
    if (config_path.empty() && preset_name.empty())
      throw Error(ErrorKind::ConfigParseError, "either --config or --preset is required");
    const auto config = config_path.empty() ? load_config(preset(preset_name)) : load_config_file(config_path);

    if (experiment == "describe") {
      std::cout << describe(config);
      return kExitPass;
    }
    RunOptions options;
    options.seed = seed;
    options.exact = exact;
    const auto result = run_experiment(experiment, config, options);
    write_reports(result, config, options, out_dir);

    for (const auto& c : result.checks)
      if (c.asserted && !c.pass)
        std::cout << "FAIL " << c.name << ": " << c.value << " " << c.relation << " " << c.threshold << "\n";
    std::cout << experiment << " on " << config.name << ": " << result.checks.size() << " checks, "
              << result.failures() << " failed; reports in " << (std::filesystem::path(out_dir) / experiment).string()
              << "\n";
    return result.pass() ? kExitPass : kExitAssertion;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
