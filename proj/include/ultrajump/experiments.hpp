#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ultrajump/config.hpp"
#include "ultrajump/io.hpp"

namespace ultrajump {

/// One verdict of an experiment. `relation` is how `value` is compared with
/// `threshold` ("<=", ">=", "==", "true"). Control checks encode expected
/// failures of an identity on a kernel outside its hypothesis; they count
/// towards the verdict like any other check. Informational entries
/// (`asserted == false`) are reported but never fail a run.
struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation = "<=";
  bool pass = false;
  bool asserted = true;
  bool control = false;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<Check> checks;
  Json details = Json::object();
  std::vector<CsvTable> tables;
  /// Generators to export, named by file stem.
  std::vector<std::pair<std::string, GeneratorMatrix>> generators;

  bool pass() const;
  std::size_t failures() const;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides parameters.seed
  bool exact = false;                 // rational re-check of every sampled identity
};

/// validate, energies, commutation, intertwine, lumpability, tightness,
/// simulate, fdd, envelope, full-suite.
const std::vector<std::string>& experiment_names();
bool is_experiment(const std::string& name);

/// Seed actually used by a run.
std::uint64_t effective_seed(const ExperimentConfig& config, const RunOptions& options);

/// Runs one experiment. Library errors propagate; an unknown name is a
/// ConfigParseError.
ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& config, const RunOptions& options);

/// Summary document: tool version, config name and hash, seed, verdict,
/// checks and experiment details. Contains no timings, so it is
/// bit-identical across runs.
Json summary_json(const ExperimentResult& result, const ExperimentConfig& config, const RunOptions& options);

/// Writes summary.json, checks.csv, the extra tables and the generator
/// exports under out_dir/<experiment>/.
void write_reports(const ExperimentResult& result, const ExperimentConfig& config, const RunOptions& options,
                   const std::filesystem::path& out_dir);

/// Human-readable overview of the config; enumeration only.
std::string describe(const ExperimentConfig& config);

std::string tool_version();

}  // namespace ultrajump
