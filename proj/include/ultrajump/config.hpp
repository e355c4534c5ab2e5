#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ultrajump/forms.hpp"
#include "ultrajump/kernel.hpp"
#include "ultrajump/space.hpp"

namespace ultrajump {

using Json = nlohmann::json;

/// {"type":"padic","p":2,"window":[0,2]} or
/// {"type":"tree","q":2.0,"window":[kmin,K],"branching":..., "weights":{...}, "root_mass":1.0}
SpaceConfig space_config_from_json(const Json& j);
SpacePtr space_from_json(const Json& j);

LambdaProfile lambda_from_json(const Json& j, const SpacePtr& space);

/// Kernel variants: kigami, mixed, perturbed, table. `base_dir` resolves
/// relative matrix_csv paths.
JumpKernel kernel_from_json(const Json& j, const SpacePtr& space, const std::filesystem::path& base_dir = {});

/// A leaf function from "uniform", {"ball":{"level":k,"word":"0"}},
/// {"leaf":"01"} or {"values":[...]}.
LevelFunction leaf_function_from_json(const Json& j, const TreeSpace& space);

/// Reads a dense square matrix of numbers from CSV.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

struct ExperimentConfig {
  std::string name;
  Json raw;
  SpacePtr space;
  JumpKernel kernel;
  Json parameters;
  std::filesystem::path base_dir;
};

/// Parses {"space":..., "kernel":..., "parameters":...} or {"preset":"name",
/// "parameters":{overrides}}. Any problem is reported as ConfigParseError.
ExperimentConfig load_config(const Json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config_file(const std::filesystem::path& path);

std::vector<std::string> preset_names();
/// Full config JSON of a shipped preset; throws ConfigParseError if unknown.
Json preset(const std::string& name);

/// FNV-1a over the canonical dump.
std::string config_hash(const Json& j);

}  // namespace ultrajump
