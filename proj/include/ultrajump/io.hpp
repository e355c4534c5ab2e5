#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ultrajump/markov.hpp"
#include "ultrajump/sim.hpp"

namespace ultrajump {

/// Coordinate-format Matrix Market file, 1-based, `%.17g` values.
void write_matrix_market(const std::filesystem::path& path, const GeneratorMatrix& q);

/// "row,col,value" triplets, 0-based, in row-major order.
void write_triplets_csv(const std::filesystem::path& path, const GeneratorMatrix& q);

/// A small table with a header row; cells are written verbatim.
struct CsvTable {
  std::string name;  // file stem
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// {"level":k,"coeffs":[...]}; reading checks the length against the space.
nlohmann::json level_function_to_json(const LevelFunction& f);
LevelFunction level_function_from_json(const nlohmann::json& j, const TreeSpace& space);

/// One row per ball: index, digit word, value.
CsvTable level_function_table(const std::string& name, const TreeSpace& space, const LevelFunction& f);

/// Ensemble paths as (path_id, time, state) rows: the initial state at time 0,
/// then one row per jump.
CsvTable path_table(const std::string& name, const std::vector<PathSample>& paths);

/// Shortest text that reads back to the same double.
std::string format_double(double value);

}  // namespace ultrajump
