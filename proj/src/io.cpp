#include "ultrajump/io.hpp"

#include <charconv>
#include <fstream>

#include "ultrajump/error.hpp"

namespace ultrajump {

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::ConfigParseError, "cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc{} ? std::string(buf, end) : std::string("nan");
}

void write_matrix_market(const std::filesystem::path& path, const GeneratorMatrix& q) {
  auto out = open_for_write(path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << "% generator of the level-" << q.level << " chain\n";
  out << q.q.rows() << ' ' << q.q.cols() << ' ' << q.q.nonZeros() << '\n';
  for (Eigen::Index r = 0; r < q.q.outerSize(); ++r)
    for (GeneratorMatrix::Sparse::InnerIterator it(q.q, r); it; ++it)
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << format_double(it.value()) << '\n';
}

void write_triplets_csv(const std::filesystem::path& path, const GeneratorMatrix& q) {
  auto out = open_for_write(path);
  out << "row,col,value\n";
  for (Eigen::Index r = 0; r < q.q.outerSize(); ++r)
    for (GeneratorMatrix::Sparse::InnerIterator it(q.q, r); it; ++it)
      out << it.row() << ',' << it.col() << ',' << format_double(it.value()) << '\n';
}

nlohmann::json level_function_to_json(const LevelFunction& f) {
  return {{"level", f.level}, {"coeffs", f.coeffs}};
}

LevelFunction level_function_from_json(const nlohmann::json& j, const TreeSpace& space) {
  if (!j.is_object() || !j.contains("level") || !j.contains("coeffs"))
    throw Error(ErrorKind::ConfigParseError, "level function needs 'level' and 'coeffs'");
  LevelFunction f;
  try {
    f.level = j.at("level").get<int>();
    f.coeffs = j.at("coeffs").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigParseError, std::string("level function: ") + e.what());
  }
  if (f.level < space.k_min() || f.level > space.k_max())
    throw Error(ErrorKind::LevelOutOfWindow, "level " + std::to_string(f.level) + " outside the window");
  if (f.coeffs.size() != space.size(f.level))
    throw Error(ErrorKind::LevelMismatch, "expected " + std::to_string(space.size(f.level)) + " coefficients");
  return f;
}

CsvTable level_function_table(const std::string& name, const TreeSpace& space, const LevelFunction& f) {
  CsvTable table{name, {"ball", "word", "value"}, {}};
  for (std::size_t i = 0; i < f.size(); ++i)
    table.rows.push_back({std::to_string(i), format_word(space.address(f.level, i).digits), format_double(f[i])});
  return table;
}

CsvTable path_table(const std::string& name, const std::vector<PathSample>& paths) {
  CsvTable table{name, {"path_id", "time", "state"}, {}};
  for (std::size_t id = 0; id < paths.size(); ++id) {
    table.rows.push_back({std::to_string(id), "0", std::to_string(paths[id].initial)});
    for (const auto& e : paths[id].events)
      table.rows.push_back({std::to_string(id), format_double(e.time), std::to_string(e.state)});
  }
  return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  auto out = open_for_write(path);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) out << (c ? "," : "") << cells[c];
    out << '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
}

}  // namespace ultrajump
