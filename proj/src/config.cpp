#include "ultrajump/config.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ultrajump/error.hpp"

namespace ultrajump {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::ConfigParseError, what); }

std::pair<int, int> parse_window(const Json& j) {
  if (!j.contains("window") || !j["window"].is_array() || j["window"].size() != 2)
    bad("space.window must be [k_min, K]");
  return {j["window"][0].get<int>(), j["window"][1].get<int>()};
}

std::vector<int> parse_signs(const Json& j, std::size_t leaves) {
  std::vector<int> signs;
  if (j.is_string()) {
    for (char c : j.get<std::string>()) {
      if (c == '+') signs.push_back(1);
      else if (c == '-') signs.push_back(-1);
      else bad("signs string may only contain '+' and '-'");
    }
  } else if (j.is_array()) {
    for (const auto& v : j) signs.push_back(v.get<int>());
  } else {
    bad("signs must be a string or an array");
  }
  if (signs.size() != leaves) bad("signs need one entry per leaf (" + std::to_string(leaves) + ")");
  return signs;
}

std::size_t ball_from_json(const Json& j, const TreeSpace& space, int level) {
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  if (!j.is_string()) bad("ball must be a digit word or an index");
  BallAddress a;
  a.level = level;
  a.digits = parse_word(j.get<std::string>());
  return space.index_of(a);
}

}  // namespace

SpaceConfig space_config_from_json(const Json& j) {
  if (!j.is_object()) bad("space must be an object");
  const auto type = j.value("type", std::string{});
  const auto [k_min, k_max] = parse_window(j);
  if (type == "padic") {
    const int p = j.value("p", 0);
    if (p < 2) bad("padic space needs p >= 2");
    return SpaceConfig::padic(static_cast<std::uint32_t>(p), k_min, k_max);
  }
  if (type != "tree") bad("space.type must be 'padic' or 'tree'");
  SpaceConfig config;
  config.q = j.value("q", 0.0);
  config.k_min = k_min;
  config.k_max = k_max;
  config.root_mass = j.value("root_mass", 1.0);
  const auto& branching = j.contains("branching") ? j["branching"] : Json(2);
  if (branching.is_number_integer()) {
    config.default_branching = branching.get<std::uint32_t>();
  } else if (branching.is_array()) {
    config.level_branching = branching.get<std::vector<std::uint32_t>>();
  } else if (branching.is_object()) {
    config.default_branching = branching.value("default", 2u);
    if (branching.contains("levels")) config.level_branching = branching["levels"].get<std::vector<std::uint32_t>>();
    if (branching.contains("nodes"))
      for (const auto& [word, count] : branching["nodes"].items()) config.node_branching[word] = count.get<std::uint32_t>();
  } else {
    bad("branching must be an integer, an array per level or an object");
  }
  if (j.contains("weights")) {
    if (!j["weights"].is_object()) bad("weights must map node words to child fractions");
    for (const auto& [word, w] : j["weights"].items()) config.node_weights[word] = w.get<std::vector<double>>();
  }
  return config;
}

SpacePtr space_from_json(const Json& j) { return build_space(space_config_from_json(j)); }

LambdaProfile lambda_from_json(const Json& j, const SpacePtr& space) {
  const auto form = j.value("form", std::string{});
  if (form == "geometric") return LambdaProfile::geometric(space, j.value("alpha", 1.0));
  if (form == "table") {
    if (!j.contains("values") || !j["values"].is_array()) bad("lambda table needs 'values'");
    const auto& values = j["values"];
    if (!values.empty() && values[0].is_array())
      return LambdaProfile::node_table(space, values.get<std::vector<std::vector<double>>>());
    return LambdaProfile::level_table(space, values.get<std::vector<double>>());
  }
  bad("lambda.form must be 'geometric' or 'table'");
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        bad("non-numeric cell '" + cell + "' in " + path.string());
      }
    }
    rows.push_back(std::move(row));
  }
  const auto n = rows.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) bad("kernel CSV must be square");
    for (std::size_t k = 0; k < n; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

JumpKernel kernel_from_json(const Json& j, const SpacePtr& space, const std::filesystem::path& base_dir) {
  if (!j.is_object()) bad("kernel must be an object");
  const auto type = j.value("type", std::string{});
  if (type == "kigami") {
    if (!j.contains("lambda")) bad("kigami kernel needs 'lambda'");
    return JumpKernel::kigami(lambda_from_json(j["lambda"], space));
  }
  if (type == "mixed") {
    if (!j.contains("components") || !j["components"].is_array()) bad("mixed kernel needs 'components'");
    std::vector<LambdaProfile> components;
    for (const auto& c : j["components"]) components.push_back(lambda_from_json(c.contains("lambda") ? c["lambda"] : c, space));
    GammaSpec gamma;
    if (j.contains("gamma")) {
      const auto& g = j["gamma"];
      gamma.default_component = g.value("default", std::size_t{1});
      if (g.contains("by_level"))
        for (const auto& [level, comp] : g["by_level"].items()) gamma.by_level[std::stoi(level)] = comp.get<std::size_t>();
      if (g.contains("pairs"))
        for (const auto& p : g["pairs"]) {
          GammaSpec::PairEntry e;
          e.level = p.at("level").get<int>();
          e.i = ball_from_json(p.at("i"), *space, e.level);
          e.j = ball_from_json(p.at("j"), *space, e.level);
          e.component = p.at("component").get<std::size_t>();
          gamma.pairs.push_back(e);
        }
      if (g.contains("leaf_matrix")) gamma.leaf_matrix = g["leaf_matrix"].get<std::vector<std::vector<std::size_t>>>();
    }
    return JumpKernel::mixed(components, gamma);
  }
  if (type == "perturbed") {
    if (!j.contains("base")) bad("perturbed kernel needs 'base'");
    auto base = kernel_from_json(j["base"], space, base_dir);
    return JumpKernel::perturbed(base, j.value("epsilon", 0.0), parse_signs(j.at("signs"), space->leaf_count()));
  }
  if (type == "table") {
    if (j.contains("matrix")) {
      const auto rows = j["matrix"].get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) bad("kernel matrix must be square");
        for (std::size_t k = 0; k < rows.size(); ++k)
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
      }
      return JumpKernel::table(space, m);
    }
    if (!j.contains("matrix_csv")) bad("table kernel needs 'matrix' or 'matrix_csv'");
    std::filesystem::path path = j["matrix_csv"].get<std::string>();
    if (path.is_relative()) path = base_dir / path;
    return JumpKernel::table(space, read_matrix_csv(path));
  }
  bad("kernel.type must be kigami, mixed, perturbed or table");
}

LevelFunction leaf_function_from_json(const Json& j, const TreeSpace& space) {
  const int K = space.k_max();
  if (j.is_string() && j.get<std::string>() == "uniform") return constant_function(space, K, 1.0);
  if (j.is_object() && j.contains("ball")) {
    const int level = j["ball"].at("level").get<int>();
    const auto ball = ball_from_json(j["ball"].at("word"), space, level);
    return extend(space, indicator(space, level, ball), K);
  }
  if (j.is_object() && j.contains("leaf")) return indicator(space, K, ball_from_json(j["leaf"], space, K));
  if (j.is_object() && j.contains("values")) {
    LevelFunction f{K, j["values"].get<std::vector<double>>()};
    if (f.size() != space.leaf_count()) bad("leaf function needs one value per leaf");
    return f;
  }
  bad("leaf function must be \"uniform\", {\"ball\":...}, {\"leaf\":...} or {\"values\":[...]}");
}

ExperimentConfig load_config(const Json& input, const std::filesystem::path& base_dir) {
  try {
    Json j = input;
    if (j.contains("preset")) {
      Json base = preset(j["preset"].get<std::string>());
      if (j.contains("parameters")) base["parameters"].merge_patch(j["parameters"]);
      if (j.contains("space")) base["space"] = j["space"];
      if (j.contains("kernel")) base["kernel"] = j["kernel"];
      j = std::move(base);
    }
    if (!j.contains("space") || !j.contains("kernel")) bad("config needs 'space' and 'kernel' (or 'preset')");
    auto space = space_from_json(j["space"]);
    auto kernel = kernel_from_json(j["kernel"], space, base_dir);
    Json parameters = j.contains("parameters") ? j["parameters"] : Json::object();
    if (!parameters.is_object()) bad("parameters must be an object");
    return ExperimentConfig{j.value("name", std::string{"custom"}), j, std::move(space), std::move(kernel),
                            std::move(parameters), base_dir};
  } catch (const Json::exception& e) {
    bad(std::string("malformed config: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigParseError) throw;
    bad(e.what());
  }
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open config " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    bad(std::string("malformed JSON in ") + path.string() + ": " + e.what());
  }
  return load_config(j, path.parent_path());
}

std::vector<std::string> preset_names() { return {"q2-stable-alpha1", "q2-perturbed", "q3-mixed", "qp-haar", "q2-wide"}; }

Json preset(const std::string& name) {
  const Json common = {
      {"times", {0.1, 0.7, 2.0}},
      {"lambdas", {0.5, 1.0, 5.0}},
      {"n_random", 100},
      {"n_pairs", 1000},
      {"seed", 20240611},
      {"k0", 1},
      {"k1", 1},
      {"psi", {{"ball", {{"level", 1}, {"word", "0"}}}}},
      {"g", {{"ball", {{"level", 1}, {"word", "0"}}}}},
      {"fdd_level", 1},
      {"grid", {0.1, 0.25, 0.5, 1.0, 2.0}},
      {"n_paths", 100000},
      {"envelope_paths", 10000},
      {"horizon", 5.0},
  };
  const Json geometric1 = {{"type", "kigami"}, {"lambda", {{"form", "geometric"}, {"alpha", 1.0}}}};

  if (name == "q2-stable-alpha1") {
    Json params = common;
    // Hand-computed values of the worked instance.
    params["expected"] = {
        {"J_r1", 2.0},
        {"J_r2", 10.0},
        {"J1_01", 2.0},
        {"Q1", {{-1.0, 1.0}, {1.0, -1.0}}},
        {"Q2_row0", {-3.5, 2.5, 0.5, 0.5}},
        {"energy_ball0", 0.5},
        {"energy_leaf00", 0.875},
        {"semigroup_t05_ball0", 0.68393972058572117},
        {"resolvent_l1", {2.0 / 3.0, 1.0 / 3.0}},
        {"a3_k1", 1.0},
        {"tightness_maxima", {1.0, 1.0}},
    };
    return {{"name", name},
            {"space", {{"type", "padic"}, {"p", 2}, {"window", {0, 2}}}},
            {"kernel", geometric1},
            {"parameters", params}};
  }
  if (name == "q2-perturbed") {
    Json params = common;
    // Frozen from a dense expm / direct-solve oracle run on the 4-state chain
    // (residuals 0.0269, 0.0409, 0.0072 and 0.0387, 0.0279, 0.0060).
    params["controls"] = {
        {"level", 1},
        {"f", {{"ball", {{"level", 1}, {"word", "0"}}}}},
        {"commutation_min", {{"0.1", 0.02}, {"0.7", 0.03}, {"2", 0.005}}},
        {"intertwine_min", {{"0.5", 0.03}, {"1", 0.02}, {"5", 0.005}}},
    };
    return {{"name", name},
            {"space", {{"type", "padic"}, {"p", 2}, {"window", {0, 2}}}},
            {"kernel", {{"type", "perturbed"}, {"base", geometric1}, {"epsilon", 0.5}, {"signs", "+-++"}}},
            {"parameters", params}};
  }
  if (name == "q3-mixed") {
    Json params = common;
    return {{"name", name},
            {"space", {{"type", "padic"}, {"p", 3}, {"window", {0, 3}}}},
            {"kernel",
             {{"type", "mixed"},
              {"components",
               {{{"form", "geometric"}, {"alpha", 0.5}}, {{"form", "geometric"}, {"alpha", 1.0}}}},
              {"gamma",
               {{"default", 1},
                {"by_level", {{"1", 1}, {"2", 2}, {"3", 1}}},
                {"pairs", {{{"level", 1}, {"i", "0"}, {"j", "2"}, {"component", 2}},
                           {{"level", 3}, {"i", "120"}, {"j", "121"}, {"component", 2}}}}}}}},
            {"parameters", params}};
  }
  if (name == "qp-haar") {
    Json params = common;
    return {{"name", name},
            {"space", {{"type", "padic"}, {"p", 5}, {"window", {0, 2}}}},
            {"kernel", geometric1},
            {"parameters", params}};
  }
  if (name == "q2-wide") {
    Json params = common;
    params["psi"] = "uniform";
    params["g"] = {{"ball", {{"level", 0}, {"word", "0"}}}};
    return {{"name", name},
            {"space", {{"type", "padic"}, {"p", 2}, {"window", {-1, 3}}}},
            {"kernel", geometric1},
            {"parameters", params}};
  }
  bad("unknown preset '" + name + "'");
}

std::string config_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ultrajump
