#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "support.hpp"
#include "ultrajump/config.hpp"
#include "ultrajump/error.hpp"
#include "ultrajump/experiments.hpp"

using namespace ultrajump;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ultrajump-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& args, const fs::path& capture = {}) {
  std::string cmd = std::string(ULTRAJUMP_CLI) + " " + args;
  cmd += capture.empty() ? " > /dev/null 2>&1" : " > " + capture.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an ultrajump::Error");
  return ErrorKind::NonPositiveMass;
}

}  // namespace

TEST_CASE("presets load and hash deterministically") {
  for (const auto& name : preset_names()) {
    const auto c = load_config(preset(name));
    CHECK(c.name == name);
    CHECK(config_hash(c.raw) == config_hash(load_config(preset(name)).raw));
  }
  CHECK(kind_of([] { preset("nope"); }) == ErrorKind::ConfigParseError);
  CHECK(config_hash(preset("q2-stable-alpha1")) != config_hash(preset("q2-perturbed")));
}

TEST_CASE("preset references with parameter overrides") {
  const auto c = load_config(Json::parse(R"({"preset":"q2-stable-alpha1","parameters":{"n_paths":2000}})"));
  CHECK(c.parameters["n_paths"] == 2000);
  CHECK(c.parameters["k1"] == 1);
  CHECK(c.space->leaf_count() == 4);
}

TEST_CASE("config errors are reported as parse errors") {
  CHECK(kind_of([] { load_config(Json::parse(R"({"space":{"type":"padic","p":2,"window":[0,0]},"kernel":{}})")); }) ==
        ErrorKind::ConfigParseError);
  CHECK(kind_of([] { load_config(Json::parse(R"({"space":{"type":"padic","p":2,"window":[0,2]},"kernel":{"type":"x"}})")); }) ==
        ErrorKind::ConfigParseError);
  CHECK(kind_of([] { load_config(Json::parse(R"({"kernel":{}})")); }) == ErrorKind::ConfigParseError);
}

TEST_CASE("tree spaces, table kernels and leaf functions from JSON") {
  const auto dir = scratch("table");
  write(dir / "k.csv", "0,1,2\n1,0,3\n2,3,0\n");
  write(dir / "c.json", R"({"space":{"type":"tree","q":3.0,"window":[0,1],"branching":3,
                            "weights":{"":[0.5,0.25,0.25]}},
                            "kernel":{"type":"table","matrix_csv":"k.csv"}})");
  const auto c = load_config_file(dir / "c.json");
  CHECK(c.space->mass(1, 0) == 0.5);
  CHECK(c.kernel(1, 2) == 3.0);
  const auto u = leaf_function_from_json(Json::parse(R"({"values":[1,2,3]})"), *c.space);
  CHECK(u.coeffs == std::vector<double>{1, 2, 3});
  const auto v = leaf_function_from_json(Json::parse(R"({"leaf":"2"})"), *c.space);
  CHECK(v.coeffs == std::vector<double>{0, 0, 1});
  CHECK(leaf_function_from_json("uniform", *c.space).coeffs == std::vector<double>{1, 1, 1});
}

TEST_CASE("mixed kernel config") {
  const auto c = load_config(preset("q3-mixed"));
  CHECK(c.kernel.variant() == JumpKernel::Variant::Mixed);
  CHECK(c.kernel.component_count() == 2);
  for (int k = 0; k <= 3; ++k) CHECK(detect_bc(c.kernel, k).holds);
  const auto text = describe(c);
  CHECK(text.find("component 2") != std::string::npos);
  CHECK(text.find("pair entries") != std::string::npos);
}

TEST_CASE("describe enumerates levels") {
  const auto c = load_config(preset("q2-stable-alpha1"));
  CHECK(describe(c).find("levels 0..2, states per level: 1,2,4") != std::string::npos);
  const auto w = load_config(Json::parse(R"({"space":{"type":"padic","p":2,"window":[-1,2]},
                                             "kernel":{"type":"kigami","lambda":{"form":"geometric","alpha":1}}})"));
  const auto text = describe(w);
  CHECK(text.find("states per level: 1,2,4,8") != std::string::npos);
  CHECK(text.find("q^{1}") != std::string::npos);
}

TEST_CASE("command line: exit codes, reports and reproducibility") {
  const auto dir = scratch("cli");
  write(dir / "bad.json", "{ not json");
  CHECK(run("validate --config " + (dir / "bad.json").string() + " --out " + (dir / "o").string()) == 1);
  CHECK(run("nonsense --preset q2-stable-alpha1 --out " + (dir / "o").string()) == 1);
  CHECK(run("validate --out " + (dir / "o").string()) == 1);

  write(dir / "small.json", R"({"preset":"q2-stable-alpha1","parameters":{"n_paths":2000,"envelope_paths":500}})");
  const auto cfg = (dir / "small.json").string();
  CHECK(run("full-suite --config " + cfg + " --out " + (dir / "a").string() + " --seed 5") == 0);
  CHECK(run("full-suite --config " + cfg + " --out " + (dir / "b").string() + " --seed 5") == 0);
  const auto a = slurp(dir / "a" / "full-suite" / "summary.json");
  CHECK(a == slurp(dir / "b" / "full-suite" / "summary.json"));
  CHECK(slurp(dir / "a" / "full-suite" / "fdd_occupancy.csv") == slurp(dir / "b" / "full-suite" / "fdd_occupancy.csv"));
  const auto summary = Json::parse(a);
  CHECK(summary["seed"] == 5);
  CHECK(summary["version"] == tool_version());
  CHECK(summary["config"]["hash"].get<std::string>().size() == 16);
  CHECK(summary["pass"] == true);

  CHECK(run("lumpability --config " + cfg + " --out " + (dir / "a").string()) == 0);
  CHECK(fs::exists(dir / "a" / "lumpability" / "generator.k1.mtx"));
  CHECK(slurp(dir / "a" / "lumpability" / "generator.k1.csv").rfind("row,col,value", 0) == 0);

  CHECK(run("simulate --config " + cfg + " --out " + (dir / "a").string()) == 0);
  const auto paths = slurp(dir / "a" / "simulate" / "paths.csv");
  CHECK(paths.rfind("path_id,time,state\n0,0,", 0) == 0);
  CHECK(slurp(dir / "a" / "simulate" / "psi.csv").rfind("ball,word,value\n0,00,1\n", 0) == 0);

  // A control threshold that cannot be met is an assertion failure.
  write(dir / "strict.json", R"({"preset":"q2-perturbed","parameters":{"controls":{"level":1,
        "commutation_min":{"0.7":1000.0}}}})");
  CHECK(run("commutation --config " + (dir / "strict.json").string() + " --out " + (dir / "s").string()) == 2);

  write(dir / "pert.json", R"({"preset":"q2-perturbed","parameters":{"n_paths":2000,"envelope_paths":500}})");
  CHECK(run("full-suite --config " + (dir / "pert.json").string() + " --out " + (dir / "p").string()) == 0);
  const auto pert = Json::parse(slurp(dir / "p" / "full-suite" / "summary.json"));
  CHECK(pert["bc_holds"] == false);

  CHECK(run("describe --preset q3-mixed", dir / "describe.txt") == 0);
  CHECK(slurp(dir / "describe.txt").find("states per level: 1,3,9,27") != std::string::npos);
}
