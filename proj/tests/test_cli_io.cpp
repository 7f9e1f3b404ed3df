#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "mfgmp/config.hpp"
#include "mfgmp/experiments.hpp"
#include "mfgmp/io.hpp"

using namespace mfgmp;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> violations(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigParseError& e) {
    return e.violations;
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& s) {
  for (const auto& x : v)
    if (x.find(s) != std::string::npos) return true;
  return false;
}

fs::path tmp(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mfgmp_unit_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("sha256 of a known string") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("fmt17 round-trips doubles") {
  const double x = 0.1 + 0.2;
  CHECK(std::stod(fmt17(x)) == x);
  CHECK(csv_row({1.0, 0.5}) == "1,0.5\n");
}

TEST_CASE("levenshtein") {
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("gamma", "gamma") == 0);
}

TEST_CASE("config defaults and overrides") {
  const RunConfig c = parse_config(R"({"grid": {"horizon": 2, "steps": 40}, "seed": 9,
                                       "model": {"type": "lq", "params": {"c1": 1.5}}})");
  CHECK(c.horizon == 2.0);
  CHECK(c.steps == 40);
  CHECK(c.seed == 9);
  CHECK(c.lq.c1 == 1.5);
  CHECK(c.scenarios == 64);
  CHECK(std::isinf(c.constants.clamp));
  // round trip through the emitted json
  const RunConfig d = parse_config(c.to_json().dump());
  CHECK(d.steps == 40);
  CHECK(d.lq.c1 == 1.5);
}

TEST_CASE("config errors are collected and named") {
  const auto v = violations(R"({"grid": {"steps": 0}, "extragradient": {"gama": 0.1}})");
  CHECK(v.size() >= 2);
  CHECK(any_contains(v, "grid.steps must be at least 1"));
  CHECK(any_contains(v, "extragradient.gama"));
  CHECK(any_contains(v, "did you mean \"gamma\""));
  CHECK(!violations("{not json").empty());
  CHECK(any_contains(violations(R"({"model": {"type": "cubic"}})"), "model.type"));
}

TEST_CASE("manifest lists each file with its checksum") {
  const fs::path d = tmp("manifest");
  RunManifest m(nlohmann::json{{"k", 1}}, 3, "test");
  emit(m, d, "a.csv", "solve", "x\n1\n");
  m.write(d);
  std::ifstream in(d / "manifest.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["seed"] == 3);
  CHECK(j["files"][0]["path"] == "a.csv");
  CHECK(j["files"][0]["sha256"] == sha256_hex("x\n1\n"));
  CHECK_THROWS(m.write(d));
}

TEST_CASE("zero model solve converges at once and exits 0") {
  RunConfig c;
  c.model = "zero";
  c.steps = 5;
  c.scenarios = 32;
  c.particles = 20;
  c.eg.gamma = 0.5;
  c.constants.sigma = 0.5;
  c.constants.sigma0 = 0.5;
  c.initial.q_std = 0.5;
  // the ridge leaves a residual near 1e-7
  c.eg.tol = 1e-6;
  const fs::path d = tmp("zero");
  CHECK(run_solve(c, d, false) == kExitConverged);
  std::ifstream in(d / "report.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["converged"] == true);
  CHECK(j["iterations"] == 0);
  CHECK(fs::exists(d / "manifest.json"));
  CHECK(fs::exists(d / "fields_scenario.csv"));
}

TEST_CASE("a huge step on the lq model exits 2") {
  RunConfig c;
  c.lq.c1 = 1.0;
  c.lq.b = 1.0;
  c.lq.g1 = 1.0;
  c.constants.sigma = 0.5;
  c.constants.sigma0 = 0.5;
  c.steps = 10;
  c.scenarios = 32;
  c.particles = 50;
  c.eg.gamma = 50.0;
  c.eg.n_max = 40;
  CHECK(run_solve(c, tmp("huge"), false) == kExitDiverged);
}

TEST_CASE("solve output is byte-identical across runs") {
  RunConfig c;
  c.lq.c1 = 1.0;
  c.lq.b = 1.0;
  c.lq.g1 = 1.0;
  c.constants.sigma = 0.5;
  c.constants.sigma0 = 0.5;
  c.steps = 5;
  c.scenarios = 32;
  c.particles = 30;
  c.eg.gamma = 0.3;
  c.eg.n_max = 5;
  const fs::path a = tmp("det_a"), b = tmp("det_b");
  run_solve(c, a, false);
  run_solve(c, b, false);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(a / "fields_scenario.csv") == slurp(b / "fields_scenario.csv"));
  CHECK(slurp(a / "extragradient.csv") == slurp(b / "extragradient.csv"));
}
