#include "mfgmp/io.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "mfgmp/errors.hpp"

namespace mfgmp {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_row(const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += fmt17(values[i]);
  }
  s += '\n';
  return s;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
}  // namespace

json to_json(const CheckResult& c) {
  return {{"name", c.name},         {"pass", c.pass},       {"margin", num(c.margin)},
          {"se", num(c.se)},        {"samples", c.samples}, {"seed", c.seed},
          {"estimate", num(c.estimate)}, {"witness", c.witness},
          {"witness_index", c.witness_index}};
}

json to_json(const CertificationReport& r) {
  json arr = json::array();
  for (const auto& c : r.checks) arr.push_back(to_json(c));
  return {{"all_pass", r.all_pass()}, {"checks", arr}};
}

RunManifest::RunManifest(json config, std::uint64_t seed, std::string command)
    : config_(std::move(config)), seed_(seed), command_(std::move(command)),
      started_(utc_timestamp()) {}

void RunManifest::add_file(const std::filesystem::path& path, const std::string& stage) {
  files_.emplace_back(path, stage);
}

void RunManifest::write(const std::filesystem::path& dir) {
  if (written_) throw ContractError("manifest already written");
  written_ = true;
  json files = json::array();
  for (const auto& [p, stage] : files_)
    files.push_back({{"path", p.filename().string()}, {"stage", stage}, {"sha256", sha256_file(p)}});
  json m = {{"tool", "mfgmp"},         {"version", kToolVersion}, {"command", command_},
            {"seed", seed_},           {"started", started_},     {"finished", utc_timestamp()},
            {"config", config_},       {"files", files}};
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

void emit(RunManifest& manifest, const std::filesystem::path& dir, const std::string& name,
          const std::string& stage, const std::string& body) {
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << body;
  }
  manifest.add_file(p, stage);
}

}  // namespace mfgmp
