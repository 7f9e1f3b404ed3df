#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfgmp/verification.hpp"

namespace mfgmp {

inline constexpr const char* kToolVersion = "0.3.0";

// %.17g
std::string fmt17(double v);
std::string csv_row(const std::vector<double>& values);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string utc_timestamp();

nlohmann::json to_json(const CheckResult& c);
nlohmann::json to_json(const CertificationReport& r);

class RunManifest {
 public:
  RunManifest(nlohmann::json config, std::uint64_t seed, std::string command);
  // remembers the file for checksumming at write time
  void add_file(const std::filesystem::path& path, const std::string& stage);
  // writes manifest.json into dir; call once
  void write(const std::filesystem::path& dir);

 private:
  nlohmann::json config_;
  std::uint64_t seed_;
  std::string command_, started_;
  std::vector<std::pair<std::filesystem::path, std::string>> files_;
  bool written_ = false;
};

// writes text to dir/name and registers it
void emit(RunManifest& manifest, const std::filesystem::path& dir, const std::string& name,
          const std::string& stage, const std::string& body);

}  // namespace mfgmp
