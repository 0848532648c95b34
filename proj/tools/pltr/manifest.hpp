#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pltr::cli {

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::string& path);

// Provenance record written next to the outputs as <artifact>.manifest.json.
// Timestamps and wall time live here only, so the artifacts themselves stay
// byte-reproducible.
class RunManifest {
 public:
  RunManifest(std::string command, nlohmann::json config, std::uint64_t seed);

  void add_input(const std::string& role, const std::string& path);
  void add_output(const std::string& role, const std::string& path);
  void set_result(nlohmann::json result) { result_ = std::move(result); }

  nlohmann::json to_json() const;
  void write(const std::string& path) const;

 private:
  std::string command_;
  nlohmann::json config_;
  std::uint64_t seed_;
  nlohmann::json inputs_ = nlohmann::json::object();
  nlohmann::json outputs_ = nlohmann::json::object();
  nlohmann::json result_;
  std::string started_at_;
  std::chrono::steady_clock::time_point start_;
};

std::string manifest_path_for(const std::string& artifact);

}  // namespace pltr::cli
