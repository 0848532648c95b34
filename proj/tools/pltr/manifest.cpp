#include "manifest.hpp"

#include <openssl/evp.h>

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "pltr/error.hpp"

namespace pltr::cli {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

RunManifest::RunManifest(std::string command, nlohmann::json config, std::uint64_t seed)
    : command_(std::move(command)), config_(std::move(config)), seed_(seed), start_(std::chrono::steady_clock::now()) {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
  started_at_ = stamp;
}

void RunManifest::add_input(const std::string& role, const std::string& path) {
  inputs_[role] = {{"path", path}, {"sha256", file_sha256(path)}};
}

void RunManifest::add_output(const std::string& role, const std::string& path) {
  outputs_[role] = {{"path", path}, {"sha256", file_sha256(path)}};
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command_;
  j["tool_version"] = PLTR_VERSION;
  j["seed"] = seed_;
  j["config"] = config_;
  j["inputs"] = inputs_;
  j["outputs"] = outputs_;
  if (!result_.is_null()) j["result"] = result_;
  j["started_at"] = started_at_;
  j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  return j;
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest '" + path + "'");
  out << to_json().dump(2) << '\n';
}

std::string manifest_path_for(const std::string& artifact) { return artifact + ".manifest.json"; }

}  // namespace pltr::cli
