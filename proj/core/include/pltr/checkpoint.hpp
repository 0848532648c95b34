#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "pltr/encoder.hpp"

namespace pltr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned binary container:
///   "PLTRCKPT" | u32 version | u64 header bytes | JSON header | u64 count | count x f64 (little endian)
/// The header holds the model config, vocabulary, tag types and caller metadata.
struct Checkpoint {
  EncoderModel model;
  nlohmann::json metadata = nlohmann::json::object();
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pltr
