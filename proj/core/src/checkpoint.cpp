#include "pltr/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pltr/error.hpp"

namespace pltr {
namespace {

constexpr char kMagic[8] = {'P', 'L', 'T', 'R', 'C', 'K', 'P', 'T'};

template <class T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("truncated checkpoint");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  const auto& model = checkpoint.model;
  nlohmann::json header;
  header["config"] = model.config().to_json();
  header["vocabulary"] = model.vocab().tokens();
  header["tag_types"] = model.tags().types();
  header["metadata"] = checkpoint.metadata;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  const auto& values = model.parameters().values;
  put_le<std::uint64_t>(out, values.size());
  out.reserve(out.size() + values.size() * sizeof(double));
  for (double v : values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not a pltr checkpoint");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw ParseError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint header: ") + e.what());
  }
  pos += header_len;

  Checkpoint ck;
  ck.model = EncoderModel(ModelConfig::from_json(header.at("config")),
                          Vocabulary(header.at("vocabulary").get<std::vector<std::string>>()),
                          TagSet(header.at("tag_types").get<std::vector<std::string>>()));
  ck.metadata = header.value("metadata", nlohmann::json::object());

  const auto count = get_le<std::uint64_t>(bytes, pos);
  auto& values = ck.model.parameters().values;
  if (count != values.size()) throw ParseError("checkpoint parameter count does not match its configuration");
  for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
  if (pos != bytes.size()) throw ParseError("trailing bytes in checkpoint");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingInputError("cannot write '" + path + "'");
  const auto bytes = serialize_checkpoint(checkpoint);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open checkpoint '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

}  // namespace pltr
