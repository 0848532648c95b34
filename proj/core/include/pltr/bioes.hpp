#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pltr {

enum class PositionTag : std::uint8_t { O, B, I, E, S };

/// A single token label: a position tag plus an entity type.
/// O carries no type; B/I/E/S always carry one.
class EntityLabel {
 public:
  EntityLabel() = default;
  EntityLabel(PositionTag tag, std::string type);

  static EntityLabel outside() { return {}; }

  /// Parses "O", "B-PER", "S-ORG", ... (BIOES spelling only).
  static EntityLabel parse(std::string_view text);

  PositionTag tag() const { return tag_; }
  const std::string& type() const { return type_; }
  bool is_outside() const { return tag_ == PositionTag::O; }

  std::string str() const;

  friend bool operator==(const EntityLabel&, const EntityLabel&) = default;

 private:
  PositionTag tag_ = PositionTag::O;
  std::string type_;
};

enum class TagScheme { IOB1, IOB2, BIOES };

TagScheme parse_tag_scheme(std::string_view name);
std::string_view to_string(TagScheme scheme);

/// Entity span over token indices [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string type;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

/// True iff the sequence is a well-formed BIOES walk.
bool is_valid_bioes(std::span<const EntityLabel> labels);

/// Strict span decoding: only well-formed B(I*)E and S spans are returned.
std::vector<Span> decode_spans(std::span<const EntityLabel> labels);

std::vector<EntityLabel> encode_spans(const std::vector<Span>& spans, std::size_t length);

/// Converts raw label strings written in `scheme` to BIOES.
/// With `repair` unset, an ill-formed sequence throws ParseError; with it set the
/// conventional fix is applied (a continuation tag with no open span starts one,
/// an unterminated span is closed at its last token).
std::vector<EntityLabel> convert_to_bioes(std::span<const std::string> raw_labels, TagScheme scheme,
                                          bool repair);

/// Renders BIOES labels in another scheme (used for CoNLL export).
std::vector<std::string> convert_from_bioes(std::span<const EntityLabel> labels, TagScheme scheme);

}  // namespace pltr
