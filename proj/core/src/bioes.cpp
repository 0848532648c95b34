#include "pltr/bioes.hpp"

#include "pltr/error.hpp"

namespace pltr {
namespace {

bool valid_type_name(std::string_view type) {
  if (type.empty()) return false;
  for (char c : type) {
    if (c == ' ' || c == '\t' || c == ':' || c == ',' || c == '\n') return false;
  }
  return true;
}

struct RawTag {
  char prefix = 'O';
  std::string type;
};

RawTag split_raw(std::string_view text) {
  if (text == "O") return {};
  if (text.size() < 3 || text[1] != '-') throw ParseError("malformed label '" + std::string(text) + "'");
  RawTag tag{text[0], std::string(text.substr(2))};
  if (tag.prefix == 'O') throw ParseError("O label cannot carry an entity type: '" + std::string(text) + "'");
  if (!valid_type_name(tag.type)) throw ParseError("malformed entity type in label '" + std::string(text) + "'");
  return tag;
}

}  // namespace

EntityLabel::EntityLabel(PositionTag tag, std::string type) : tag_(tag), type_(std::move(type)) {
  if (tag_ == PositionTag::O) {
    if (!type_.empty()) throw ValidationError("O label cannot carry an entity type");
  } else if (!valid_type_name(type_)) {
    throw ValidationError("entity label requires a type name");
  }
}

EntityLabel EntityLabel::parse(std::string_view text) {
  RawTag raw = split_raw(text);
  switch (raw.prefix) {
    case 'O': return {};
    case 'B': return {PositionTag::B, raw.type};
    case 'I': return {PositionTag::I, raw.type};
    case 'E': return {PositionTag::E, raw.type};
    case 'S': return {PositionTag::S, raw.type};
    default: throw ParseError("unknown position tag in label '" + std::string(text) + "'");
  }
}

std::string EntityLabel::str() const {
  switch (tag_) {
    case PositionTag::O: return "O";
    case PositionTag::B: return "B-" + type_;
    case PositionTag::I: return "I-" + type_;
    case PositionTag::E: return "E-" + type_;
    case PositionTag::S: return "S-" + type_;
  }
  return "O";
}

TagScheme parse_tag_scheme(std::string_view name) {
  if (name == "IOB1" || name == "iob1") return TagScheme::IOB1;
  if (name == "IOB2" || name == "iob2" || name == "BIO" || name == "bio") return TagScheme::IOB2;
  if (name == "BIOES" || name == "bioes" || name == "IOBES" || name == "iobes") return TagScheme::BIOES;
  throw ValidationError("unknown tag scheme '" + std::string(name) + "'");
}

std::string_view to_string(TagScheme scheme) {
  switch (scheme) {
    case TagScheme::IOB1: return "IOB1";
    case TagScheme::IOB2: return "IOB2";
    case TagScheme::BIOES: return "BIOES";
  }
  return "BIOES";
}

bool is_valid_bioes(std::span<const EntityLabel> labels) {
  const std::string* open = nullptr;
  for (const auto& label : labels) {
    switch (label.tag()) {
      case PositionTag::O:
      case PositionTag::S:
      case PositionTag::B:
        if (open) return false;
        if (label.tag() == PositionTag::B) open = &label.type();
        break;
      case PositionTag::I:
        if (!open || *open != label.type()) return false;
        break;
      case PositionTag::E:
        if (!open || *open != label.type()) return false;
        open = nullptr;
        break;
    }
  }
  return open == nullptr;
}

std::vector<Span> decode_spans(std::span<const EntityLabel> labels) {
  std::vector<Span> spans;
  std::optional<Span> open;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& label = labels[i];
    switch (label.tag()) {
      case PositionTag::O:
        open.reset();
        break;
      case PositionTag::S:
        open.reset();
        spans.push_back({i, i + 1, label.type()});
        break;
      case PositionTag::B:
        open = Span{i, i + 1, label.type()};
        break;
      case PositionTag::I:
        if (open && open->type != label.type()) open.reset();
        break;
      case PositionTag::E:
        if (open && open->type == label.type()) {
          open->end = i + 1;
          spans.push_back(*open);
        }
        open.reset();
        break;
    }
  }
  return spans;
}

std::vector<EntityLabel> encode_spans(const std::vector<Span>& spans, std::size_t length) {
  std::vector<EntityLabel> labels(length);
  for (const auto& span : spans) {
    if (span.begin >= span.end || span.end > length) throw ValidationError("span out of range");
    for (std::size_t i = span.begin; i < span.end; ++i) {
      if (!labels[i].is_outside()) throw ValidationError("overlapping spans");
    }
    if (span.end - span.begin == 1) {
      labels[span.begin] = {PositionTag::S, span.type};
      continue;
    }
    labels[span.begin] = {PositionTag::B, span.type};
    for (std::size_t i = span.begin + 1; i + 1 < span.end; ++i) labels[i] = {PositionTag::I, span.type};
    labels[span.end - 1] = {PositionTag::E, span.type};
  }
  return labels;
}

std::vector<EntityLabel> convert_to_bioes(std::span<const std::string> raw_labels, TagScheme scheme,
                                          bool repair) {
  std::vector<Span> spans;
  std::optional<Span> open;
  auto close = [&](std::size_t end) {
    if (open) {
      open->end = end;
      spans.push_back(*open);
      open.reset();
    }
  };
  auto violation = [&](std::size_t i, const std::string& what) {
    if (!repair) {
      throw ParseError("invalid " + std::string(to_string(scheme)) + " sequence at token " + std::to_string(i) +
                       ": " + what);
    }
  };

  for (std::size_t i = 0; i < raw_labels.size(); ++i) {
    RawTag tag = split_raw(raw_labels[i]);
    const bool continues = open && open->type == tag.type;
    switch (scheme) {
      case TagScheme::IOB1:
      case TagScheme::IOB2:
        if (tag.prefix == 'O') {
          close(i);
        } else if (tag.prefix == 'B') {
          close(i);
          open = Span{i, i, tag.type};
        } else if (tag.prefix == 'I') {
          if (!continues) {
            if (scheme == TagScheme::IOB2) violation(i, "I-" + tag.type + " without a preceding B");
            close(i);
            open = Span{i, i, tag.type};
          }
        } else {
          throw ParseError("label '" + raw_labels[i] + "' is not valid in " + std::string(to_string(scheme)));
        }
        break;
      case TagScheme::BIOES:
        if (tag.prefix == 'O') {
          if (open) violation(i, "unterminated span");
          close(i);
        } else if (tag.prefix == 'S' || tag.prefix == 'B') {
          if (open) violation(i, "unterminated span");
          close(i);
          if (tag.prefix == 'S') {
            spans.push_back({i, i + 1, tag.type});
          } else {
            open = Span{i, i, tag.type};
          }
        } else if (tag.prefix == 'I' || tag.prefix == 'E') {
          if (!continues) {
            violation(i, std::string(1, tag.prefix) + "-" + tag.type + " without an open span");
            close(i);
            open = Span{i, i, tag.type};
          }
          if (tag.prefix == 'E') close(i + 1);
        } else {
          throw ParseError("unknown position tag in label '" + raw_labels[i] + "'");
        }
        break;
    }
  }
  if (open && scheme == TagScheme::BIOES) violation(raw_labels.size(), "unterminated span at sentence end");
  close(raw_labels.size());
  return encode_spans(spans, raw_labels.size());
}

std::vector<std::string> convert_from_bioes(std::span<const EntityLabel> labels, TagScheme scheme) {
  std::vector<std::string> out;
  out.reserve(labels.size());
  if (scheme == TagScheme::BIOES) {
    for (const auto& l : labels) out.push_back(l.str());
    return out;
  }
  out.assign(labels.size(), "O");
  const auto spans = decode_spans(labels);
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto& span = spans[k];
    const bool adjacent_same = k > 0 && spans[k - 1].end == span.begin && spans[k - 1].type == span.type;
    const bool begin_with_b = scheme == TagScheme::IOB2 || adjacent_same;
    out[span.begin] = (begin_with_b ? "B-" : "I-") + span.type;
    for (std::size_t i = span.begin + 1; i < span.end; ++i) out[i] = "I-" + span.type;
  }
  return out;
}

}  // namespace pltr
