#include "pltr/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pltr/error.hpp"

namespace pltr {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) cols.push_back(line.substr(i, j - i));
    i = j;
  }
  return cols;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(name) + "'");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

void validate_sentence(const Sentence& sentence) {
  if (sentence.tokens.empty()) throw ValidationError("sentence has no tokens");
  if (sentence.tokens.size() != sentence.labels.size()) {
    throw ValidationError("sentence has " + std::to_string(sentence.tokens.size()) + " tokens but " +
                          std::to_string(sentence.labels.size()) + " labels");
  }
  if (!is_valid_bioes(sentence.labels)) throw ValidationError("sentence labels are not a valid BIOES sequence");
}

Corpus::Corpus(std::vector<Sentence> sentences, Split split) : sentences_(std::move(sentences)), split_(split) {
  std::set<std::string> types;
  for (const auto& s : sentences_) {
    validate_sentence(s);
    for (const auto& l : s.labels) {
      if (!l.is_outside()) types.insert(l.type());
    }
  }
  types_.assign(types.begin(), types.end());
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences_) n += s.size();
  return n;
}

Corpus parse_conll(std::string_view text, const ConllOptions& options) {
  std::vector<Sentence> sentences;
  std::vector<std::string> tokens;
  std::vector<std::string> raw;
  std::size_t line_no = 0;

  auto flush = [&] {
    if (tokens.empty()) return;
    Sentence s;
    s.tokens = std::move(tokens);
    try {
      s.labels = convert_to_bioes(raw, options.scheme, options.repair);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    s.domain_id = options.domain_id;
    sentences.push_back(std::move(s));
    tokens.clear();
    raw.clear();
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t next = text.find('\n', pos);
    if (next == std::string_view::npos) next = text.size();
    std::string_view line = text.substr(pos, next - pos);
    ++line_no;
    pos = next + 1;
    if (is_blank(line)) {
      flush();
      if (next == text.size()) break;
      continue;
    }
    auto cols = split_ws(line);
    if (cols.front().starts_with("-DOCSTART-")) continue;
    if (cols.size() < 2) {
      throw ParseError("line " + std::to_string(line_no) + ": expected at least 2 columns");
    }
    tokens.emplace_back(cols.front());
    raw.emplace_back(cols.back());
    if (next == text.size()) break;
  }
  flush();

  if (sentences.empty() && !options.allow_empty) throw ParseError("corpus contains no sentences");
  return Corpus(std::move(sentences), options.split);
}

Corpus read_conll_file(const std::string& path, const ConllOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_conll(buffer.str(), options);
}

std::string write_conll(const Corpus& corpus, TagScheme scheme) {
  std::string out;
  for (const auto& s : corpus) {
    const auto labels = convert_from_bioes(s.labels, scheme);
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += s.tokens[i];
      out += ' ';
      out += labels[i];
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus) {
    nlohmann::json line;
    line["tokens"] = s.tokens;
    std::vector<std::string> labels;
    labels.reserve(s.labels.size());
    for (const auto& l : s.labels) labels.push_back(l.str());
    line["labels"] = labels;
    line["domain_id"] = s.domain_id;
    out += line.dump();
    out += '\n';
  }
  return out;
}

Corpus parse_jsonl(std::string_view text, Split split) {
  std::vector<Sentence> sentences;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t next = text.find('\n', pos);
    if (next == std::string_view::npos) next = text.size();
    std::string_view line = text.substr(pos, next - pos);
    pos = next + 1;
    ++line_no;
    if (is_blank(line)) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Sentence s;
      s.tokens = j.at("tokens").get<std::vector<std::string>>();
      for (const auto& l : j.at("labels")) s.labels.push_back(EntityLabel::parse(l.get<std::string>()));
      s.domain_id = j.value("domain_id", std::string{});
      sentences.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Corpus(std::move(sentences), split);
}

std::vector<TypeSentencePartition> build_partitions(const Corpus& corpus) {
  return build_partitions(corpus, corpus.type_inventory());
}

std::vector<TypeSentencePartition> build_partitions(const Corpus& corpus, const std::vector<std::string>& types) {
  if (corpus.empty()) throw ValidationError("cannot partition an empty corpus");
  std::vector<TypeSentencePartition> parts(types.size());
  for (std::size_t t = 0; t < types.size(); ++t) parts[t].entity_type = types[t];

  std::vector<char> present(types.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::fill(present.begin(), present.end(), 0);
    for (const auto& label : corpus[i].labels) {
      if (label.is_outside()) continue;
      auto it = std::find(types.begin(), types.end(), label.type());
      if (it != types.end()) present[static_cast<std::size_t>(it - types.begin())] = 1;
    }
    for (std::size_t t = 0; t < types.size(); ++t) {
      (present[t] ? parts[t].members : parts[t].complement).push_back(i);
    }
  }
  for (auto& p : parts) p.flagged = p.members.empty();
  return parts;
}

Corpus remap_ood_labels(const Corpus& corpus, const std::set<std::string>& known_types) {
  if (known_types.empty()) throw ValidationError("known_types must be non-empty");
  std::vector<Sentence> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    Sentence mapped = s;
    std::vector<Span> kept;
    for (auto& span : s.spans()) {
      if (known_types.contains(span.type)) kept.push_back(std::move(span));
    }
    mapped.labels = encode_spans(kept, s.size());
    out.push_back(std::move(mapped));
  }
  return Corpus(std::move(out), corpus.split());
}

}  // namespace pltr
