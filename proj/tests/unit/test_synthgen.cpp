#include <doctest.h>

#include <algorithm>
#include <set>

#include "pltr/error.hpp"
#include "pltr/synthgen.hpp"
#include "pltr/trf_mining.hpp"
#include "test_util.hpp"

using namespace pltr;
using pltr::testing::make_sentence;

namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.entities_per_type = 40;
  s.train_per_type = 60;
  s.dev_per_type = 10;
  s.test_per_type = 10;
  s.target_per_type = 20;
  return s;
}

std::set<std::string> all_cues(const SynthBenchmark& b) {
  std::set<std::string> out;
  for (const auto& [type, words] : b.cues) out.insert(words.begin(), words.end());
  return out;
}

}  // namespace

TEST_CASE("split sizes, lengths and label validity") {
  const auto spec = small_spec();
  const auto b = generate(spec);
  CHECK(b.source_train.size() == spec.train_per_type * spec.types.size());
  CHECK(b.source_dev.size() == spec.dev_per_type * spec.types.size());
  CHECK(b.source_test.size() == spec.test_per_type * spec.types.size());
  CHECK(b.target_dev.size() == spec.dev_per_type * spec.types.size());
  CHECK(b.target_test.size() == spec.target_per_type * spec.types.size());
  for (const auto* c : {&b.source_train, &b.target_test}) {
    for (const auto& s : *c) {
      CHECK(is_valid_bioes(s.labels));
      CHECK(s.size() >= spec.min_length);
      CHECK(s.size() <= spec.max_length);
      CHECK(!s.spans().empty());
    }
  }
  CHECK(b.source_train[0].domain_id == "source");
  CHECK(b.target_test[0].domain_id == "target");
  // every type appears
  std::set<std::string> types(b.source_train.type_inventory().begin(), b.source_train.type_inventory().end());
  CHECK(types == std::set<std::string>(spec.types.begin(), spec.types.end()));
}

TEST_CASE("generation is deterministic in the seed") {
  auto spec = small_spec();
  const auto a = generate(spec);
  const auto b = generate(spec);
  REQUIRE(a.source_train.size() == b.source_train.size());
  for (std::size_t i = 0; i < a.source_train.size(); ++i) {
    CHECK(a.source_train[i].tokens == b.source_train[i].tokens);
    CHECK(a.source_train[i].labels == b.source_train[i].labels);
  }
  CHECK(a.cues == b.cues);
  spec.seed += 1;
  const auto c = generate(spec);
  CHECK(c.source_train[0].tokens != a.source_train[0].tokens);
}

TEST_CASE("full shift gives disjoint entity lexicons") {
  auto spec = small_spec();
  spec.shift = 1.0;
  CHECK(generate(spec).entity_overlap == 0.0);
  spec.shift = 0.0;
  spec.entities_per_type = 5;
  CHECK(generate(spec).entity_overlap == 1.0);
}

TEST_CASE("entity overlap on a hand corpus") {
  const Corpus src(std::vector<Sentence>{make_sentence({"a", "b", "x"}, {"B-PER", "E-PER", "O"})});
  const Corpus tgt(std::vector<Sentence>{make_sentence({"a", "c", "b", "d"}, {"S-PER", "O", "S-LOC", "S-LOC"}),
                                         make_sentence({"x"}, {"S-ORG"})});
  // target entity tokens {a, b, d, x}; a and b are source entity tokens, x only occurs outside
  CHECK(entity_overlap(src, tgt) == doctest::Approx(0.5));
  CHECK(entity_overlap(src, Corpus{}) == 0.0);
}

TEST_CASE("cue words sit next to their entity") {
  auto spec = small_spec();
  spec.cue_prob = 1.0;
  const auto b = generate(spec);
  const auto cues = all_cues(b);
  for (const auto& s : b.source_train) {
    for (const auto& span : s.spans()) {
      const auto& own = b.cues.at(span.type);
      auto is_own = [&](std::size_t i) { return std::find(own.begin(), own.end(), s.tokens[i]) != own.end(); };
      const bool before = span.begin > 0 && is_own(span.begin - 1);
      const bool after = span.end < s.size() && is_own(span.end);
      CHECK((before || after));
      const std::size_t cue = before ? span.begin - 1 : span.end;
      CHECK(s.labels[cue].is_outside());
    }
  }
  spec.cue_prob = 0.0;
  const auto plain = generate(spec);
  for (const auto& s : plain.source_train) {
    for (const auto& t : s.tokens) CHECK(cues.count(t) == 0);
  }
}

TEST_CASE("mining recovers the planted cues") {
  auto spec = small_spec();
  spec.train_per_type = 100;
  const auto b = generate(spec);
  const auto trfs = extract_trfs(b.source_train, 3.0, spec.cues_per_type);
  for (const auto& type : spec.types) {
    const auto& planted = b.cues.at(type);
    std::size_t hits = 0;
    for (const auto& f : trfs.features(type)) {
      hits += std::find(planted.begin(), planted.end(), f.token) != planted.end();
    }
    CHECK(hits >= spec.cues_per_type - 1);
  }
}

TEST_CASE("shift calibration reaches the overlap target") {
  auto spec = small_spec();
  spec.train_per_type = 40;
  spec.target_per_type = 40;
  const auto tuned = calibrate_shift(spec, 0.11, 0.02);
  CHECK(std::abs(generate(tuned).entity_overlap - 0.11) <= 0.02);
}

TEST_CASE("spec validation and JSON") {
  auto spec = small_spec();
  CHECK(SynthSpec::from_json(spec.to_json()).to_json() == spec.to_json());
  CHECK(SynthSpec::from_json({{"shift", 0.3}}).shift == 0.3);
  CHECK_THROWS_AS(SynthSpec::from_json({{"shift", "far"}}), ValidationError);
  spec.shift = 1.5;
  CHECK_THROWS_AS(generate(spec), ValidationError);
  spec = small_spec();
  spec.max_entity_length = 4;
  spec.max_length = 9;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = small_spec();
  spec.types.clear();
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}
