#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "pltr/error.hpp"
#include "pltr/trf_mining.hpp"
#include "test_util.hpp"
#include "trf_oracle.hpp"

using namespace pltr;
using pltr::testing::make_sentence;
using pltr::testing::random_corpus;
using namespace pltr::testing;

TEST_CASE("plug-in MI: hand table [[2,1],[0,3]]") {
  // present_in=2, present_out=1, absent_in=0, absent_out=3 over 6 sentences:
  // (2/6)ln(2*6/(3*2)) + (1/6)ln(1*6/(3*4)) + (3/6)ln(3*6/(3*4))
  const double expected = (2.0 / 6) * std::log(2.0) + (1.0 / 6) * std::log(0.5) + (3.0 / 6) * std::log(1.5);
  const double mi = plugin_mutual_information({2, 1, 0, 3});
  CHECK(mi == doctest::Approx(expected).epsilon(1e-12));
  CHECK(mi == doctest::Approx(entropy_mi(2, 1, 0, 3)).epsilon(1e-12));
  CHECK(mi == doctest::Approx(0.3182571).epsilon(1e-6));
}

TEST_CASE("plug-in MI edge cases") {
  // perfect correlation: MI = H(membership)
  CHECK(plugin_mutual_information({2, 0, 0, 4}) == doctest::Approx(entropy({2, 4})));
  // present everywhere: independent
  CHECK(plugin_mutual_information({3, 3, 0, 0}) == 0.0);
  CHECK(plugin_mutual_information({0, 0, 0, 0}) == 0.0);
  // symmetric in the two variables
  CHECK(plugin_mutual_information({2, 1, 0, 3}) == doctest::Approx(plugin_mutual_information({2, 0, 1, 3})));
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    ContingencyTable t{rng() % 20, rng() % 20, rng() % 20, rng() % 20};
    CHECK(plugin_mutual_information(t) >= 0.0);
  }
}

TEST_CASE("direct counts: bank") {
  const Corpus c({make_sentence({"Ann", "bank"}, {"S-PER", "O"}), make_sentence({"bank", "Rome"}, {"O", "S-LOC"})});
  const auto stats = accumulate_stats(c, build_partitions(c));
  const auto per = stats.type_index("PER");
  CHECK(stats.count_in("bank", per) == 1);
  CHECK(stats.count_out("bank", per) == 1);
  const auto t = stats.table("bank", per);
  CHECK(t.total() == 2);
  CHECK(mutual_information(stats, "bank", "PER") == 0.0);
}

TEST_CASE("mutual_information needs at least two sentences") {
  const Corpus c({make_sentence({"Ann"}, {"S-PER"})});
  const auto stats = accumulate_stats(c, build_partitions(c));
  CHECK_THROWS_AS(mutual_information(stats, "ann", "PER"), ValidationError);
}

TEST_CASE("counts match a naive rescan") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = random_corpus(seed, 50);
    const auto stats = accumulate_stats(c, build_partitions(c));
    for (const auto& type : c.type_inventory()) {
      const auto ti = stats.type_index(type);
      for (const auto& [key, entry] : stats.entries()) {
        std::uint64_t in = 0, out = 0;
        ContingencyTable t;
        for (const auto& s : c) {
          const bool member = in_type(s, type);
          const auto occ = static_cast<std::uint64_t>(std::count(s.tokens.begin(), s.tokens.end(), key));
          (member ? in : out) += occ;
          if (occ > 0) {
            ++(member ? t.present_in : t.present_out);
          } else {
            ++(member ? t.absent_in : t.absent_out);
          }
        }
        CHECK(stats.count_in(key, ti) == in);
        CHECK(stats.count_out(key, ti) == out);
        const auto got = stats.table(key, ti);
        CHECK(got.present_in == t.present_in);
        CHECK(got.present_out == t.present_out);
        CHECK(got.absent_in == t.absent_in);
        CHECK(got.absent_out == t.absent_out);
        CHECK(got.total() == c.size());
      }
    }
  }
}

TEST_CASE("doubling a corpus doubles every count") {
  const auto c = random_corpus(77, 40);
  std::vector<Sentence> twice(c.begin(), c.end());
  twice.insert(twice.end(), c.begin(), c.end());
  const Corpus d(std::move(twice));
  const auto s1 = accumulate_stats(c, build_partitions(c));
  const auto s2 = accumulate_stats(d, build_partitions(d));
  for (const auto& [key, e] : s1.entries()) {
    const auto* e2 = s2.find(key);
    REQUIRE(e2);
    CHECK(e2->occurrences == 2 * e.occurrences);
    CHECK(e2->presence == 2 * e.presence);
    for (std::size_t t = 0; t < e.occ_in.size(); ++t) CHECK(e2->occ_in[t] == 2 * e.occ_in[t]);
  }
}

TEST_CASE("sharded accumulation merges to the sequential result") {
  const auto c = random_corpus(11, 200);
  const auto parts = build_partitions(c);
  const auto seq = extract_trfs(accumulate_stats(c, parts, 1, 1), 3.0, 20);
  for (std::size_t threads : {2u, 3u, 8u}) {
    const auto par = accumulate_stats(c, parts, 1, threads);
    CHECK(par.sentence_count() == c.size());
    CHECK(extract_trfs(par, 3.0, 20) == seq);
  }
}

TEST_CASE("ratio filter boundary") {
  // "x" once with PER, five times elsewhere: ratio 5 > 3.
  std::vector<Sentence> s{make_sentence({"x", "Ann"}, {"O", "S-PER"})};
  for (int i = 0; i < 5; ++i) s.push_back(make_sentence({"x", "Rome"}, {"O", "S-LOC"}));
  s.push_back(make_sentence({"y", "y", "Bo"}, {"O", "O", "S-PER"}));
  for (int i = 0; i < 3; ++i) s.push_back(make_sentence({"y", "Oslo"}, {"O", "S-LOC"}));
  const Corpus c(std::move(s));
  const auto trfs = extract_trfs(c, 3.0, 100);
  auto has = [&](const std::string& type, const std::string& tok) {
    const auto& f = trfs.features(type);
    return std::any_of(f.begin(), f.end(), [&](const TrfEntry& e) { return e.token == tok; });
  };
  CHECK_FALSE(has("PER", "x"));
  CHECK(has("PER", "y"));  // count_in 2, count_out 3: ratio 1.5
  for (const auto& type : trfs.types()) {
    for (const auto& e : trfs.features(type)) {
      CHECK(e.count_in > 0);
      CHECK(e.ratio <= 3.0);
      CHECK(e.ratio == doctest::Approx(static_cast<double>(e.count_out) / static_cast<double>(e.count_in)));
    }
  }
}

TEST_CASE("an ORG-only cue word is mined for ORG") {
  std::vector<Sentence> s;
  for (int i = 0; i < 6; ++i) {
    s.push_back(make_sentence({"Acme", "was", "established", "early"}, {"S-ORG", "O", "O", "O"}));
    s.push_back(make_sentence({"Ann", "was", "born", "early"}, {"S-PER", "O", "O", "O"}));
    s.push_back(make_sentence({"Rome", "was", "big"}, {"S-LOC", "O", "O"}));
  }
  const auto trfs = extract_trfs(Corpus(std::move(s)));
  const auto& org = trfs.features("ORG");
  REQUIRE_FALSE(org.empty());
  CHECK(std::any_of(org.begin(), org.end(), [](const TrfEntry& e) { return e.token == "established"; }));
  for (const auto& e : trfs.features("PER")) CHECK(e.token != "established");
}

TEST_CASE("extract_trfs equals the brute-force oracle across 100 seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto c = random_corpus(1000 + seed, 30, 60);
    const std::size_t l = 1 + seed % 15;
    const double rho = 1.0 + static_cast<double>(seed % 5);
    const auto trfs = extract_trfs(c, rho, l);
    const auto oracle = brute_force_trfs(c, rho, l);
    REQUIRE(trfs.types() == c.type_inventory());
    for (std::size_t t = 0; t < oracle.size(); ++t) {
      const auto& got = trfs.features(t);
      REQUIRE(got.size() == oracle[t].size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].key == oracle[t][i].key);
        CHECK(got[i].mi == doctest::Approx(oracle[t][i].mi).epsilon(1e-9));
        CHECK(got[i].count_in == oracle[t][i].in);
        CHECK(got[i].count_out == oracle[t][i].out);
      }
    }
  }
}

TEST_CASE("extract_trfs is invariant to sentence order") {
  const auto c = random_corpus(31, 80);
  std::vector<Sentence> shuffled(c.begin(), c.end());
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(4));
  CHECK(extract_trfs(Corpus(std::move(shuffled)), 3.0, 25) == extract_trfs(c, 3.0, 25));
}

TEST_CASE("counting is case-insensitive, emission uses the most frequent surface") {
  const Corpus c({make_sentence({"Bank", "Ann"}, {"O", "S-PER"}), make_sentence({"bank", "Bo"}, {"O", "S-PER"}),
                  make_sentence({"Bank", "Al"}, {"O", "S-PER"}), make_sentence({"x", "Rome"}, {"O", "S-LOC"})});
  const auto stats = accumulate_stats(c, build_partitions(c));
  CHECK(stats.count_in("bank", stats.type_index("PER")) == 3);
  CHECK(stats.surface("bank") == "Bank");
  const auto trfs = extract_trfs(c, 3.0, 10);
  const auto& per = trfs.features("PER");
  CHECK(std::any_of(per.begin(), per.end(), [](const TrfEntry& e) { return e.token == "Bank" && e.key == "bank"; }));
}

TEST_CASE("a type with no qualifying tokens yields an empty list and a warning") {
  // Every token seen with MISC is far more frequent outside it.
  std::vector<Sentence> s{make_sentence({"the", "Z"}, {"O", "S-MISC"})};
  for (int i = 0; i < 8; ++i) s.push_back(make_sentence({"the", "Z", "Ann"}, {"O", "O", "S-PER"}));
  const auto trfs = extract_trfs(Corpus(std::move(s)), 1.0, 5);
  CHECK(trfs.features("MISC").empty());
  CHECK_FALSE(trfs.warnings.empty());
}

TEST_CASE("TrfSet JSON round trip and pool ownership") {
  const auto c = random_corpus(8, 60);
  const auto trfs = extract_trfs(c, 3.0, 10);
  const auto j = trfs.to_json();
  CHECK(j.contains("rho"));
  CHECK(j.contains("l"));
  for (const auto& type : trfs.types()) CHECK(j.at(type).is_array());
  CHECK(TrfSet::from_json(j) == trfs);

  const auto pool = trfs.pool();
  CHECK(std::is_sorted(pool.tokens.begin(), pool.tokens.end()));
  CHECK(std::adjacent_find(pool.tokens.begin(), pool.tokens.end()) == pool.tokens.end());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    double best = -1.0;
    std::string owner;
    for (const auto& type : trfs.types()) {
      for (const auto& e : trfs.features(type)) {
        if (e.token == pool.tokens[i] && e.mi > best) {
          best = e.mi;
          owner = type;
        }
      }
    }
    CHECK(pool.owner_types[i] == owner);
    CHECK(pool.index_of(pool.tokens[i]) == i);
  }
}

TEST_CASE("invalid hyperparameters are rejected") {
  const auto c = random_corpus(1, 10);
  CHECK_THROWS_AS(extract_trfs(c, 0.5, 10), ValidationError);
  CHECK_THROWS_AS(extract_trfs(c, 3.0, 0), ValidationError);
}
