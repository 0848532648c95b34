#include "commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "manifest.hpp"
#include "pltr/checkpoint.hpp"
#include "pltr/corpus.hpp"
#include "pltr/error.hpp"
#include "pltr/eval.hpp"
#include "pltr/log.hpp"
#include "pltr/prompting.hpp"
#include "pltr/synthgen.hpp"
#include "pltr/training.hpp"
#include "pltr/trf_mining.hpp"

namespace fs = std::filesystem;

namespace pltr::cli {
namespace {

constexpr std::uint64_t kDefaultSeed = 13;

void add_common(Options& o) {
  o.add("seed", nullptr, "random seed (falls back to $PLTR_SEED)");
  o.add("threads", 1u, "worker threads");
  o.add("log_level", "info", "debug, info, warning or error");
}

void add_corpus_format(Options& o) {
  o.add("scheme", "BIOES", "tag scheme of input CoNLL files: IOB1, IOB2 or BIOES");
  o.add("repair", false, "repair invalid tag sequences instead of rejecting them");
}

void add_train_settings(Options& o) {
  o.add("profile", "desk", "default settings: desk (small encoder) or paper");
  const nlohmann::json desk = TrainConfig::desk_profile().to_json();
  for (const auto& key : {"alpha", "rho", "l", "k", "epochs", "batch_size", "learning_rate", "warmup_ratio",
                          "weight_decay", "grad_clip", "mode", "patience", "vocab_min_count", "unk_replace"}) {
    o.add(key, desk.at(key), "training setting");
  }
  o.add_config_only("use_prompts", desk.at("use_prompts"));
  o.add_config_only("model", desk.at("model"));
}

// Re-resolves with the defaults of the selected profile.
nlohmann::json resolve_train_settings(Options& o) {
  const std::string profile = o.resolve().at("profile").get<std::string>();
  TrainConfig base;
  if (profile == "desk") {
    base = TrainConfig::desk_profile();
  } else if (profile == "paper") {
    base = TrainConfig::paper_profile();
  } else {
    throw ValidationError("unknown profile '" + profile + "'");
  }
  const nlohmann::json defaults = base.to_json();
  for (const auto& [key, value] : defaults.items()) {
    if (key != "seed" && key != "threads") o.set_default(key, value);
  }
  return o.resolve();
}

std::optional<std::uint64_t> explicit_seed(const nlohmann::json& j) {
  const auto& s = j.at("seed");
  if (s.is_number_unsigned()) return s.get<std::uint64_t>();
  if (s.is_number_integer() && s.get<long long>() >= 0) return static_cast<std::uint64_t>(s.get<long long>());
  if (s.is_string()) {
    const std::string text = s.get<std::string>();
    std::size_t used = 0;
    try {
      const auto v = std::stoull(text, &used);
      if (used == text.size() && text[0] != '-') return v;
    } catch (const std::logic_error&) {
    }
    throw ValidationError("invalid seed '" + text + "'");
  }
  if (!s.is_null()) throw ValidationError("seed must be a non-negative integer");
  if (const char* env = std::getenv("PLTR_SEED"); env && *env) {
    std::size_t used = 0;
    try {
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size() && env[0] != '-') return v;
    } catch (const std::logic_error&) {
    }
    throw ValidationError(std::string("invalid PLTR_SEED '") + env + "'");
  }
  return std::nullopt;
}

std::uint64_t seed_of(const nlohmann::json& j) { return explicit_seed(j).value_or(kDefaultSeed); }

std::size_t threads_of(const nlohmann::json& j) {
  const auto t = j.at("threads").get<std::size_t>();
  if (t < 1) throw ValidationError("threads must be >= 1");
  return t;
}

void setup_logging(const nlohmann::json& j) {
  const auto level = j.at("log_level").get<std::string>();
  if (level == "debug") {
    log::set_min_level(log::Level::debug);
  } else if (level == "info") {
    log::set_min_level(log::Level::info);
  } else if (level == "warning") {
    log::set_min_level(log::Level::warning);
  } else if (level == "error") {
    log::set_min_level(log::Level::error);
  } else {
    throw ValidationError("unknown log level '" + level + "'");
  }
}

std::string required(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (v.is_null() || (v.is_string() && v.get<std::string>().empty())) {
    throw UsageError("--" + flag_name(key) + " is required");
  }
  if (!v.is_string()) throw ValidationError(key + " must be a string");
  return v.get<std::string>();
}

std::optional<std::string> optional_path(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (v.is_null() || (v.is_string() && v.get<std::string>().empty())) return std::nullopt;
  return v.get<std::string>();
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

Corpus load_corpus(const nlohmann::json& j, const std::string& path, Split split) {
  if (path.ends_with(".jsonl")) return parse_jsonl(read_text(path), split);
  ConllOptions opts;
  opts.scheme = parse_tag_scheme(j.at("scheme").get<std::string>());
  opts.repair = j.at("repair").get<bool>();
  opts.split = split;
  return read_conll_file(path, opts);
}

TrainConfig train_config_of(const nlohmann::json& j) {
  nlohmann::json fields = j;
  fields.erase("seed");
  fields.erase("threads");
  TrainConfig cfg = TrainConfig::from_json(fields);
  cfg.seed = seed_of(j);
  cfg.threads = threads_of(j);
  cfg.validate();
  return cfg;
}

TrfSet load_or_mine(const nlohmann::json& j, const Corpus& train_set, const TrainConfig& cfg, RunManifest& manifest) {
  if (auto path = optional_path(j, "trfs")) {
    manifest.add_input("trfs", *path);
    return TrfSet::from_json(read_json(*path));
  }
  return extract_trfs(train_set, cfg.rho, cfg.l, cfg.threads);
}

// Emits the report to --out (plus a manifest) or to stdout.
void emit_report(const nlohmann::json& j, const nlohmann::json& report, RunManifest& manifest) {
  if (auto out = optional_path(j, "out")) {
    write_text(*out, report.dump(2) + "\n");
    manifest.add_output("report", *out);
    manifest.set_result(report);
    manifest.write(manifest_path_for(*out));
  } else {
    std::cout << report.dump(2) << '\n';
  }
}

nlohmann::json buckets_json(const std::vector<LengthBucket>& buckets) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& b : buckets) {
    out.push_back({{"bucket", b.name}, {"sentences", b.sentences}, {"scores", b.scores.to_json()}});
  }
  return out;
}

void run_mine(Options& o) {
  const auto j = o.resolve();
  setup_logging(j);
  const auto train_path = required(j, "train");
  const auto out = required(j, "out");
  RunManifest manifest("mine", j, seed_of(j));
  manifest.add_input("train", train_path);
  const Corpus corpus = load_corpus(j, train_path, Split::train);
  const TrfSet trfs =
      extract_trfs(corpus, j.at("rho").get<double>(), j.at("l").get<std::size_t>(), threads_of(j));
  write_text(out, trfs.to_json().dump(2) + "\n");
  manifest.add_output("trfs", out);
  manifest.set_result({{"types", trfs.types()}, {"features", trfs.total_features()}, {"warnings", trfs.warnings}});
  manifest.write(manifest_path_for(out));
  log::info("mine.done", {{"out", out}, {"features", trfs.total_features()}});
}

void run_prompts(Options& o) {
  const auto j = o.resolve();
  setup_logging(j);
  const auto corpus_path = required(j, "corpus");
  const auto trfs_path = required(j, "trfs");
  const auto out = required(j, "out");
  const auto seed = seed_of(j);
  RunManifest manifest("prompts", j, seed);
  manifest.add_input("corpus", corpus_path);
  manifest.add_input("trfs", trfs_path);
  const Corpus corpus = load_corpus(j, corpus_path, Split::train);
  TrfSet trfs = TrfSet::from_json(read_json(trfs_path));
  const auto k = j.at("k").get<std::size_t>();

  EncoderModel model;
  if (auto model_path = optional_path(j, "model")) {
    manifest.add_input("model", *model_path);
    model = load_checkpoint(*model_path).model;
  } else {
    // Without a checkpoint, selection runs on a freshly initialised encoder.
    ModelConfig mc = TrainConfig::desk_profile().model;
    mc.seed = seed;
    model = EncoderModel(mc, build_training_vocabulary(corpus, &trfs, {}, 1), TagSet(trfs.types()));
  }
  const Tagger tagger(std::move(model), std::move(trfs), TrainMode::fine_tune, {true, k});
  std::string lines;
  for (const auto& s : corpus) lines += tagger.prompted_example(s).to_json().dump() + "\n";
  write_text(out, lines);
  manifest.add_output("prompts", out);
  manifest.set_result({{"examples", corpus.size()}});
  manifest.write(manifest_path_for(out));
  log::info("prompts.done", {{"out", out}, {"examples", corpus.size()}});
}

void run_train(Options& o) {
  const auto j = resolve_train_settings(o);
  setup_logging(j);
  const auto train_path = required(j, "train");
  const auto dev_path = required(j, "dev");
  const auto out = required(j, "out");
  const auto trace_path = optional_path(j, "trace").value_or(out + ".trace.json");
  const TrainConfig cfg = train_config_of(j);
  RunManifest manifest("train", j, cfg.seed);
  manifest.add_input("train", train_path);
  manifest.add_input("dev", dev_path);
  const Corpus train_set = load_corpus(j, train_path, Split::train);
  const Corpus dev_set = load_corpus(j, dev_path, Split::dev);

  const bool baseline = j.at("baseline").get<bool>();
  const TrainState state =
      baseline ? train_baseline(train_set, dev_set, cfg) : train(train_set, dev_set, load_or_mine(j, train_set, cfg, manifest), cfg);

  Checkpoint ck = state.best.to_checkpoint();
  ck.metadata["train_config"] = cfg.to_json();
  ck.metadata["baseline"] = baseline;
  ck.metadata["manifest"] = fs::path(manifest_path_for(out)).filename().string();
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_checkpoint(out, ck);
  nlohmann::json trace = state.trace_json();
  trace["config"] = cfg.to_json();
  trace["baseline"] = baseline;
  write_text(trace_path, trace.dump(2) + "\n");

  manifest.add_output("checkpoint", out);
  manifest.add_output("trace", trace_path);
  manifest.set_result({{"best_dev_f1", state.best_dev_f1}, {"best_epoch", state.best_epoch}});
  manifest.write(manifest_path_for(out));
  log::info("train.done", {{"out", out}, {"best_dev_f1", state.best_dev_f1}, {"best_epoch", state.best_epoch}});
}

void run_eval(Options& o) {
  const auto j = o.resolve();
  setup_logging(j);
  const auto model_path = required(j, "model");
  const auto test_path = required(j, "test");
  RunManifest manifest("eval", j, seed_of(j));
  manifest.add_input("model", model_path);
  manifest.add_input("test", test_path);
  const Tagger tagger = Tagger::from_checkpoint(load_checkpoint(model_path));
  const Corpus test = load_corpus(j, test_path, Split::test);

  EvalReport report;
  nlohmann::json extra;
  if (j.at("ood").get<bool>()) {
    std::set<std::string> known(tagger.types().begin(), tagger.types().end());
    if (!j.at("known_types").empty()) {
      known.clear();
      for (const auto& t : j.at("known_types")) known.insert(t.get<std::string>());
    }
    report = evaluate_ood(tagger, test, known, threads_of(j));
    extra["known_types"] = known;
  } else {
    report = evaluate(tagger, test, threads_of(j));
  }
  nlohmann::json r = report.to_json();
  r["ood"] = j.at("ood").get<bool>();
  if (!extra.is_null()) r.update(extra);
  emit_report(j, r, manifest);
  log::info("eval.done", {{"micro_f1", report.scores.micro_f1()}});
}

void run_analyze(Options& o) {
  const auto j = o.resolve();
  setup_logging(j);
  const bool buckets = j.at("buckets").get<bool>();
  const bool similarity = j.at("similarity").get<bool>();
  if (!buckets && !similarity) throw UsageError("choose --buckets and/or --similarity");
  const auto model_path = required(j, "model");
  const auto test_path = required(j, "test");
  RunManifest manifest("analyze", j, seed_of(j));
  manifest.add_input("model", model_path);
  manifest.add_input("test", test_path);
  const Tagger tagger = Tagger::from_checkpoint(load_checkpoint(model_path));
  const Corpus test = load_corpus(j, test_path, Split::test);

  nlohmann::json report = nlohmann::json::object();
  if (buckets) report["length_buckets"] = buckets_json(length_bucket_report(tagger, test, threads_of(j)));
  if (similarity) {
    const auto source_path = required(j, "source");
    manifest.add_input("source", source_path);
    const Corpus source = load_corpus(j, source_path, Split::test);
    const auto seed = seed_of(j);
    const auto pairs = j.at("max_pairs").get<std::size_t>();
    nlohmann::json sim;
    sim["with_prompts"] = similarity_report(tagger, source, test, true, seed, pairs);
    sim["without_prompts"] = similarity_report(tagger, source, test, false, seed, pairs);
    if (auto baseline_path = optional_path(j, "baseline")) {
      manifest.add_input("baseline", *baseline_path);
      const Tagger baseline = Tagger::from_checkpoint(load_checkpoint(*baseline_path));
      sim["baseline_without_prompts"] = similarity_report(baseline, source, test, false, seed, pairs);
    }
    report["similarity"] = sim;
  }
  emit_report(j, report, manifest);
}

void run_synth(Options& o) {
  const auto j = o.resolve();
  setup_logging(j);
  const auto out_dir = required(j, "out_dir");
  SynthSpec spec;
  std::optional<std::string> spec_path = optional_path(j, "spec");
  if (spec_path) spec = SynthSpec::from_json(read_json(*spec_path));
  if (auto seed = explicit_seed(j)) spec.seed = *seed;
  RunManifest manifest("synth", j, spec.seed);
  if (spec_path) manifest.add_input("spec", *spec_path);

  const double target = j.at("target_overlap").get<double>();
  if (target >= 0.0) spec = calibrate_shift(spec, target, j.at("tolerance").get<double>());
  const SynthBenchmark bench = generate(spec);

  fs::create_directories(out_dir);
  const std::vector<std::pair<std::string, const Corpus*>> files{{"source_train", &bench.source_train},
                                                                 {"source_dev", &bench.source_dev},
                                                                 {"source_test", &bench.source_test},
                                                                 {"target_dev", &bench.target_dev},
                                                                 {"target_test", &bench.target_test}};
  for (const auto& [name, corpus] : files) {
    const auto path = (fs::path(out_dir) / (name + ".conll")).string();
    write_text(path, write_conll(*corpus));
    manifest.add_output(name, path);
  }
  nlohmann::json data = bench.manifest(spec);
  data["run_manifest"] = "run.manifest.json";
  const auto data_path = (fs::path(out_dir) / "manifest.json").string();
  write_text(data_path, data.dump(2) + "\n");
  manifest.add_output("manifest", data_path);
  manifest.set_result({{"shift", spec.shift}, {"entity_overlap", bench.entity_overlap}});
  manifest.write((fs::path(out_dir) / "run.manifest.json").string());
  log::info("synth.done", {{"out_dir", out_dir}, {"shift", spec.shift}, {"entity_overlap", bench.entity_overlap}});
}

void run_sweep(Options& o) {
  const auto j = resolve_train_settings(o);
  setup_logging(j);
  const auto train_path = required(j, "train");
  const auto dev_path = required(j, "dev");
  TrainConfig cfg = train_config_of(j);
  RunManifest manifest("sweep", j, cfg.seed);
  manifest.add_input("train", train_path);
  manifest.add_input("dev", dev_path);
  const Corpus train_set = load_corpus(j, train_path, Split::train);
  const Corpus dev_set = load_corpus(j, dev_path, Split::dev);
  const TrfSet trfs = load_or_mine(j, train_set, cfg, manifest);

  const auto& grid = j.at("alpha_grid");
  if (!grid.is_array() || grid.empty()) throw ValidationError("alpha grid must be a non-empty list");
  nlohmann::json runs = nlohmann::json::array();
  double best_alpha = 0.0;
  double best_f1 = -1.0;
  for (const auto& a : grid) {
    cfg.alpha = a.get<double>();
    cfg.validate();
    const TrainState state = train(train_set, dev_set, trfs, cfg);
    runs.push_back({{"alpha", cfg.alpha}, {"best_dev_f1", state.best_dev_f1}, {"best_epoch", state.best_epoch}});
    log::info("sweep.point", runs.back());
    if (state.best_dev_f1 > best_f1) {
      best_f1 = state.best_dev_f1;
      best_alpha = cfg.alpha;
    }
  }
  emit_report(j, {{"runs", runs}, {"best_alpha", best_alpha}, {"best_dev_f1", best_f1}}, manifest);
  log::info("sweep.done", {{"best_alpha", best_alpha}, {"best_dev_f1", best_f1}});
}

Command make(CLI::App& parent, const std::string& name, const std::string& help,
             const std::function<void(Options&)>& declare, std::function<void(Options&)> run) {
  Command c;
  c.app = parent.add_subcommand(name, help);
  c.options = std::make_unique<Options>(c.app);
  declare(*c.options);
  add_common(*c.options);
  c.run = std::move(run);
  return c;
}

}  // namespace

std::vector<Command> register_commands(CLI::App& app) {
  std::vector<Command> commands;
  commands.push_back(make(
      app, "mine", "mine type-related features from a labelled corpus",
      [](Options& o) {
        o.add("train", nullptr, "training corpus (CoNLL or .jsonl)");
        o.add("rho", kDefaultRho, "frequency-ratio threshold");
        o.add("l", kDefaultTrfsPerType, "features kept per type");
        o.add("out", nullptr, "output TRF JSON");
        add_corpus_format(o);
      },
      run_mine));
  commands.push_back(make(
      app, "prompts", "select TRFs and render entity prompts for a corpus",
      [](Options& o) {
        o.add("corpus", nullptr, "input corpus");
        o.add("trfs", nullptr, "TRF JSON from `pltr mine`");
        o.add("k", kDeskSelectedTrfs, "TRFs selected per sentence");
        o.add("model", nullptr, "checkpoint whose encoder runs the selection (default: fresh encoder)");
        o.add("out", nullptr, "output JSONL");
        add_corpus_format(o);
      },
      run_prompts));
  commands.push_back(make(
      app, "train", "train a tagger with TRF prompts (or the plain baseline)",
      [](Options& o) {
        o.add("train", nullptr, "training corpus");
        o.add("dev", nullptr, "development corpus for checkpoint selection");
        o.add("trfs", nullptr, "TRF JSON (default: mined from the training corpus)");
        o.add("out", nullptr, "output checkpoint");
        o.add("trace", nullptr, "loss trace JSON (default: <out>.trace.json)");
        o.add("baseline", false, "train without prompts and without the generation loss");
        add_train_settings(o);
        add_corpus_format(o);
      },
      run_train));
  commands.push_back(make(
      app, "eval", "entity-level micro-F1 of a checkpoint",
      [](Options& o) {
        o.add("model", nullptr, "checkpoint");
        o.add("test", nullptr, "test corpus");
        o.add("ood", false, "map gold types unknown to the model to O");
        o.add("known_types", nlohmann::json::array(), "comma-separated known types for --ood (default: model types)");
        o.add("out", nullptr, "report JSON (default: stdout)");
        add_corpus_format(o);
      },
      run_eval));
  commands.push_back(make(
      app, "analyze", "length buckets and cross-domain representation similarity",
      [](Options& o) {
        o.add("model", nullptr, "checkpoint");
        o.add("test", nullptr, "corpus to analyse (the target domain for --similarity)");
        o.add("buckets", false, "F1 by sentence length (<25, 25-35, >35)");
        o.add("similarity", false, "mean cross-domain cosine similarity with and without prompts");
        o.add("source", nullptr, "source-domain corpus for --similarity");
        o.add("baseline", nullptr, "baseline checkpoint to compare under --similarity");
        o.add("max_pairs", kMaxSimilarityPairs, "sentence pairs sampled for --similarity");
        o.add("out", nullptr, "report JSON (default: stdout)");
        add_corpus_format(o);
      },
      run_analyze));
  commands.push_back(make(
      app, "synth", "generate the synthetic two-domain benchmark",
      [](Options& o) {
        o.add("spec", nullptr, "generator spec JSON (default: built-in spec)");
        o.add("out_dir", nullptr, "output directory");
        o.add("target_overlap", 0.11, "calibrate the lexicon shift to this entity overlap (negative: keep spec shift)");
        o.add("tolerance", 0.01, "overlap calibration tolerance");
      },
      run_synth));
  commands.push_back(make(
      app, "sweep", "train over a grid of loss weights and report the dev-best alpha",
      [](Options& o) {
        o.add("train", nullptr, "training corpus");
        o.add("dev", nullptr, "development corpus");
        o.add("trfs", nullptr, "TRF JSON (default: mined from the training corpus)");
        o.add("alpha_grid", alpha_grid(), "comma-separated alpha values");
        o.add("out", nullptr, "report JSON (default: stdout)");
        add_train_settings(o);
        add_corpus_format(o);
      },
      run_sweep));
  return commands;
}

}  // namespace pltr::cli
