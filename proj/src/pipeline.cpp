#include "mtaudit/pipeline.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include <nlohmann/json.hpp>

#include "mtaudit/attack.hpp"
#include "mtaudit/splitter.hpp"
#include "mtaudit/io_util.hpp"
#include "mtaudit/rng.hpp"

namespace mtaudit::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using corpus::SentencePair;

namespace {

// ---- run directory lock -------------------------------------------------------

class RunLock {
 public:
  explicit RunLock(const fs::path& out_dir) : path_(out_dir / "run.lock") {
    fs::create_directories(out_dir);
    if (fs::exists(path_)) {
      const std::string content = read_file(path_);
      const long pid = std::strtol(content.c_str(), nullptr, 10);
      if (pid > 0 && ::kill(static_cast<pid_t>(pid), 0) == 0 && pid != ::getpid()) {
        throw ConfigError("run directory " + out_dir.string() + " is locked by pid " +
                          std::to_string(pid) + " (" + path_.string() + ")");
      }
    }
    write_file_atomic(path_, std::to_string(::getpid()) + "\n");
  }

  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

// ---- run manifest --------------------------------------------------------------

json load_manifest(const config::RunConfig& config) {
  const fs::path path = config.out_dir / "manifest.json";
  if (fs::exists(path)) {
    try {
      return json::parse(read_file(path));
    } catch (const json::exception&) {
      // A corrupt manifest only disables resume; stages rebuild from scratch.
    }
  }
  return {{"format", "mtaudit-run-manifest-v1"},
          {"version", std::string(kToolkitVersion)},
          {"rng", std::string(kRngVersion)},
          {"group_sampling", "uniform-across-subcorpora"},
          {"config", config.to_json()},
          {"stages", json::object()}};
}

void save_manifest(const config::RunConfig& config, json manifest) {
  manifest["config"] = config.to_json();
  manifest["version"] = std::string(kToolkitVersion);
  write_file_atomic(config.out_dir / "manifest.json", manifest.dump(2) + "\n");
}

struct StageTimer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::int64_t elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

json outputs_digest(const fs::path& out_dir, const std::vector<fs::path>& outputs) {
  json digests = json::object();
  for (const auto& rel : outputs)
    digests[rel.string()] = file_digest(out_dir / rel);
  return digests;
}

bool stage_uptodate(const json& manifest, const std::string& stage,
                    const std::string& config_digest, const fs::path& out_dir,
                    const std::vector<fs::path>& outputs) {
  if (!manifest.contains("stages")) return false;
  const auto& stages = manifest.at("stages");
  if (!stages.contains(stage)) return false;
  if (stages.at(stage).value("config_digest", "") != config_digest) return false;
  for (const auto& rel : outputs) {
    if (!fs::exists(out_dir / rel)) return false;
  }
  return true;
}

// ---- shared context -------------------------------------------------------------

struct Context {
  const config::RunConfig& config;
  fs::path out;
  std::vector<SentencePair> corpus;
  splitter::CorpusSplits carol;
  std::vector<splitter::ShadowSplit> shadows;

  explicit Context(const config::RunConfig& c) : config(c), out(c.out_dir) {}
};

std::map<std::string, Tier> tier_map(const config::RunConfig& config) {
  std::map<std::string, Tier> tiers;
  for (const auto& d : config.domains) tiers[d.name] = d.tier;
  return tiers;
}

void load_split_artifacts(Context& ctx) {
  const fs::path tsv = ctx.out / "corpus" / "corpus.tsv";
  const fs::path carol_path = ctx.out / "splits" / "carol.json";
  const fs::path shadow_path = ctx.out / "splits" / "shadow.json";
  for (const auto& path : {tsv, carol_path, shadow_path}) {
    if (!fs::exists(path))
      throw ConfigError("missing " + path.string() + "; run the split stage first");
  }
  ctx.corpus = corpus::read_canonical_tsv(tsv, tier_map(ctx.config));
  ctx.carol = splitter::splits_from_manifest(json::parse(read_file(carol_path)), ctx.corpus);
  ctx.shadows =
      splitter::shadow_from_manifest(json::parse(read_file(shadow_path)), ctx.carol.b_all);
}

// ---- oracles ---------------------------------------------------------------------

std::vector<std::string> reference_vocab_tokens(std::span<const SentencePair> pairs) {
  std::set<std::string> types;
  for (const auto& p : pairs) types.insert(p.reference.begin(), p.reference.end());
  return {types.begin(), types.end()};
}

std::vector<SentencePair> materialize(std::span<const SentencePair> pool,
                                      const std::vector<PairKey>& keys) {
  std::unordered_set<PairKey, PairKeyHash> wanted(keys.begin(), keys.end());
  std::vector<SentencePair> out;
  out.reserve(keys.size());
  for (const auto& p : pool) {
    if (wanted.count(p.key())) out.push_back(p);
  }
  return out;
}

std::unique_ptr<translator::Oracle> make_alice_oracle(const Context& ctx) {
  const auto& oracle = ctx.config.alice;
  switch (oracle.kind) {
    case config::OracleKind::synthetic: {
      translator::MemorizingConfig mem;
      for (const auto& p : ctx.carol.a_train) mem.member_set.insert(p.key());
      mem.memorization_rate = oracle.memorization_rate;
      mem.noise_rate = oracle.noise_rate;
      mem.seed = oracle.seed;
      mem.vocabulary = reference_vocab_tokens(ctx.carol.a_train);
      return std::make_unique<translator::SyntheticOracle>("alice", std::move(mem));
    }
    case config::OracleKind::file_cache:
      return std::make_unique<translator::FileCacheOracle>(oracle.path, oracle.oracle_id);
    case config::OracleKind::http_api: {
      translator::HttpOracleConfig http;
      http.endpoint = oracle.endpoint;
      http.auth_env = oracle.auth_env;
      http.max_in_flight = oracle.max_in_flight;
      http.requests_per_second = oracle.requests_per_second;
      http.max_retries = oracle.max_retries;
      http.backoff_ms = oracle.backoff_ms;
      http.batch_size = oracle.batch_size;
      return std::make_unique<translator::HttpOracle>("alice", std::move(http));
    }
  }
  throw Error("unreachable oracle kind");
}

std::unique_ptr<translator::Oracle> make_shadow_oracle(const Context& ctx,
                                                       const splitter::ShadowSplit& split) {
  const auto& oracle = ctx.config.shadow;
  const std::string id = "shadow:" + split.id();
  switch (oracle.kind) {
    case config::OracleKind::synthetic: {
      translator::MemorizingConfig mem;
      mem.member_set.insert(split.b_train.begin(), split.b_train.end());
      mem.memorization_rate = oracle.memorization_rate;
      mem.noise_rate = oracle.noise_rate;
      mem.seed = derive_seed(oracle.seed, id);
      mem.vocabulary = reference_vocab_tokens(materialize(ctx.carol.b_all, split.b_train));
      return std::make_unique<translator::SyntheticOracle>(id, std::move(mem));
    }
    case config::OracleKind::file_cache:
      return std::make_unique<translator::FileCacheOracle>(oracle.path,
                                                           oracle.oracle_id + ":" + split.id());
    case config::OracleKind::http_api:
      break;
  }
  throw ConfigError("shadow oracles must be synthetic or file_cache");
}

// ---- probe records ---------------------------------------------------------------

struct RecordSets {
  std::vector<features::ProbeRecord> bob_train;
  std::vector<features::ProbeRecord> bob_valid;
  std::vector<features::ProbeRecord> bob_test;
  std::vector<features::ProbeRecord> alice;
  std::vector<features::ProbeRecord> ood;
  std::map<std::string, std::int64_t> oracle_calls;
};

// Builds every probe record set, translating through the persistent cache
// (one oracle call per pair on a cold cache, zero on reruns).
RecordSets build_record_sets(const Context& ctx, translator::TranslationStore& store) {
  RecordSets sets;

  for (const auto& split : ctx.shadows) {
    auto oracle = make_shadow_oracle(ctx, split);
    const auto b_train_pairs = materialize(ctx.carol.b_all, split.b_train);
    const auto src_vocab = corpus::build_vocab(b_train_pairs, corpus::Side::source);
    const auto ref_vocab = corpus::build_vocab(b_train_pairs, corpus::Side::reference);
    auto in_records = attack::make_probe_records(split.b_in, Membership::in, *oracle, &store,
                                                 src_vocab, ref_vocab);
    auto out_records = attack::make_probe_records(split.b_out, Membership::out, *oracle,
                                                  &store, src_vocab, ref_vocab);
    auto* destination = &sets.bob_train;
    if (split.role == splitter::ShadowRole::attack_validation) destination = &sets.bob_valid;
    if (split.role == splitter::ShadowRole::attack_test) destination = &sets.bob_test;
    destination->insert(destination->end(), in_records.begin(), in_records.end());
    destination->insert(destination->end(), out_records.begin(), out_records.end());
    sets.oracle_calls[oracle->id()] += oracle->calls();
  }

  // Bob flags Alice-side probes against the broadest vocabulary he has.
  const auto src_vocab = corpus::build_vocab(ctx.carol.b_all, corpus::Side::source);
  const auto ref_vocab = corpus::build_vocab(ctx.carol.b_all, corpus::Side::reference);
  auto alice = make_alice_oracle(ctx);
  auto alice_in = attack::make_probe_records(ctx.carol.a_in, Membership::in, *alice, &store,
                                             src_vocab, ref_vocab);
  auto alice_out = attack::make_probe_records(ctx.carol.a_out, Membership::out, *alice,
                                              &store, src_vocab, ref_vocab);
  sets.alice = std::move(alice_in);
  sets.alice.insert(sets.alice.end(), alice_out.begin(), alice_out.end());
  sets.ood = attack::make_probe_records(ctx.carol.a_ood, Membership::out, *alice, &store,
                                        src_vocab, ref_vocab);
  sets.oracle_calls[alice->id()] += alice->calls();
  return sets;
}

const std::vector<features::ProbeRecord>& select_set(const RecordSets& sets,
                                                     const std::string& name) {
  if (name == "bob_train") return sets.bob_train;
  if (name == "bob_valid") return sets.bob_valid;
  if (name == "bob_test") return sets.bob_test;
  if (name == "alice") return sets.alice;
  if (name == "ood") return sets.ood;
  throw ConfigError("unknown record set '" + name +
                    "' (expected bob_train|bob_valid|bob_test|alice|ood)");
}

// ---- text tables ------------------------------------------------------------------

std::string pct(double accuracy) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.1f", accuracy * 100.0);
  return buf;
}

std::string pad(const std::string& text, std::size_t width) {
  if (text.size() >= width) return text + " ";
  return text + std::string(width - text.size(), ' ');
}

std::vector<classifiers::ClassifierKind> canonical_order(
    const std::vector<classifiers::ClassifierSpec>& specs) {
  std::vector<classifiers::ClassifierKind> order;
  for (const auto kind :
       {classifiers::ClassifierKind::perceptron, classifiers::ClassifierKind::decision_tree,
        classifiers::ClassifierKind::gaussian_nb, classifiers::ClassifierKind::knn,
        classifiers::ClassifierKind::mlp}) {
    for (const auto& spec : specs) {
      if (spec.kind == kind) order.push_back(kind);
    }
  }
  return order;
}

using ReportsByKind = std::map<classifiers::ClassifierKind, attack::AttackReport>;
using ReportTable = std::map<std::string, ReportsByKind>;  // dataset -> kind -> report

std::string render_summary_table(const std::vector<classifiers::ClassifierKind>& order,
                                 const ReportTable& reports,
                                 const std::vector<std::string>& datasets,
                                 const std::vector<std::string>& headers) {
  std::string out = pad("classifier", 12);
  for (const auto& h : headers) out += pad(h, 11);
  out += "\n";
  for (const auto kind : order) {
    out += pad(std::string(classifiers::short_label(kind)), 12);
    for (const auto& dataset : datasets) {
      const auto it = reports.find(dataset);
      if (it == reports.end() || !it->second.count(kind)) {
        out += pad("n/a", 11);
      } else {
        out += pad(pct(it->second.at(kind).accuracy), 11);
      }
    }
    out += "\n";
  }
  return out;
}

std::string render_slice_table(const std::vector<classifiers::ClassifierKind>& order,
                               const ReportsByKind& reports,
                               const std::vector<std::string>& slices,
                               const char* slice_kind) {
  std::string out = pad("classifier", 12);
  for (const auto& s : slices) out += pad(s, 18);
  out += "\n";
  for (const auto kind : order) {
    out += pad(std::string(classifiers::short_label(kind)), 12);
    const auto it = reports.find(kind);
    for (const auto& s : slices) {
      if (it == reports.end()) {
        out += pad("n/a", 18);
        continue;
      }
      const auto& slice_map = std::string(slice_kind) == "subcorpus"
                                  ? it->second.subcorpus_slices
                                  : it->second.oov_slices;
      const auto found = slice_map.find(s);
      out += pad(found == slice_map.end() ? "n/a" : pct(found->second.accuracy), 18);
    }
    out += "\n";
  }
  return out;
}

// ---- table-1 style size summary -----------------------------------------------------

std::string render_split_summary(const Context& ctx) {
  std::map<std::string, std::array<std::int64_t, 5>> counts;  // a_out a_in a_train b_all a_ood
  const auto tally = [&](std::span<const SentencePair> pairs, int column) {
    for (const auto& p : pairs) ++counts[p.domain][static_cast<std::size_t>(column)];
  };
  tally(ctx.carol.a_out, 0);
  tally(ctx.carol.a_in, 1);
  tally(ctx.carol.a_train, 2);
  tally(ctx.carol.b_all, 3);
  tally(ctx.carol.a_ood, 4);

  std::string out = pad("subcorpus", 14) + pad("tier", 9) + pad("a_out", 10) +
                    pad("a_in", 10) + pad("a_train", 10) + pad("b_all", 10) +
                    pad("a_ood", 10) + "\n";
  std::array<std::int64_t, 5> totals{};
  for (const auto& d : ctx.config.domains) {
    const auto& row = counts[d.name];
    out += pad(d.name, 14) + pad(std::string(to_string(d.tier)), 9);
    for (int c = 0; c < 5; ++c) {
      const bool ood_domain = d.tier == Tier::ood;
      const bool applicable = ood_domain ? c == 4 : c != 4;
      if (applicable) {
        out += pad(std::to_string(row[static_cast<std::size_t>(c)]), 10);
        totals[static_cast<std::size_t>(c)] += row[static_cast<std::size_t>(c)];
      } else {
        out += pad("n/a", 10);
      }
    }
    out += "\n";
  }
  out += pad("TOTAL", 14) + pad("", 9);
  for (int c = 0; c < 5; ++c) out += pad(std::to_string(totals[static_cast<std::size_t>(c)]), 10);
  out += "\n";
  if (ctx.carol.params.hold_spare_probe) {
    out += "spare probe block held: " + std::to_string(ctx.carol.spare.size()) + " pairs\n";
  }
  return out;
}

std::string stage_config_digest(const config::RunConfig& config,
                                std::initializer_list<const char*> sections) {
  const json full = config.to_json();
  json subset = {{"version", std::string(kToolkitVersion)}};
  for (const auto* section : sections) subset[section] = full.at(section);
  return content_digest(subset.dump());
}

void record_stage(const config::RunConfig& config, const std::string& stage,
                  const std::string& digest, const std::vector<fs::path>& outputs,
                  const std::map<std::string, std::int64_t>& oracle_calls,
                  const StageTimer& timer, json extra = json::object()) {
  json manifest = load_manifest(config);
  json calls = json::object();
  for (const auto& [id, count] : oracle_calls) calls[id] = count;
  json entry = {{"config_digest", digest},
                {"outputs", outputs_digest(config.out_dir, outputs)},
                {"oracle_calls", calls},
                {"duration_ms", timer.elapsed_ms()}};
  for (const auto& [key, value] : extra.items()) entry[key] = value;
  manifest["stages"][stage] = entry;
  save_manifest(config, manifest);
}

}  // namespace

// ---- split --------------------------------------------------------------------------

void cmd_split(const config::RunConfig& config) {
  RunLock lock(config.out_dir);
  StageTimer timer;
  const std::string digest = stage_config_digest(config, {"corpus", "splits", "seed"});
  const std::vector<fs::path> outputs = {
      fs::path("corpus/corpus.tsv"), fs::path("corpus/stats.json"),
      fs::path("splits/carol.json"), fs::path("splits/shadow.json"),
      fs::path("splits/summary.txt")};
  if (stage_uptodate(load_manifest(config), "split", digest, config.out_dir, outputs)) {
    std::cout << "split: up to date\n"
              << read_file(config.out_dir / "splits/summary.txt");
    return;
  }

  Context ctx(config);
  json stats = {{"domains", json::object()}};
  for (const auto& domain : config.domains) {
    auto loaded =
        corpus::load_parallel_corpus(domain.source, domain.reference, {domain.name, domain.tier});
    auto deduped = corpus::deduplicate(std::move(loaded.pairs));
    stats["domains"][domain.name] = {
        {"pairs", static_cast<std::int64_t>(deduped.pairs.size())},
        {"duplicates_removed", deduped.removed}};
    ctx.corpus.insert(ctx.corpus.end(), deduped.pairs.begin(), deduped.pairs.end());
  }

  ctx.carol = splitter::make_carol_splits(
      ctx.corpus, {config.splits.k, config.splits.spare_probe, config.splits.seed});
  const auto violations = splitter::verify_splits(ctx.carol);
  if (!violations.empty())
    throw Error("split construction violated '" + violations.front().check +
                "' at " + violations.front().detail);
  const splitter::ShadowParams shadow_params{config.splits.shadow_groups,
                                             config.splits.shadow_k,
                                             config.splits.shadow_seed};
  ctx.shadows = splitter::make_shadow_splits(ctx.carol.b_all, shadow_params);
  const auto shadow_violations = splitter::verify_shadow_splits(ctx.shadows, ctx.carol);
  if (!shadow_violations.empty())
    throw Error("shadow split construction violated '" + shadow_violations.front().check +
                "' at " + shadow_violations.front().detail);

  corpus::write_canonical_tsv(config.out_dir / "corpus/corpus.tsv", ctx.corpus);
  write_file_atomic(config.out_dir / "corpus/stats.json", stats.dump(2) + "\n");
  write_file_atomic(config.out_dir / "splits/carol.json",
                    splitter::carol_manifest(ctx.carol).dump(2) + "\n");
  write_file_atomic(config.out_dir / "splits/shadow.json",
                    splitter::shadow_manifest(ctx.shadows, shadow_params).dump(2) + "\n");
  const std::string summary = render_split_summary(ctx);
  write_file_atomic(config.out_dir / "splits/summary.txt", summary);
  std::cout << summary;

  record_stage(config, "split", digest, outputs, {}, timer);
}

// ---- translate ------------------------------------------------------------------------

void cmd_translate(const config::RunConfig& config, const std::string& set_name) {
  RunLock lock(config.out_dir);
  StageTimer timer;
  Context ctx(config);
  load_split_artifacts(ctx);
  translator::TranslationStore store(config.out_dir / "cache/translations.tsv");
  std::map<std::string, std::int64_t> calls;

  const bool all = set_name == "all";
  if (set_name == "alice" || set_name == "ood" || all) {
    auto alice = make_alice_oracle(ctx);
    if (set_name == "alice" || all) {
      store.translate_batch(*alice, ctx.carol.a_in);
      store.translate_batch(*alice, ctx.carol.a_out);
    }
    if (set_name == "ood" || all) store.translate_batch(*alice, ctx.carol.a_ood);
    calls[alice->id()] += alice->calls();
  }
  if (set_name == "shadow" || all) {
    for (const auto& split : ctx.shadows) {
      auto oracle = make_shadow_oracle(ctx, split);
      store.translate_batch(*oracle, split.b_in);
      store.translate_batch(*oracle, split.b_out);
      calls[oracle->id()] += oracle->calls();
    }
  }
  if (set_name == "heldout" || (all && ctx.carol.params.hold_spare_probe)) {
    if (!ctx.carol.params.hold_spare_probe)
      throw ConfigError("translate heldout requires splits.spare_probe=true");
    auto alice = make_alice_oracle(ctx);
    store.translate_batch(*alice, ctx.carol.spare);
    calls[alice->id()] += alice->calls();
    for (const auto& split : ctx.shadows) {
      auto oracle = make_shadow_oracle(ctx, split);
      store.translate_batch(*oracle, ctx.carol.spare);
      calls[oracle->id()] += oracle->calls();
    }
  }
  if (!all && set_name != "alice" && set_name != "ood" && set_name != "shadow" &&
      set_name != "heldout")
    throw ConfigError("unknown translate set '" + set_name +
                      "' (expected alice|ood|shadow|heldout|all)");

  std::int64_t total = 0;
  for (const auto& [id, count] : calls) total += count;
  std::cout << "translate " << set_name << ": " << total << " oracle call(s), cache now "
            << store.size() << " entrie(s)\n";
  record_stage(config, "translate:" + set_name,
               stage_config_digest(config, {"corpus", "splits", "oracles", "seed"}),
               {fs::path("cache/translations.tsv")}, calls, timer);
}

// ---- features ---------------------------------------------------------------------------

void cmd_features(const config::RunConfig& config, const std::string& set_name,
                  bool with_labels) {
  RunLock lock(config.out_dir);
  StageTimer timer;
  Context ctx(config);
  load_split_artifacts(ctx);
  translator::TranslationStore store(config.out_dir / "cache/translations.tsv");
  const RecordSets sets = build_record_sets(ctx, store);
  const auto& records = select_set(sets, set_name);

  features::FeatureOptions options;
  options.include_model_score = config.features.include_model_score;
  options.external_names = config.features.external_names;
  std::unique_ptr<features::ExternalScores> external;
  if (config.features.external_scores_path)
    external = std::make_unique<features::ExternalScores>(
        features::ExternalScores::load(*config.features.external_scores_path));

  std::string csv = "domain,index";
  for (const auto& column : features::feature_schema(options)) csv += "," + column;
  if (with_labels) csv += ",label";
  csv += "\n";
  char buf[40];
  for (const auto& record : records) {
    csv += record.pair.domain + "," + std::to_string(record.pair.index);
    const auto fv = features::sentence_features(record, options, external.get());
    for (const double v : fv.values()) {
      std::snprintf(buf, sizeof(buf), ",%.12g", v);
      csv += buf;
    }
    if (with_labels) csv += "," + std::string(to_string(record.membership_label()));
    csv += "\n";
  }
  const fs::path rel = fs::path("features") / (set_name + ".csv");
  write_file_atomic(config.out_dir / rel, csv);
  std::cout << "features " << set_name << ": " << records.size() << " row(s) -> "
            << (config.out_dir / rel).string() << "\n";
  record_stage(config, "features:" + set_name,
               stage_config_digest(config, {"corpus", "splits", "oracles", "features", "seed"}),
               {rel}, sets.oracle_calls, timer);
}

// ---- attack -----------------------------------------------------------------------------

void cmd_attack(const config::RunConfig& config) {
  RunLock lock(config.out_dir);
  StageTimer timer;
  const std::string digest = stage_config_digest(
      config, {"corpus", "splits", "oracles", "features", "classifiers", "seed"});

  Context ctx(config);
  load_split_artifacts(ctx);
  const auto order = canonical_order(config.classifiers);
  std::vector<fs::path> outputs = {fs::path("reports/sentence_summary.txt"),
                                   fs::path("reports/sentence_per_subcorpus.txt"),
                                   fs::path("reports/sentence_oov.txt")};
  const std::vector<std::string> datasets = {"alice", "bob_train", "bob_valid", "bob_test",
                                             "ood"};
  for (const auto kind : order) {
    outputs.push_back(fs::path("models") /
                      ("sentence_" + std::string(classifiers::to_string(kind)) + ".json"));
    for (const auto& dataset : datasets)
      outputs.push_back(fs::path("reports") /
                        ("sentence_" + dataset + "_" +
                         std::string(classifiers::to_string(kind)) + ".json"));
  }
  if (stage_uptodate(load_manifest(config), "attack", digest, config.out_dir, outputs)) {
    std::cout << "attack: up to date\n"
              << read_file(config.out_dir / "reports/sentence_summary.txt");
    return;
  }

  translator::TranslationStore store(config.out_dir / "cache/translations.tsv");
  const RecordSets sets = build_record_sets(ctx, store);

  features::FeatureOptions options;
  options.include_model_score = config.features.include_model_score;
  options.external_names = config.features.external_names;
  std::unique_ptr<features::ExternalScores> external;
  if (config.features.external_scores_path)
    external = std::make_unique<features::ExternalScores>(
        features::ExternalScores::load(*config.features.external_scores_path));

  const auto models = attack::build_attack_classifiers(
      sets.bob_train, sets.bob_valid, config.classifiers, options, external.get());

  ReportTable reports;
  for (const auto& [kind, model] : models) {
    classifiers::save_model(model,
                            config.out_dir / "models" /
                                ("sentence_" + std::string(classifiers::to_string(kind)) +
                                 ".json"));
    for (const auto& dataset : datasets) {
      const auto report =
          attack::evaluate(model, select_set(sets, dataset), options, external.get(), dataset);
      reports[dataset][kind] = report;
      write_file_atomic(config.out_dir / "reports" /
                            ("sentence_" + dataset + "_" +
                             std::string(classifiers::to_string(kind)) + ".json"),
                        report.to_json().dump(2) + "\n");
    }
  }

  // probe-set summary in the headline layout
  const std::string summary =
      "sentence-level attack accuracy (x100)\n" +
      render_summary_table(order, reports, {"alice", "bob_train", "bob_valid", "bob_test"},
                           {"alice", "bob:train", "bob:valid", "bob:test"});
  write_file_atomic(config.out_dir / "reports/sentence_summary.txt", summary);
  std::cout << summary;

  // per-subcorpus layout: in-domain columns from the alice probe, then ood
  std::vector<std::string> in_domain, ood_domains;
  for (const auto& [name, slice] : reports.at("alice").begin()->second.subcorpus_slices)
    in_domain.push_back(name);
  for (const auto& [name, slice] : reports.at("ood").begin()->second.subcorpus_slices)
    ood_domains.push_back(name);
  std::string per_subcorpus = "alice-probe accuracy per subcorpus (x100)\n" +
                              render_slice_table(order, reports.at("alice"), in_domain,
                                                 "subcorpus") +
                              "\nood-probe accuracy per subcorpus (x100, all-out probes)\n" +
                              render_slice_table(order, reports.at("ood"), ood_domains,
                                                 "subcorpus");
  write_file_atomic(config.out_dir / "reports/sentence_per_subcorpus.txt", per_subcorpus);

  const std::string oov_table =
      "bob:test accuracy on OOV slices (x100)\n" +
      render_slice_table(order, reports.at("bob_test"),
                         {"oov_in_source", "oov_in_reference", "oov_in_both"}, "oov");
  write_file_atomic(config.out_dir / "reports/sentence_oov.txt", oov_table);

  json extra = {{"probe_sizes",
                 {{"alice", sets.alice.size()},
                  {"bob_train", sets.bob_train.size()},
                  {"bob_valid", sets.bob_valid.size()},
                  {"bob_test", sets.bob_test.size()},
                  {"ood", sets.ood.size()}}}};
  record_stage(config, "attack", digest, outputs, sets.oracle_calls, timer, extra);
}

// ---- group attack ------------------------------------------------------------------------

void cmd_group_attack(const config::RunConfig& config) {
  RunLock lock(config.out_dir);
  StageTimer timer;
  const std::string digest = stage_config_digest(
      config, {"corpus", "splits", "oracles", "features", "classifiers", "group", "seed"});

  Context ctx(config);
  load_split_artifacts(ctx);
  const auto order = canonical_order(config.classifiers);
  std::vector<fs::path> outputs = {fs::path("reports/group_summary.txt")};
  const std::vector<std::string> datasets = {"bob_train", "bob_valid", "bob_test", "alice",
                                             "alice_adjusted"};
  for (const auto kind : order) {
    const std::string kind_name(classifiers::to_string(kind));
    outputs.push_back(fs::path("models") / ("group_" + kind_name + ".json"));
    outputs.push_back(fs::path("reports") / ("sweep_" + kind_name + ".csv"));
    for (const auto& dataset : datasets)
      outputs.push_back(fs::path("reports") / ("group_" + dataset + "_" + kind_name + ".json"));
  }
  if (stage_uptodate(load_manifest(config), "group-attack", digest, config.out_dir,
                     outputs)) {
    std::cout << "group-attack: up to date\n"
              << read_file(config.out_dir / "reports/group_summary.txt");
    return;
  }

  translator::TranslationStore store(config.out_dir / "cache/translations.tsv");
  RecordSets sets = build_record_sets(ctx, store);

  // mean-BLEU adjustment for the alice side
  double delta = config.group.delta_bleu.value_or(0.0);
  if (config.group.measure_delta) {
    auto alice = make_alice_oracle(ctx);
    std::vector<std::unique_ptr<translator::Oracle>> shadow_owners;
    std::vector<translator::Oracle*> shadow_ptrs;
    for (const auto& split : ctx.shadows) {
      shadow_owners.push_back(make_shadow_oracle(ctx, split));
      shadow_ptrs.push_back(shadow_owners.back().get());
    }
    delta = attack::measure_bleu_gap(*alice, shadow_ptrs, ctx.carol.spare, &store);
    sets.oracle_calls[alice->id()] += alice->calls();
    for (std::size_t i = 0; i < shadow_owners.size(); ++i)
      sets.oracle_calls[shadow_owners[i]->id()] += shadow_owners[i]->calls();
  }
  const bool adjusted_enabled = config.group.measure_delta || config.group.delta_bleu.has_value();

  const auto train_evals = features::evaluate_sentences(sets.bob_train);
  const auto valid_evals = features::evaluate_sentences(sets.bob_valid);
  const auto test_evals = features::evaluate_sentences(sets.bob_test);
  const auto alice_evals = features::evaluate_sentences(sets.alice);

  const auto train_groups = features::sample_training_groups(
      sets.bob_train, train_evals, config.group.size, config.group.n_groups,
      config.group.seed);
  const auto valid_parts =
      features::partition_eval_groups(sets.bob_valid, valid_evals, config.group.size);
  const auto test_parts =
      features::partition_eval_groups(sets.bob_test, test_evals, config.group.size);
  const auto alice_parts =
      features::partition_eval_groups(sets.alice, alice_evals, config.group.size);
  features::PartitionedGroups alice_adjusted;
  if (adjusted_enabled)
    alice_adjusted =
        features::partition_eval_groups(sets.alice, alice_evals, config.group.size, delta);
  for (const auto& [name, dropped] :
       std::initializer_list<std::pair<const char*, std::int64_t>>{
           {"bob_valid", valid_parts.dropped},
           {"bob_test", test_parts.dropped},
           {"alice", alice_parts.dropped}}) {
    if (dropped > 0)
      std::cout << "warning: " << name << ": dropped " << dropped
                << " trailing record(s) not filling a group of " << config.group.size << "\n";
  }

  const auto models =
      attack::train_group_classifiers(train_groups, valid_parts.groups, config.classifiers);

  ReportTable reports;
  for (const auto& [kind, model] : models) {
    const std::string kind_name(classifiers::to_string(kind));
    classifiers::save_model(model, config.out_dir / "models" / ("group_" + kind_name + ".json"));

    const auto eval_of = [&](std::span<const features::LabeledGroup> groups,
                             const std::string& dataset) {
      auto result = attack::evaluate_groups(model, groups, dataset);
      reports[dataset][kind] = result.report;
      write_file_atomic(config.out_dir / "reports" /
                            ("group_" + dataset + "_" + kind_name + ".json"),
                        result.report.to_json().dump(2) + "\n");
      return result;
    };

    eval_of(train_groups, "bob_train");
    eval_of(valid_parts.groups, "bob_valid");
    eval_of(test_parts.groups, "bob_test");
    const auto alice_eval = eval_of(alice_parts.groups, "alice");
    attack::GroupEvalResult sweep_source = alice_eval;
    if (adjusted_enabled) {
      sweep_source = eval_of(alice_adjusted.groups, "alice_adjusted");
    } else {
      // grid layout stays stable: the adjusted report mirrors the original
      auto mirrored = alice_eval.report;
      mirrored.dataset = "alice_adjusted";
      reports["alice_adjusted"][kind] = mirrored;
      write_file_atomic(config.out_dir / "reports" /
                            ("group_alice_adjusted_" + kind_name + ".json"),
                        mirrored.to_json().dump(2) + "\n");
    }

    const auto curve = attack::threshold_sweep(sweep_source.scores, sweep_source.labels,
                                               config.group.sweep_step);
    write_file_atomic(config.out_dir / "reports" / ("sweep_" + kind_name + ".csv"),
                      attack::sweep_csv(curve));
  }

  std::string summary =
      "group attack accuracy (x100), groups of " + std::to_string(config.group.size) + "\n" +
      render_summary_table(order, reports,
                           {"bob_train", "bob_valid", "bob_test", "alice", "alice_adjusted"},
                           {"bob:train", "bob:valid", "bob:test", "alice", "adjusted"});
  char delta_line[96];
  std::snprintf(delta_line, sizeof(delta_line), "mean-BLEU adjustment delta: %s%.6f\n",
                adjusted_enabled ? "" : "(disabled) ", delta);
  summary += delta_line;
  write_file_atomic(config.out_dir / "reports/group_summary.txt", summary);
  std::cout << summary;

  json extra = {{"delta_bleu", delta},
                {"delta_source", config.group.measure_delta
                                     ? "measured"
                                     : (config.group.delta_bleu ? "configured" : "none")},
                {"training_groups", train_groups.size()},
                {"dropped_records",
                 {{"bob_valid", valid_parts.dropped},
                  {"bob_test", test_parts.dropped},
                  {"alice", alice_parts.dropped}}}};
  record_stage(config, "group-attack", digest, outputs, sets.oracle_calls, timer, extra);
}

// ---- report -------------------------------------------------------------------------------

void cmd_report(const config::RunConfig& config) {
  for (const auto* name : {"reports/sentence_summary.txt", "reports/group_summary.txt",
                           "reports/sentence_per_subcorpus.txt", "reports/sentence_oov.txt"}) {
    const fs::path path = config.out_dir / name;
    if (fs::exists(path)) std::cout << read_file(path) << "\n";
  }
  if (!fs::exists(config.out_dir / "reports"))
    throw ConfigError("no reports under " + config.out_dir.string() +
                      "; run attack or group-attack first");
}

}  // namespace mtaudit::pipeline
