#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mtaudit/attack.hpp"
#include "mtaudit/io_util.hpp"
#include "mtaudit/pipeline.hpp"
#include "synth_corpus.hpp"
#include "test_util.hpp"

using mtaudit::ConfigError;
using mtaudit::Tier;
using nlohmann::json;
using testutil::TempDir;
namespace config = mtaudit::config;
namespace pipeline = mtaudit::pipeline;
namespace fs = std::filesystem;

namespace {

// Small corpus that supports k=20 with three shadow groups of k'=10.
json desk_config_json(const fs::path& dir) {
  synth::CorpusSpec spec;
  spec.domains = {{"newsA", Tier::shared, 260},
                  {"newsB", Tier::shared, 260},
                  {"housetalk", Tier::alice_private, 60},
                  {"weather", Tier::ood, 30}};
  spec.seed = 4242;
  synth::write_corpus_files(dir / "data", synth::make_corpus(spec));

  json domains = json::array();
  for (const auto& d : spec.domains) {
    domains.push_back({{"name", d.name},
                       {"tier", std::string(mtaudit::to_string(d.tier))},
                       {"source", (dir / "data" / (d.name + ".src")).string()},
                       {"reference", (dir / "data" / (d.name + ".ref")).string()}});
  }
  return {{"format", "mtaudit-config-v1"},
          {"seed", 20260808},
          {"out_dir", (dir / "run").string()},
          {"corpus", {{"domains", domains}}},
          {"splits", {{"k", 20}, {"shadow_groups", 3}, {"shadow_k", 10}}},
          {"oracles",
           {{"alice", {{"kind", "synthetic"}, {"memorization_rate", 1.0}, {"noise_rate", 0.3}}},
            {"shadow",
             {{"kind", "synthetic"}, {"memorization_rate", 1.0}, {"noise_rate", 0.3}}}}},
          {"classifiers", json::array({{{"kind", "decision_tree"}, {"seed", 9}},
                                       {{"kind", "perceptron"}, {"seed", 9}}})},
          {"group", {{"size", 10}, {"n_groups", 40}, {"sweep_step", 5}}}};
}

config::RunConfig write_and_load(const fs::path& dir, const json& document) {
  const fs::path path = dir / "config.json";
  mtaudit::write_file_atomic(path, document.dump(2) + "\n");
  return config::load_run_config(path);
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("MTAUDIT_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "MTAUDIT_CLI must point at the built binary");
  const std::string command = std::string(cli) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("run config: strict parsing") {
  TempDir tmp("config");
  auto document = desk_config_json(tmp.path);

  CHECK_NOTHROW(write_and_load(tmp.path, document));

  SUBCASE("unknown keys are rejected") {
    document["surprise"] = 1;
    CHECK_THROWS_WITH_AS(write_and_load(tmp.path, document), doctest::Contains("surprise"),
                         ConfigError);
  }
  SUBCASE("unknown nested keys are rejected") {
    document["group"]["extra"] = true;
    CHECK_THROWS_WITH_AS(write_and_load(tmp.path, document),
                         doctest::Contains("group.extra"), ConfigError);
  }
  SUBCASE("seed is required") {
    document.erase("seed");
    CHECK_THROWS_AS(write_and_load(tmp.path, document), ConfigError);
  }
  SUBCASE("duplicate domains are rejected") {
    document["corpus"]["domains"].push_back(document["corpus"]["domains"][0]);
    CHECK_THROWS_WITH_AS(write_and_load(tmp.path, document), doctest::Contains("duplicate"),
                         ConfigError);
  }
  SUBCASE("measure delta requires the spare probe") {
    document["group"]["delta_bleu"] = "measure";
    CHECK_THROWS_WITH_AS(write_and_load(tmp.path, document),
                         doctest::Contains("spare_probe"), ConfigError);
  }
  SUBCASE("overrides rewrite nested keys") {
    const fs::path path = tmp.path / "config.json";
    mtaudit::write_file_atomic(path, document.dump(2) + "\n");
    const auto loaded = config::load_run_config(path, {"group.size=25", "splits.k=11"});
    CHECK(loaded.group.size == 25);
    CHECK(loaded.splits.k == 11);
  }
  SUBCASE("default classifier roster is all five") {
    document.erase("classifiers");
    const auto loaded = write_and_load(tmp.path, document);
    CHECK(loaded.classifiers.size() == 5);
  }
}

TEST_CASE("pipeline: split stage artifacts, summary, reproducibility") {
  TempDir tmp("split");
  const auto cfg = write_and_load(tmp.path, desk_config_json(tmp.path));

  pipeline::cmd_split(cfg);
  const fs::path out = cfg.out_dir;
  CHECK(fs::exists(out / "corpus/corpus.tsv"));
  CHECK(fs::exists(out / "splits/carol.json"));
  CHECK(fs::exists(out / "splits/shadow.json"));

  const std::string summary = mtaudit::read_file(out / "splits/summary.txt");
  CHECK(summary.find("a_out") != std::string::npos);
  CHECK(summary.find("b_all") != std::string::npos);
  CHECK(summary.find("a_ood") != std::string::npos);
  CHECK(summary.find("TOTAL") != std::string::npos);
  CHECK(summary.find("n/a") != std::string::npos);  // ood row has no train columns

  const std::string carol_digest = mtaudit::file_digest(out / "splits/carol.json");
  const std::string shadow_digest = mtaudit::file_digest(out / "splits/shadow.json");

  // rerun: byte-identical manifests (stage is skipped, files untouched)
  pipeline::cmd_split(cfg);
  CHECK(mtaudit::file_digest(out / "splits/carol.json") == carol_digest);
  CHECK(mtaudit::file_digest(out / "splits/shadow.json") == shadow_digest);

  // a fresh run directory with the same seed reproduces the bytes
  TempDir tmp2("split2");
  auto document2 = desk_config_json(tmp.path);  // same corpus files
  document2["out_dir"] = (tmp2.path / "run").string();
  const auto cfg2 = write_and_load(tmp2.path, document2);
  pipeline::cmd_split(cfg2);
  CHECK(mtaudit::file_digest(cfg2.out_dir / "splits/carol.json") == carol_digest);
  CHECK(mtaudit::file_digest(cfg2.out_dir / "splits/shadow.json") == shadow_digest);
}

TEST_CASE("pipeline: translate resume makes zero second-pass calls") {
  TempDir tmp("translate");
  const auto cfg = write_and_load(tmp.path, desk_config_json(tmp.path));
  pipeline::cmd_split(cfg);

  pipeline::cmd_translate(cfg, "alice");
  auto manifest = json::parse(mtaudit::read_file(cfg.out_dir / "manifest.json"));
  // one call per probe pair: k=20 across 3 probe-bearing domains, in + out
  CHECK(manifest["stages"]["translate:alice"]["oracle_calls"]["alice"] == 120);

  pipeline::cmd_translate(cfg, "alice");
  manifest = json::parse(mtaudit::read_file(cfg.out_dir / "manifest.json"));
  CHECK(manifest["stages"]["translate:alice"]["oracle_calls"]["alice"] == 0);

  // missing split artifacts are a config error
  auto document = desk_config_json(tmp.path);
  document["out_dir"] = (tmp.path / "fresh").string();
  const auto fresh = write_and_load(tmp.path, document);
  CHECK_THROWS_AS(pipeline::cmd_translate(fresh, "alice"), ConfigError);
}

TEST_CASE("pipeline: sentence attack end to end on a memorizing target") {
  TempDir tmp("attack");
  const auto cfg = write_and_load(tmp.path, desk_config_json(tmp.path));
  pipeline::cmd_split(cfg);
  pipeline::cmd_attack(cfg);

  const fs::path out = cfg.out_dir;
  CHECK(fs::exists(out / "models/sentence_decision_tree.json"));
  const auto alice_report = mtaudit::attack::AttackReport::from_json(
      json::parse(mtaudit::read_file(out / "reports/sentence_alice_decision_tree.json")));
  CHECK(alice_report.probe_size == 120);
  CHECK(alice_report.accuracy >= 0.85);  // fully memorizing target is separable

  const auto ood_report = mtaudit::attack::AttackReport::from_json(
      json::parse(mtaudit::read_file(out / "reports/sentence_ood_decision_tree.json")));
  CHECK(ood_report.probe_size == 20);
  CHECK(ood_report.confusion.true_in_pred_in + ood_report.confusion.true_in_pred_out == 0);

  const std::string summary = mtaudit::read_file(out / "reports/sentence_summary.txt");
  CHECK(summary.find("DT") != std::string::npos);
  CHECK(summary.find("bob:test") != std::string::npos);

  auto manifest = json::parse(mtaudit::read_file(out / "manifest.json"));
  // cold run: exactly one call per probe pair, per oracle
  CHECK(manifest["stages"]["attack"]["oracle_calls"]["alice"] == 140);  // 120 probe + 20 ood
  CHECK(manifest["stages"]["attack"]["oracle_calls"]["shadow:1+"] == 40);

  // rerun: stage is up to date, nothing recomputed
  pipeline::cmd_attack(cfg);
  manifest = json::parse(mtaudit::read_file(out / "manifest.json"));
  CHECK(manifest["stages"]["attack"]["oracle_calls"]["alice"] == 140);  // unchanged entry

  // warmed cache + changed classifier seed: stage reruns with zero new calls
  auto document = desk_config_json(tmp.path);
  document["out_dir"] = cfg.out_dir.string();
  document["classifiers"][0]["seed"] = 77;
  const auto cfg2 = write_and_load(tmp.path, document);
  pipeline::cmd_attack(cfg2);
  manifest = json::parse(mtaudit::read_file(out / "manifest.json"));
  CHECK(manifest["stages"]["attack"]["oracle_calls"]["alice"] == 0);
}

TEST_CASE("pipeline: group attack artifacts and sweep shape") {
  TempDir tmp("group");
  const auto cfg = write_and_load(tmp.path, desk_config_json(tmp.path));
  pipeline::cmd_split(cfg);
  pipeline::cmd_group_attack(cfg);

  const fs::path out = cfg.out_dir;
  CHECK(fs::exists(out / "models/group_decision_tree.json"));
  CHECK(fs::exists(out / "reports/group_summary.txt"));

  const auto alice_groups = mtaudit::attack::AttackReport::from_json(
      json::parse(mtaudit::read_file(out / "reports/group_alice_decision_tree.json")));
  CHECK(alice_groups.probe_size == 12);  // 120 probe records / groups of 10
  CHECK(alice_groups.accuracy >= 0.9);

  const std::string sweep = mtaudit::read_file(out / "reports/sweep_decision_tree.csv");
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 22);  // header + 21 grid rows
  CHECK(sweep.rfind("percent_in,accuracy", 0) == 0);

  const std::string summary = mtaudit::read_file(out / "reports/group_summary.txt");
  CHECK(summary.find("adjusted") != std::string::npos);
}

TEST_CASE("pipeline: http target oracle end to end") {
  httplib::Server server;
  server.Post("/translate", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    res.set_content(
        json{{"hypothesis", body.at("source").get<std::string>()}, {"score", -1.5}}.dump(),
        "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  TempDir tmp("httppipe");
  auto document = desk_config_json(tmp.path);
  document["oracles"]["alice"] = {
      {"kind", "http_api"},
      {"endpoint", "http://127.0.0.1:" + std::to_string(port) + "/translate"},
      {"max_retries", 1}};
  const auto cfg = write_and_load(tmp.path, document);
  pipeline::cmd_split(cfg);
  pipeline::cmd_translate(cfg, "alice");

  auto manifest = json::parse(mtaudit::read_file(cfg.out_dir / "manifest.json"));
  CHECK(manifest["stages"]["translate:alice"]["oracle_calls"]["alice"] == 120);

  // the echo endpoint returns the source, so the cache rows carry it verbatim
  mtaudit::translator::TranslationStore store(cfg.out_dir / "cache/translations.tsv");
  CHECK(store.size() == 120);

  pipeline::cmd_translate(cfg, "alice");  // warm rerun, no requests
  manifest = json::parse(mtaudit::read_file(cfg.out_dir / "manifest.json"));
  CHECK(manifest["stages"]["translate:alice"]["oracle_calls"]["alice"] == 0);

  server.stop();
  server_thread.join();
}

TEST_CASE("pipeline: feature dumps with labels, model scores, external columns") {
  TempDir tmp("featdump");
  auto document = desk_config_json(tmp.path);
  const auto cfg = write_and_load(tmp.path, document);
  pipeline::cmd_split(cfg);

  pipeline::cmd_features(cfg, "bob_test", true);
  const auto labeled = mtaudit::read_file(cfg.out_dir / "features/bob_test.csv");
  CHECK(labeled.rfind("domain,index,p1,p2,p3,p4,sbleu,label", 0) == 0);
  CHECK(labeled.find(",in\n") != std::string::npos);
  // header + one row per record: 2 test splits x (10+10 per domain x 2 domains)
  CHECK(std::count(labeled.begin(), labeled.end(), '\n') == 81);

  pipeline::cmd_features(cfg, "alice", false);
  const auto unlabeled = mtaudit::read_file(cfg.out_dir / "features/alice.csv");
  CHECK(unlabeled.rfind("domain,index,p1,p2,p3,p4,sbleu\n", 0) == 0);
  CHECK(unlabeled.find(",in\n") == std::string::npos);
  CHECK(unlabeled.find(",out\n") == std::string::npos);

  // model score column comes from the synthetic oracle
  document["features"] = {{"include_model_score", true}};
  const auto with_score = write_and_load(tmp.path, document);
  pipeline::cmd_features(with_score, "alice", false);
  CHECK(mtaudit::read_file(cfg.out_dir / "features/alice.csv")
            .rfind("domain,index,p1,p2,p3,p4,sbleu,model_score", 0) == 0);

  // external score column, supplied for every pair in the corpus
  std::string scores;
  const auto corpus_pairs = mtaudit::corpus::read_canonical_tsv(
      cfg.out_dir / "corpus/corpus.tsv", {{"newsA", Tier::shared},
                                          {"newsB", Tier::shared},
                                          {"housetalk", Tier::alice_private},
                                          {"weather", Tier::ood}});
  for (const auto& p : corpus_pairs)
    scores += p.domain + "\t" + std::to_string(p.index) + "\tqe\t0.5\n";
  mtaudit::write_file_atomic(tmp.path / "scores.tsv", scores);
  document["features"] = {
      {"include_model_score", false},
      {"external_scores",
       {{"path", (tmp.path / "scores.tsv").string()}, {"names", json::array({"qe"})}}}};
  const auto with_external = write_and_load(tmp.path, document);
  pipeline::cmd_features(with_external, "bob_valid", true);
  CHECK(mtaudit::read_file(cfg.out_dir / "features/bob_valid.csv")
            .rfind("domain,index,p1,p2,p3,p4,sbleu,ext:qe,label", 0) == 0);
}

TEST_CASE("pipeline: run lock blocks concurrent owners") {
  TempDir tmp("lock");
  const auto cfg = write_and_load(tmp.path, desk_config_json(tmp.path));
  fs::create_directories(cfg.out_dir);

  // pid 1 is always alive
  mtaudit::write_file_atomic(cfg.out_dir / "run.lock", "1\n");
  CHECK_THROWS_WITH_AS(pipeline::cmd_split(cfg), doctest::Contains("locked"), ConfigError);

  // a stale lock from a dead process is replaced
  mtaudit::write_file_atomic(cfg.out_dir / "run.lock", "999999999\n");
  CHECK_NOTHROW(pipeline::cmd_split(cfg));
  CHECK_FALSE(fs::exists(cfg.out_dir / "run.lock"));
}

TEST_CASE("cli: exit statuses") {
  TempDir tmp("cli");
  const auto document = desk_config_json(tmp.path);
  const fs::path config_path = tmp.path / "config.json";
  mtaudit::write_file_atomic(config_path, document.dump(2) + "\n");

  CHECK(run_cli("--config " + config_path.string() + " split") == 0);
  CHECK(run_cli("--config " + config_path.string() + " report") == 2);  // nothing yet
  CHECK(run_cli("--config " + config_path.string() + " attack") == 0);
  CHECK(run_cli("--config " + config_path.string() + " report") == 0);  // tables stored now

  // undersized domain: k larger than the smallest private domain allows
  CHECK(run_cli("--config " + config_path.string() + " -D splits.k=40 split") == 2);

  // unknown config key
  auto broken = document;
  broken["mystery"] = true;
  const fs::path broken_path = tmp.path / "broken.json";
  mtaudit::write_file_atomic(broken_path, broken.dump(2) + "\n");
  CHECK(run_cli("--config " + broken_path.string() + " split") == 2);

  // missing config file
  CHECK(run_cli("--config " + (tmp.path / "nope.json").string() + " split") == 2);
}
