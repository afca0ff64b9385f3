// Command-line surface for the membership-leakage audit pipeline:
//   split        ingest corpora, build probe/shadow splits, write manifests
//   translate    run a probe set through the translation oracle into the cache
//   features     dump sentence-level feature CSVs
//   attack       train the shadow-model classifiers and evaluate every probe set
//   group-attack group-level attack with threshold sweep
//   report       re-print stored report tables

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtaudit/pipeline.hpp"

namespace {

mtaudit::config::RunConfig load(const std::string& config_path, const std::string& out_dir,
                                const std::vector<std::string>& overrides) {
  std::vector<std::string> all = overrides;
  if (!out_dir.empty()) all.push_back("out_dir=" + out_dir);
  return mtaudit::config::load_run_config(config_path, all);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"membership-leakage auditing for black-box translation APIs"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  app.add_option("--config,-c", config_path, "run configuration (JSON)")
      ->required()
      ->envname("MTAUDIT_CONFIG");
  app.add_option("--out,-o", out_dir, "override the configured output directory");
  app.add_option("--override,-D", overrides,
                 "config override as key.path=value (repeatable)");

  auto* split = app.add_subcommand("split", "build probe and shadow splits");

  std::string translate_set = "all";
  auto* translate = app.add_subcommand("translate", "translate a probe set into the cache");
  translate->add_option("--set", translate_set, "alice|ood|shadow|heldout|all");

  std::string feature_set = "bob_test";
  bool with_labels = false;
  auto* feature_cmd = app.add_subcommand("features", "dump sentence feature CSVs");
  feature_cmd->add_option("--set", feature_set, "bob_train|bob_valid|bob_test|alice|ood");
  feature_cmd->add_flag("--with-labels", with_labels,
                        "include the gold membership label column");

  auto* attack = app.add_subcommand("attack", "sentence-level shadow-model attack");
  auto* group = app.add_subcommand("group-attack", "group-level attack with sweep");
  auto* report = app.add_subcommand("report", "re-print stored report tables");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = load(config_path, out_dir, overrides);
    if (split->parsed()) mtaudit::pipeline::cmd_split(config);
    if (translate->parsed()) mtaudit::pipeline::cmd_translate(config, translate_set);
    if (feature_cmd->parsed())
      mtaudit::pipeline::cmd_features(config, feature_set, with_labels);
    if (attack->parsed()) mtaudit::pipeline::cmd_attack(config);
    if (group->parsed()) mtaudit::pipeline::cmd_group_attack(config);
    if (report->parsed()) mtaudit::pipeline::cmd_report(config);
    return 0;
  } catch (const mtaudit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const mtaudit::SizingError& e) {
    std::cerr << "sizing error: " << e.what() << "\n";
  } catch (const mtaudit::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
  } catch (const mtaudit::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
  } catch (const mtaudit::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
