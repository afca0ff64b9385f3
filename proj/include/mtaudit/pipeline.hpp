#pragma once

#include <string>

#include "mtaudit/config.hpp"

namespace mtaudit::pipeline {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

// Stage entry points behind the CLI subcommands. Each stage acquires the run
// directory lock, writes its artifacts under out_dir, and records digests,
// oracle call counts, and timings in the run manifest. Stages whose outputs
// already match the current config are skipped, so interrupted runs resume
// where they stopped. Errors surface as typed exceptions; the CLI maps them
// to exit codes.

void cmd_split(const config::RunConfig& config);

// set_name: alice | ood | shadow | heldout | all
void cmd_translate(const config::RunConfig& config, const std::string& set_name);

// set_name: bob_train | bob_valid | bob_test | alice | ood
void cmd_features(const config::RunConfig& config, const std::string& set_name,
                  bool with_labels);

void cmd_attack(const config::RunConfig& config);

void cmd_group_attack(const config::RunConfig& config);

// Re-renders the text tables from stored report JSON.
void cmd_report(const config::RunConfig& config);

}  // namespace mtaudit::pipeline
