#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mtaudit/corpus.hpp"

namespace mtaudit::splitter {

struct CarolParams {
  int k = 5000;
  bool hold_spare_probe = false;
  std::uint64_t seed = 0;
};

// The five-way partition plus (optionally) a reserved spare probe block.
// All sets are sorted by (domain, index); that order is the manifest order
// every downstream stage iterates in.
struct CorpusSplits {
  std::vector<corpus::SentencePair> a_out;
  std::vector<corpus::SentencePair> a_in;
  std::vector<corpus::SentencePair> a_ood;
  std::vector<corpus::SentencePair> a_train;
  std::vector<corpus::SentencePair> b_all;
  std::vector<corpus::SentencePair> spare;
  std::vector<corpus::DomainLabel> domains;
  CarolParams params;
};

// Per shared/private domain (over a per-domain seeded shuffle): first k pairs
// form the out-probe, the next k the in-probe, and with hold_spare_probe the
// next k are reserved. The training set is everything but the out-probe; the
// attacker set drops the in-probe, the spare block, and private-tier domains
// entirely. OOD domains contribute only their first k pairs, as an
// evaluation-only probe.
CorpusSplits make_carol_splits(std::span<const corpus::SentencePair> pairs,
                               const CarolParams& params);

enum class Polarity { plus, minus };

enum class ShadowRole { attack_train, attack_validation, attack_test };

std::string_view to_string(ShadowRole role);

struct ShadowSplit {
  int group = 0;  // 1-based
  Polarity polarity = Polarity::plus;
  ShadowRole role = ShadowRole::attack_train;
  std::vector<corpus::SentencePair> b_in;
  std::vector<corpus::SentencePair> b_out;
  std::vector<PairKey> b_train;  // sorted

  std::string id() const {
    return std::to_string(group) + (polarity == Polarity::plus ? "+" : "-");
  }
};

struct ShadowParams {
  int groups = 5;
  int k_prime = 5000;
  std::uint64_t seed = 0;
};

// Selects 2*groups disjoint blocks of k_prime pairs per domain; group g takes
// blocks 2g-1 and 2g as in/out probe, the minus polarity swaps them, and the
// shadow training set is everything outside the blocks plus the in-probe.
// With g groups, groups 1..g-2 train the attack classifier, g-1 validates,
// g tests (5 groups reproduce the 1-3 / 4 / 5 assignment).
std::vector<ShadowSplit> make_shadow_splits(std::span<const corpus::SentencePair> b_all,
                                            const ShadowParams& params);

struct Violation {
  std::string check;
  std::string detail;
};

std::vector<Violation> verify_splits(const CorpusSplits& splits);
std::vector<Violation> verify_shadow_splits(std::span<const ShadowSplit> splits,
                                            const CorpusSplits& carol);

// Manifest JSON: seed, k, and per-set (domain, index) listings; together with
// the canonical corpus TSV it reconstructs every set exactly.
nlohmann::json carol_manifest(const CorpusSplits& splits);
CorpusSplits splits_from_manifest(const nlohmann::json& manifest,
                                  std::span<const corpus::SentencePair> corpus);

nlohmann::json shadow_manifest(std::span<const ShadowSplit> splits,
                               const ShadowParams& params);
std::vector<ShadowSplit> shadow_from_manifest(const nlohmann::json& manifest,
                                              std::span<const corpus::SentencePair> b_all);

}  // namespace mtaudit::splitter
