#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "mtaudit/base.hpp"

namespace mtaudit::corpus {

struct DomainLabel {
  std::string name;
  Tier tier = Tier::shared;
};

struct SentencePair {
  TokenSeq source;
  TokenSeq reference;
  std::string domain;
  Tier tier = Tier::shared;
  int index = 0;  // 1-based, dense within domain

  PairKey key() const { return {domain, index}; }
};

struct CorpusStats {
  std::map<std::string, std::int64_t> pairs_per_domain;
  std::int64_t duplicates_removed = 0;
};

struct LoadedCorpus {
  std::vector<SentencePair> pairs;
  CorpusStats stats;
};

// Paired one-sentence-per-line files; tokens separated by spaces. Lines are
// paired positionally and indexed 1..N in file order.
LoadedCorpus load_parallel_corpus(const std::filesystem::path& source_path,
                                  const std::filesystem::path& reference_path,
                                  const DomainLabel& domain);

struct DedupResult {
  std::vector<SentencePair> pairs;
  std::int64_t removed = 0;
};

// Keeps the first occurrence of each exact (source, reference) pair, then
// reindexes densely per domain, preserving order.
DedupResult deduplicate(std::vector<SentencePair> pairs);

// Uniform permutation fully determined by the seed (see kRngVersion);
// reindexes densely per domain in the new order.
std::vector<SentencePair> shuffle_seeded(std::vector<SentencePair> pairs, std::uint64_t seed);

enum class Side { source, reference };

struct Vocabulary {
  Side side = Side::source;
  std::unordered_set<std::string> types;

  bool contains(const std::string& token) const { return types.count(token) > 0; }
};

Vocabulary build_vocab(std::span<const SentencePair> pairs, Side side);

struct OovFlags {
  bool in_source = false;
  bool in_reference = false;
  bool in_both = false;
};

OovFlags oov_flags(const SentencePair& pair, const Vocabulary& source_vocab,
                   const Vocabulary& reference_vocab);

// Canonical interchange TSV: (domain, index, source, reference).
void write_canonical_tsv(const std::filesystem::path& path,
                         std::span<const SentencePair> pairs);
std::vector<SentencePair> read_canonical_tsv(const std::filesystem::path& path,
                                             const std::map<std::string, Tier>& tiers);

}  // namespace mtaudit::corpus
