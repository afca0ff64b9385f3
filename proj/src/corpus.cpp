#include "mtaudit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "mtaudit/io_util.hpp"
#include "mtaudit/rng.hpp"

namespace mtaudit::corpus {

namespace fs = std::filesystem;

namespace {

// Dense 1..I(d) indices per domain, in current list order.
void reindex_per_domain(std::vector<SentencePair>& pairs) {
  std::unordered_map<std::string, int> next;
  for (auto& p : pairs) p.index = ++next[p.domain];
}

}  // namespace

LoadedCorpus load_parallel_corpus(const fs::path& source_path, const fs::path& reference_path,
                                  const DomainLabel& domain) {
  const auto source_lines = read_lines(source_path);
  const auto reference_lines = read_lines(reference_path);
  if (source_lines.size() != reference_lines.size()) {
    throw FormatError("line count mismatch for domain '" + domain.name + "': " +
                      source_path.string() + " has " + std::to_string(source_lines.size()) +
                      " lines, " + reference_path.string() + " has " +
                      std::to_string(reference_lines.size()));
  }
  LoadedCorpus out;
  out.pairs.reserve(source_lines.size());
  for (std::size_t i = 0; i < source_lines.size(); ++i) {
    SentencePair pair;
    pair.source = split_tokens(source_lines[i]);
    pair.reference = split_tokens(reference_lines[i]);
    if (pair.source.empty() || pair.reference.empty()) {
      const char* which = pair.source.empty() ? "source" : "reference";
      throw FormatError("empty " + std::string(which) + " line " + std::to_string(i + 1) +
                        " in domain '" + domain.name + "'");
    }
    pair.domain = domain.name;
    pair.tier = domain.tier;
    pair.index = static_cast<int>(i + 1);
    out.pairs.push_back(std::move(pair));
  }
  out.stats.pairs_per_domain[domain.name] = static_cast<std::int64_t>(out.pairs.size());
  return out;
}

DedupResult deduplicate(std::vector<SentencePair> pairs) {
  DedupResult out;
  out.pairs.reserve(pairs.size());
  std::unordered_set<std::string> seen;
  seen.reserve(pairs.size());
  for (auto& p : pairs) {
    // Tokens carry no whitespace, so this flattening is injective.
    std::string key = join_tokens(p.source);
    key.push_back('\t');
    key += join_tokens(p.reference);
    if (seen.insert(std::move(key)).second) {
      out.pairs.push_back(std::move(p));
    } else {
      ++out.removed;
    }
  }
  reindex_per_domain(out.pairs);
  return out;
}

std::vector<SentencePair> shuffle_seeded(std::vector<SentencePair> pairs, std::uint64_t seed) {
  SplitMix64 rng(seed);
  shuffle_seeded_inplace(pairs, rng);
  reindex_per_domain(pairs);
  return pairs;
}

Vocabulary build_vocab(std::span<const SentencePair> pairs, Side side) {
  Vocabulary vocab;
  vocab.side = side;
  for (const auto& p : pairs) {
    const TokenSeq& tokens = side == Side::source ? p.source : p.reference;
    vocab.types.insert(tokens.begin(), tokens.end());
  }
  return vocab;
}

OovFlags oov_flags(const SentencePair& pair, const Vocabulary& source_vocab,
                   const Vocabulary& reference_vocab) {
  OovFlags flags;
  for (const auto& t : pair.source) {
    if (!source_vocab.contains(t)) {
      flags.in_source = true;
      break;
    }
  }
  for (const auto& t : pair.reference) {
    if (!reference_vocab.contains(t)) {
      flags.in_reference = true;
      break;
    }
  }
  flags.in_both = flags.in_source && flags.in_reference;
  return flags;
}

void write_canonical_tsv(const fs::path& path, std::span<const SentencePair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += p.domain;
    out.push_back('\t');
    out += std::to_string(p.index);
    out.push_back('\t');
    out += join_tokens(p.source);
    out.push_back('\t');
    out += join_tokens(p.reference);
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

std::vector<SentencePair> read_canonical_tsv(const fs::path& path,
                                             const std::map<std::string, Tier>& tiers) {
  std::vector<SentencePair> pairs;
  const auto lines = read_lines(path);
  pairs.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_fields(lines[i], '\t');
    if (fields.size() != 4)
      throw FormatError(path.string() + ":" + std::to_string(i + 1) +
                        ": expected 4 tab-separated fields, got " +
                        std::to_string(fields.size()));
    SentencePair p;
    p.domain = fields[0];
    p.index = std::stoi(fields[1]);
    p.source = split_tokens(fields[2]);
    p.reference = split_tokens(fields[3]);
    const auto it = tiers.find(p.domain);
    if (it == tiers.end())
      throw FormatError(path.string() + ":" + std::to_string(i + 1) + ": unknown domain '" +
                        p.domain + "'");
    p.tier = it->second;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace mtaudit::corpus
