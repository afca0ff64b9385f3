#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>

#include "mtaudit/base.hpp"

namespace mtaudit::metrics {

inline constexpr int kMaxOrder = 4;

// Multiset of contiguous n-grams; keys are the n tokens joined by a single
// space (injective because tokens contain no whitespace).
struct NgramCounts {
  int order = 1;
  std::unordered_map<std::string, int> counts;
};

NgramCounts extract_ngrams(const TokenSeq& tokens, int order);

struct PrecisionStat {
  std::int64_t matched = 0;  // clipped matches
  std::int64_t total = 0;    // hypothesis n-grams of this order
  double value = 0.0;        // matched / total, 0 when total == 0
};

// Clipped-count ("modified") n-gram precision: each hypothesis n-gram matches
// at most as many times as it occurs in the reference.
PrecisionStat modified_precision(const TokenSeq& hypothesis, const TokenSeq& reference,
                                 int order);

// Per-segment match/total counts for orders 1..4 plus lengths. Summing these
// across segments gives exactly the pooled counts corpus BLEU is defined on.
struct SegmentStats {
  std::array<std::int64_t, kMaxOrder> matched{};
  std::array<std::int64_t, kMaxOrder> total{};
  std::int64_t hypothesis_length = 0;
  std::int64_t reference_length = 0;

  SegmentStats& operator+=(const SegmentStats& other);
};

SegmentStats segment_stats(const TokenSeq& hypothesis, const TokenSeq& reference);

// Smoothed sentence BLEU: geometric mean of 1-4 gram precisions times
// BP = min(1, exp(1 - |ref|/|hyp|)). Orders >= 2 are add-one smoothed in both
// numerator and denominator; order 1 is left raw, so zero unigram overlap
// zeroes the score. Empty hypothesis scores 0; empty reference is an error.
double sentence_bleu(const TokenSeq& hypothesis, const TokenSeq& reference);
double sentence_bleu(const SegmentStats& stats);

// Corpus BLEU over pooled counts, unsmoothed; 0 if any pooled precision is 0.
double corpus_bleu(const SegmentStats& pooled);
double corpus_bleu(std::span<const std::pair<TokenSeq, TokenSeq>> segments);

}  // namespace mtaudit::metrics
