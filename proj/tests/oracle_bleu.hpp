#pragma once

// Brute-force reference implementations of the n-gram precision and BLEU
// formulas, kept deliberately independent of the library: no shared counting
// code, no hash maps, just positional loops. Slow on purpose.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "mtaudit/base.hpp"

namespace oracle {

using mtaudit::TokenSeq;

inline bool ngram_equal(const TokenSeq& a, std::size_t ai, const TokenSeq& b, std::size_t bi,
                        int order) {
  for (int j = 0; j < order; ++j) {
    if (a[ai + static_cast<std::size_t>(j)] != b[bi + static_cast<std::size_t>(j)])
      return false;
  }
  return true;
}

inline std::int64_t ngram_total(const TokenSeq& tokens, int order) {
  if (tokens.size() < static_cast<std::size_t>(order)) return 0;
  return static_cast<std::int64_t>(tokens.size()) - order + 1;
}

// Clipped matches: hypothesis occurrence #r of an n-gram counts iff the
// reference holds at least r occurrences of it.
inline std::int64_t clipped_matches(const TokenSeq& hyp, const TokenSeq& ref, int order) {
  const std::int64_t hyp_total = ngram_total(hyp, order);
  const std::int64_t ref_total = ngram_total(ref, order);
  std::int64_t matched = 0;
  for (std::int64_t i = 0; i < hyp_total; ++i) {
    std::int64_t rank = 0;  // occurrences of this n-gram in hyp up to and including i
    for (std::int64_t j = 0; j <= i; ++j) {
      if (ngram_equal(hyp, static_cast<std::size_t>(j), hyp, static_cast<std::size_t>(i),
                      order))
        ++rank;
    }
    std::int64_t in_ref = 0;
    for (std::int64_t j = 0; j < ref_total; ++j) {
      if (ngram_equal(ref, static_cast<std::size_t>(j), hyp, static_cast<std::size_t>(i),
                      order))
        ++in_ref;
    }
    if (rank <= in_ref) ++matched;
  }
  return matched;
}

inline double modified_precision(const TokenSeq& hyp, const TokenSeq& ref, int order) {
  const std::int64_t total = ngram_total(hyp, order);
  if (total == 0) return 0.0;
  return static_cast<double>(clipped_matches(hyp, ref, order)) / static_cast<double>(total);
}

inline double sentence_bleu(const TokenSeq& hyp, const TokenSeq& ref) {
  if (hyp.empty()) return 0.0;
  double product = 1.0;
  for (int n = 1; n <= 4; ++n) {
    const std::int64_t total = ngram_total(hyp, n);
    const std::int64_t matched = clipped_matches(hyp, ref, n);
    double p;
    if (n == 1) {
      p = total > 0 ? static_cast<double>(matched) / static_cast<double>(total) : 0.0;
    } else {
      p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
    }
    product *= p;
  }
  if (product == 0.0) return 0.0;
  const double geo = std::pow(product, 0.25);
  const double hyp_len = static_cast<double>(hyp.size());
  const double ref_len = static_cast<double>(ref.size());
  const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return bp * geo;
}

inline double corpus_bleu(const std::vector<std::pair<TokenSeq, TokenSeq>>& segments) {
  std::int64_t hyp_len = 0;
  std::int64_t ref_len = 0;
  double product = 1.0;
  for (int n = 1; n <= 4; ++n) {
    std::int64_t matched = 0;
    std::int64_t total = 0;
    for (const auto& [hyp, ref] : segments) {
      matched += clipped_matches(hyp, ref, n);
      total += ngram_total(hyp, n);
    }
    if (total == 0 || matched == 0) return 0.0;
    product *= static_cast<double>(matched) / static_cast<double>(total);
  }
  for (const auto& [hyp, ref] : segments) {
    hyp_len += static_cast<std::int64_t>(hyp.size());
    ref_len += static_cast<std::int64_t>(ref.size());
  }
  if (hyp_len == 0) return 0.0;
  const double geo = std::pow(product, 0.25);
  const double bp = hyp_len >= ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) /
                                             static_cast<double>(hyp_len));
  return bp * geo;
}

}  // namespace oracle
