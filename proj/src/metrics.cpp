#include "mtaudit/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace mtaudit::metrics {

namespace {

void check_order(int order) {
  if (order < 1 || order > kMaxOrder)
    throw InvalidArgument("n-gram order must be in 1..4, got " + std::to_string(order));
}

std::string ngram_key(const TokenSeq& tokens, std::size_t start, int order) {
  std::string key = tokens[start];
  for (int j = 1; j < order; ++j) {
    key.push_back(' ');
    key += tokens[start + static_cast<std::size_t>(j)];
  }
  return key;
}

}  // namespace

NgramCounts extract_ngrams(const TokenSeq& tokens, int order) {
  check_order(order);
  NgramCounts out;
  out.order = order;
  if (tokens.size() < static_cast<std::size_t>(order)) return out;
  const std::size_t n = tokens.size() - static_cast<std::size_t>(order) + 1;
  out.counts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ++out.counts[ngram_key(tokens, i, order)];
  return out;
}

PrecisionStat modified_precision(const TokenSeq& hypothesis, const TokenSeq& reference,
                                 int order) {
  check_order(order);
  PrecisionStat stat;
  const NgramCounts hyp = extract_ngrams(hypothesis, order);
  for (const auto& [key, count] : hyp.counts) stat.total += count;
  if (stat.total == 0) return stat;
  const NgramCounts ref = extract_ngrams(reference, order);
  for (const auto& [key, count] : hyp.counts) {
    const auto it = ref.counts.find(key);
    if (it != ref.counts.end()) stat.matched += std::min(count, it->second);
  }
  stat.value = static_cast<double>(stat.matched) / static_cast<double>(stat.total);
  return stat;
}

SegmentStats& SegmentStats::operator+=(const SegmentStats& other) {
  for (int n = 0; n < kMaxOrder; ++n) {
    matched[static_cast<std::size_t>(n)] += other.matched[static_cast<std::size_t>(n)];
    total[static_cast<std::size_t>(n)] += other.total[static_cast<std::size_t>(n)];
  }
  hypothesis_length += other.hypothesis_length;
  reference_length += other.reference_length;
  return *this;
}

SegmentStats segment_stats(const TokenSeq& hypothesis, const TokenSeq& reference) {
  SegmentStats stats;
  stats.hypothesis_length = static_cast<std::int64_t>(hypothesis.size());
  stats.reference_length = static_cast<std::int64_t>(reference.size());
  for (int order = 1; order <= kMaxOrder; ++order) {
    const PrecisionStat p = modified_precision(hypothesis, reference, order);
    stats.matched[static_cast<std::size_t>(order - 1)] = p.matched;
    stats.total[static_cast<std::size_t>(order - 1)] = p.total;
  }
  return stats;
}

double sentence_bleu(const TokenSeq& hypothesis, const TokenSeq& reference) {
  if (reference.empty()) throw InvalidArgument("sentence_bleu: empty reference");
  if (hypothesis.empty()) return 0.0;
  return sentence_bleu(segment_stats(hypothesis, reference));
}

double sentence_bleu(const SegmentStats& stats) {
  if (stats.reference_length <= 0) throw InvalidArgument("sentence_bleu: empty reference");
  if (stats.hypothesis_length == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    const auto i = static_cast<std::size_t>(n);
    double p;
    if (n == 0) {
      p = stats.total[i] > 0
              ? static_cast<double>(stats.matched[i]) / static_cast<double>(stats.total[i])
              : 0.0;
      if (p == 0.0) return 0.0;  // zero unigram factor zeroes the geometric mean
    } else {
      p = static_cast<double>(stats.matched[i] + 1) / static_cast<double>(stats.total[i] + 1);
    }
    log_sum += std::log(p);
  }
  const double geo_mean = std::exp(log_sum / kMaxOrder);
  double bp = 1.0;
  if (stats.hypothesis_length < stats.reference_length) {
    bp = std::exp(1.0 - static_cast<double>(stats.reference_length) /
                            static_cast<double>(stats.hypothesis_length));
  }
  return bp * geo_mean;
}

double corpus_bleu(const SegmentStats& pooled) {
  if (pooled.reference_length <= 0)
    throw InvalidArgument("corpus_bleu: empty segment list or empty references");
  if (pooled.hypothesis_length == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    const auto i = static_cast<std::size_t>(n);
    if (pooled.matched[i] == 0 || pooled.total[i] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(pooled.matched[i]) /
                        static_cast<double>(pooled.total[i]));
  }
  const double geo_mean = std::exp(log_sum / kMaxOrder);
  double bp = 1.0;
  if (pooled.hypothesis_length < pooled.reference_length) {
    bp = std::exp(1.0 - static_cast<double>(pooled.reference_length) /
                            static_cast<double>(pooled.hypothesis_length));
  }
  return bp * geo_mean;
}

double corpus_bleu(std::span<const std::pair<TokenSeq, TokenSeq>> segments) {
  if (segments.empty()) throw InvalidArgument("corpus_bleu: empty segment list");
  SegmentStats pooled;
  for (const auto& [hyp, ref] : segments) {
    if (ref.empty()) throw InvalidArgument("corpus_bleu: empty reference segment");
    pooled += segment_stats(hyp, ref);
  }
  return corpus_bleu(pooled);
}

}  // namespace mtaudit::metrics
