#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtaudit/corpus.hpp"
#include "mtaudit/metrics.hpp"
#include "mtaudit/translator.hpp"

namespace mtaudit::features {

// While a PredictionScope is active on a thread, membership labels are
// unreadable: classifiers can only ever see features. Evaluation joins labels
// with predictions after the scope closes.
class PredictionScope {
 public:
  PredictionScope();
  ~PredictionScope();
  PredictionScope(const PredictionScope&) = delete;
  PredictionScope& operator=(const PredictionScope&) = delete;
  static bool active();
};

// A probe pair joined with its hypothesis translation and gold label.
class ProbeRecord {
 public:
  ProbeRecord(corpus::SentencePair pair, translator::Translation translation,
              Membership label, std::string subcorpus, corpus::OovFlags oov)
      : pair(std::move(pair)),
        translation(std::move(translation)),
        subcorpus(std::move(subcorpus)),
        oov(oov),
        label_(label) {}

  corpus::SentencePair pair;
  translator::Translation translation;
  std::string subcorpus;
  corpus::OovFlags oov;

  Membership membership_label() const;

 private:
  Membership label_;
};

// External per-pair scores, TSV rows (domain, index, score_name, value).
class ExternalScores {
 public:
  ExternalScores() = default;
  static ExternalScores load(const std::filesystem::path& path);

  std::optional<double> get(const PairKey& key, const std::string& name) const;
  std::size_t size() const { return values_.size(); }

 private:
  std::map<std::pair<std::string, PairKey>, double> values_;
};

struct FeatureOptions {
  bool include_model_score = false;
  std::vector<std::string> external_names;  // looked up in an ExternalScores table
};

struct FeatureVector {
  double p1 = 0.0, p2 = 0.0, p3 = 0.0, p4 = 0.0;  // modified n-gram precisions
  double sbleu = 0.0;                              // smoothed sentence BLEU
  std::optional<double> model_score;
  std::vector<std::pair<std::string, double>> external;  // sorted by name

  std::vector<std::string> schema() const;
  std::vector<double> values() const;
};

std::vector<std::string> feature_schema(const FeatureOptions& options);

FeatureVector sentence_features(const ProbeRecord& record, const FeatureOptions& options = {},
                                const ExternalScores* external = nullptr);

// Cached per-record sentence evaluation; group features are assembled from
// these without re-scoring.
struct SentenceEval {
  double sbleu = 0.0;
  metrics::SegmentStats stats;
};

SentenceEval evaluate_sentence(const ProbeRecord& record);
std::vector<SentenceEval> evaluate_sentences(std::span<const ProbeRecord> records);

inline constexpr int kBleuBins = 101;  // 0.00..0.99 in 0.01 steps plus a closed 1.00 bin

struct GroupFeatureVector {
  std::array<double, kBleuBins> hist{};  // fractions, sum 1
  double corpus_bleu = 0.0;
  int group_size = 0;

  static std::vector<std::string> schema();
  std::vector<double> values() const;
};

// delta_bleu shifts each sentence BLEU by -delta (clamped to [0,1]) before
// binning and the pooled corpus BLEU by -delta; the shift happens at
// construction time because a finished histogram cannot be shifted.
GroupFeatureVector group_features(std::span<const SentenceEval> evals,
                                  double delta_bleu = 0.0);
GroupFeatureVector adjust_group_features(std::span<const SentenceEval> evals,
                                         double delta_bleu);

struct LabeledGroup {
  GroupFeatureVector features;
  Membership label = Membership::out;
};

// Label-homogeneous groups sampled without replacement within each group,
// independently across groups; n_groups is split evenly across the labels
// present. Requires every label to hold at least group_size records.
std::vector<LabeledGroup> sample_training_groups(std::span<const ProbeRecord> records,
                                                 std::span<const SentenceEval> evals,
                                                 int group_size, int n_groups,
                                                 std::uint64_t seed, double delta_bleu = 0.0);

struct PartitionedGroups {
  std::vector<LabeledGroup> groups;
  std::int64_t dropped = 0;  // trailing records not filling a whole group
};

// Contiguous non-overlapping label-homogeneous groups in record order.
PartitionedGroups partition_eval_groups(std::span<const ProbeRecord> records,
                                        std::span<const SentenceEval> evals, int group_size,
                                        double delta_bleu = 0.0);

}  // namespace mtaudit::features
