#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mtaudit/classifiers.hpp"
#include "mtaudit/features.hpp"
#include "mtaudit/translator.hpp"

namespace mtaudit::attack {

struct Confusion {
  std::int64_t true_in_pred_in = 0;    // TP
  std::int64_t true_in_pred_out = 0;   // FN
  std::int64_t true_out_pred_in = 0;   // FP
  std::int64_t true_out_pred_out = 0;  // TN

  std::int64_t total() const {
    return true_in_pred_in + true_in_pred_out + true_out_pred_in + true_out_pred_out;
  }
};

struct SliceAccuracy {
  double accuracy = 0.0;
  std::int64_t n = 0;
};

struct AttackReport {
  std::string dataset;     // bob_train | bob_valid | bob_test | alice | ood | ...
  std::string classifier;  // kind name
  std::int64_t probe_size = 0;
  double accuracy = 0.0;
  Confusion confusion;
  std::map<std::string, SliceAccuracy> subcorpus_slices;  // partition of the probe
  std::map<std::string, SliceAccuracy> oov_slices;        // overlapping subsets

  nlohmann::json to_json() const;
  static AttackReport from_json(const nlohmann::json& j);
};

// Labels the records with translations already joined; predictions happen
// inside a PredictionScope, labels are joined afterwards.
AttackReport evaluate(const classifiers::TrainedModel& model,
                      std::span<const features::ProbeRecord> records,
                      const features::FeatureOptions& options,
                      const features::ExternalScores* external, std::string dataset_name);

struct GroupEvalResult {
  AttackReport report;
  std::vector<double> scores;      // per group, classifier output
  std::vector<Membership> labels;  // per group, gold
};

GroupEvalResult evaluate_groups(const classifiers::TrainedModel& model,
                                std::span<const features::LabeledGroup> groups,
                                std::string dataset_name);

struct SweepPoint {
  int percent_in = 0;  // top-N% of scores labeled in
  double accuracy = 0.0;
};

using SweepCurve = std::vector<SweepPoint>;

// Ranks scores descending (ties by position) and labels the top N% as in for
// N over 0..100 in step_percent increments.
SweepCurve threshold_sweep(std::span<const double> scores,
                           std::span<const Membership> labels, int step_percent = 5);

std::string sweep_csv(const SweepCurve& curve);

// Feature rows + gold labels for classifier training (training side only).
classifiers::Dataset make_dataset(std::span<const features::ProbeRecord> records,
                                  const features::FeatureOptions& options,
                                  const features::ExternalScores* external);

classifiers::Dataset make_group_dataset(std::span<const features::LabeledGroup> groups);

// Trains every requested classifier on the attack-train shadow rows; the
// validation rows drive early stopping where a trainer uses one.
std::map<classifiers::ClassifierKind, classifiers::TrainedModel> build_attack_classifiers(
    std::span<const features::ProbeRecord> train_records,
    std::span<const features::ProbeRecord> validation_records,
    std::span<const classifiers::ClassifierSpec> specs,
    const features::FeatureOptions& options, const features::ExternalScores* external);

std::map<classifiers::ClassifierKind, classifiers::TrainedModel> train_group_classifiers(
    std::span<const features::LabeledGroup> train_groups,
    std::span<const features::LabeledGroup> validation_groups,
    std::span<const classifiers::ClassifierSpec> specs);

// Joins pairs with their oracle translations (cache-backed when a store is
// given) and slice tags; one oracle call per pair on a cold cache.
std::vector<features::ProbeRecord> make_probe_records(
    std::span<const corpus::SentencePair> pairs, Membership label,
    translator::Oracle& oracle, translator::TranslationStore* store,
    const corpus::Vocabulary& source_vocab, const corpus::Vocabulary& reference_vocab);

// Corpus BLEU of the target oracle minus the mean corpus BLEU of the shadow
// oracles, on a held-out set disjoint from every probe.
double measure_bleu_gap(translator::Oracle& target,
                        std::span<translator::Oracle* const> shadows,
                        std::span<const corpus::SentencePair> heldout,
                        translator::TranslationStore* store);

}  // namespace mtaudit::attack
