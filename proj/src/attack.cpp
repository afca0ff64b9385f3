#include "mtaudit/attack.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mtaudit/metrics.hpp"

namespace mtaudit::attack {

using classifiers::ClassifierKind;
using classifiers::ClassifierSpec;
using classifiers::Dataset;
using classifiers::TrainedModel;
using features::FeatureOptions;
using features::LabeledGroup;
using features::ProbeRecord;
using nlohmann::json;

namespace {

json slice_to_json(const std::map<std::string, SliceAccuracy>& slices) {
  json out = json::object();
  for (const auto& [name, slice] : slices)
    out[name] = {{"accuracy", slice.accuracy}, {"n", slice.n}};
  return out;
}

std::map<std::string, SliceAccuracy> slice_from_json(const json& j) {
  std::map<std::string, SliceAccuracy> out;
  for (const auto& [name, slice] : j.items())
    out[name] = {slice.at("accuracy").get<double>(), slice.at("n").get<std::int64_t>()};
  return out;
}

struct SliceTally {
  std::int64_t correct = 0;
  std::int64_t n = 0;
};

}  // namespace

json AttackReport::to_json() const {
  return {{"format", "mtaudit-attack-report-v1"},
          {"dataset", dataset},
          {"classifier", classifier},
          {"probe_size", probe_size},
          {"accuracy", accuracy},
          {"confusion",
           json::array({json::array({confusion.true_in_pred_in, confusion.true_in_pred_out}),
                        json::array(
                            {confusion.true_out_pred_in, confusion.true_out_pred_out})})},
          {"slices",
           {{"subcorpus", slice_to_json(subcorpus_slices)},
            {"oov", slice_to_json(oov_slices)}}}};
}

AttackReport AttackReport::from_json(const json& j) {
  if (j.value("format", "") != "mtaudit-attack-report-v1")
    throw FormatError("not an attack report (format tag mismatch)");
  AttackReport report;
  report.dataset = j.at("dataset").get<std::string>();
  report.classifier = j.at("classifier").get<std::string>();
  report.probe_size = j.at("probe_size").get<std::int64_t>();
  report.accuracy = j.at("accuracy").get<double>();
  const auto& c = j.at("confusion");
  report.confusion = {c.at(0).at(0).get<std::int64_t>(), c.at(0).at(1).get<std::int64_t>(),
                      c.at(1).at(0).get<std::int64_t>(), c.at(1).at(1).get<std::int64_t>()};
  report.subcorpus_slices = slice_from_json(j.at("slices").at("subcorpus"));
  report.oov_slices = slice_from_json(j.at("slices").at("oov"));
  return report;
}

AttackReport evaluate(const TrainedModel& model, std::span<const ProbeRecord> records,
                      const FeatureOptions& options, const features::ExternalScores* external,
                      std::string dataset_name) {
  // Feature extraction and prediction never touch labels.
  std::vector<Membership> predicted;
  predicted.reserve(records.size());
  {
    features::PredictionScope scope;
    for (const auto& record : records) {
      const auto fv = features::sentence_features(record, options, external);
      predicted.push_back(model.predict(fv.values()).label);
    }
  }

  AttackReport report;
  report.dataset = std::move(dataset_name);
  report.classifier = std::string(classifiers::to_string(model.spec.kind));
  report.probe_size = static_cast<std::int64_t>(records.size());

  std::map<std::string, SliceTally> subcorpus;
  std::map<std::string, SliceTally> oov;
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Membership gold = records[i].membership_label();
    const bool ok = predicted[i] == gold;
    if (ok) ++correct;
    if (gold == Membership::in) {
      (predicted[i] == Membership::in ? report.confusion.true_in_pred_in
                                      : report.confusion.true_in_pred_out)++;
    } else {
      (predicted[i] == Membership::in ? report.confusion.true_out_pred_in
                                      : report.confusion.true_out_pred_out)++;
    }
    auto& sub = subcorpus[records[i].subcorpus];
    ++sub.n;
    if (ok) ++sub.correct;
    const auto& flags = records[i].oov;
    if (flags.in_source) {
      auto& t = oov["oov_in_source"];
      ++t.n;
      if (ok) ++t.correct;
    }
    if (flags.in_reference) {
      auto& t = oov["oov_in_reference"];
      ++t.n;
      if (ok) ++t.correct;
    }
    if (flags.in_both) {
      auto& t = oov["oov_in_both"];
      ++t.n;
      if (ok) ++t.correct;
    }
  }
  report.accuracy = records.empty()
                        ? 0.0
                        : static_cast<double>(correct) / static_cast<double>(records.size());
  for (const auto& [name, tally] : subcorpus)
    report.subcorpus_slices[name] = {
        static_cast<double>(tally.correct) / static_cast<double>(tally.n), tally.n};
  for (const auto& [name, tally] : oov)
    report.oov_slices[name] = {
        static_cast<double>(tally.correct) / static_cast<double>(tally.n), tally.n};
  return report;
}

GroupEvalResult evaluate_groups(const TrainedModel& model,
                                std::span<const LabeledGroup> groups,
                                std::string dataset_name) {
  GroupEvalResult out;
  out.scores.reserve(groups.size());
  {
    features::PredictionScope scope;
    for (const auto& group : groups)
      out.scores.push_back(model.predict(group.features.values()).score);
  }
  out.labels.reserve(groups.size());
  for (const auto& group : groups) out.labels.push_back(group.label);

  out.report.dataset = std::move(dataset_name);
  out.report.classifier = std::string(classifiers::to_string(model.spec.kind));
  out.report.probe_size = static_cast<std::int64_t>(groups.size());
  const double threshold = model.spec.kind == ClassifierKind::perceptron ||
                                   model.spec.kind == ClassifierKind::gaussian_nb
                               ? 0.0
                               : 0.5;
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const Membership pred =
        out.scores[i] > threshold ? Membership::in : Membership::out;
    const Membership gold = out.labels[i];
    if (pred == gold) ++correct;
    if (gold == Membership::in) {
      (pred == Membership::in ? out.report.confusion.true_in_pred_in
                              : out.report.confusion.true_in_pred_out)++;
    } else {
      (pred == Membership::in ? out.report.confusion.true_out_pred_in
                              : out.report.confusion.true_out_pred_out)++;
    }
  }
  out.report.accuracy = groups.empty() ? 0.0
                                       : static_cast<double>(correct) /
                                             static_cast<double>(groups.size());
  return out;
}

SweepCurve threshold_sweep(std::span<const double> scores, std::span<const Membership> labels,
                           int step_percent) {
  if (scores.size() != labels.size())
    throw InvalidArgument("threshold_sweep: scores/labels size mismatch");
  if (step_percent < 1 || step_percent > 100)
    throw InvalidArgument("threshold_sweep: step must be in 1..100");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<int> grid;
  for (int percent = 0; percent < 100; percent += step_percent) grid.push_back(percent);
  grid.push_back(100);

  SweepCurve curve;
  for (const int percent : grid) {
    const std::size_t take =
        static_cast<std::size_t>(static_cast<double>(n) * percent / 100.0);
    std::int64_t correct = 0;
    for (std::size_t rank = 0; rank < n; ++rank) {
      const Membership pred = rank < take ? Membership::in : Membership::out;
      if (pred == labels[order[rank]]) ++correct;
    }
    curve.push_back(
        {percent, n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n)});
  }
  return curve;
}

std::string sweep_csv(const SweepCurve& curve) {
  std::string out = "percent_in,accuracy\n";
  char buf[64];
  for (const auto& point : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f\n", point.percent_in, point.accuracy);
    out += buf;
  }
  return out;
}

Dataset make_dataset(std::span<const ProbeRecord> records, const FeatureOptions& options,
                     const features::ExternalScores* external) {
  Dataset data;
  data.schema = features::feature_schema(options);
  data.rows.reserve(records.size());
  data.labels.reserve(records.size());
  for (const auto& record : records) {
    data.rows.push_back(features::sentence_features(record, options, external).values());
    data.labels.push_back(record.membership_label());
  }
  return data;
}

Dataset make_group_dataset(std::span<const LabeledGroup> groups) {
  Dataset data;
  data.schema = features::GroupFeatureVector::schema();
  data.rows.reserve(groups.size());
  data.labels.reserve(groups.size());
  for (const auto& group : groups) {
    data.rows.push_back(group.features.values());
    data.labels.push_back(group.label);
  }
  return data;
}

std::map<ClassifierKind, TrainedModel> build_attack_classifiers(
    std::span<const ProbeRecord> train_records,
    std::span<const ProbeRecord> validation_records,
    std::span<const ClassifierSpec> specs, const FeatureOptions& options,
    const features::ExternalScores* external) {
  const Dataset train = make_dataset(train_records, options, external);
  Dataset validation;
  if (!validation_records.empty())
    validation = make_dataset(validation_records, options, external);

  std::map<ClassifierKind, TrainedModel> models;
  for (const auto& spec : specs) {
    models[spec.kind] =
        classifiers::train(spec, train, validation.rows.empty() ? nullptr : &validation);
  }
  return models;
}

std::map<ClassifierKind, TrainedModel> train_group_classifiers(
    std::span<const LabeledGroup> train_groups,
    std::span<const LabeledGroup> validation_groups,
    std::span<const ClassifierSpec> specs) {
  const Dataset train = make_group_dataset(train_groups);
  Dataset validation;
  if (!validation_groups.empty()) validation = make_group_dataset(validation_groups);

  std::map<ClassifierKind, TrainedModel> models;
  for (const auto& spec : specs) {
    models[spec.kind] =
        classifiers::train(spec, train, validation.rows.empty() ? nullptr : &validation);
  }
  return models;
}

std::vector<ProbeRecord> make_probe_records(std::span<const corpus::SentencePair> pairs,
                                            Membership label, translator::Oracle& oracle,
                                            translator::TranslationStore* store,
                                            const corpus::Vocabulary& source_vocab,
                                            const corpus::Vocabulary& reference_vocab) {
  const std::vector<translator::Translation> translations =
      store ? store->translate_batch(oracle, pairs) : oracle.translate(pairs);
  std::vector<ProbeRecord> records;
  records.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    records.emplace_back(pairs[i], translations[i], label, pairs[i].domain,
                         corpus::oov_flags(pairs[i], source_vocab, reference_vocab));
  }
  return records;
}

double measure_bleu_gap(translator::Oracle& target,
                        std::span<translator::Oracle* const> shadows,
                        std::span<const corpus::SentencePair> heldout,
                        translator::TranslationStore* store) {
  if (heldout.empty()) throw InvalidArgument("measure_bleu_gap: empty held-out set");
  if (shadows.empty()) throw InvalidArgument("measure_bleu_gap: no shadow oracles");

  const auto corpus_bleu_of = [&](translator::Oracle& oracle) {
    const auto translations =
        store ? store->translate_batch(oracle, heldout) : oracle.translate(heldout);
    metrics::SegmentStats pooled;
    for (std::size_t i = 0; i < heldout.size(); ++i)
      pooled += metrics::segment_stats(translations[i].hypothesis, heldout[i].reference);
    return metrics::corpus_bleu(pooled);
  };

  const double target_bleu = corpus_bleu_of(target);
  double shadow_sum = 0.0;
  for (auto* shadow : shadows) shadow_sum += corpus_bleu_of(*shadow);
  return target_bleu - shadow_sum / static_cast<double>(shadows.size());
}

}  // namespace mtaudit::attack
