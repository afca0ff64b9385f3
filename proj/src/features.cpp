#include "mtaudit/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "mtaudit/io_util.hpp"
#include "mtaudit/rng.hpp"

namespace mtaudit::features {

namespace {

thread_local int prediction_depth = 0;

}  // namespace

PredictionScope::PredictionScope() { ++prediction_depth; }
PredictionScope::~PredictionScope() { --prediction_depth; }
bool PredictionScope::active() { return prediction_depth > 0; }

Membership ProbeRecord::membership_label() const {
  if (PredictionScope::active())
    throw Error("membership label read inside a prediction scope");
  return label_;
}

ExternalScores ExternalScores::load(const std::filesystem::path& path) {
  ExternalScores out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_fields(lines[i], '\t');
    if (fields.size() != 4)
      throw FormatError(path.string() + ":" + std::to_string(i + 1) +
                        ": expected 4 tab-separated fields (domain, index, name, value)");
    out.values_[{fields[2], {fields[0], std::stoi(fields[1])}}] =
        std::strtod(fields[3].c_str(), nullptr);
  }
  return out;
}

std::optional<double> ExternalScores::get(const PairKey& key, const std::string& name) const {
  const auto it = values_.find({name, key});
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> FeatureVector::schema() const {
  std::vector<std::string> out = {"p1", "p2", "p3", "p4", "sbleu"};
  if (model_score) out.push_back("model_score");
  for (const auto& [name, value] : external) out.push_back("ext:" + name);
  return out;
}

std::vector<double> FeatureVector::values() const {
  std::vector<double> out = {p1, p2, p3, p4, sbleu};
  if (model_score) out.push_back(*model_score);
  for (const auto& [name, value] : external) out.push_back(value);
  return out;
}

std::vector<std::string> feature_schema(const FeatureOptions& options) {
  std::vector<std::string> out = {"p1", "p2", "p3", "p4", "sbleu"};
  if (options.include_model_score) out.push_back("model_score");
  std::vector<std::string> ext = options.external_names;
  std::sort(ext.begin(), ext.end());
  for (const auto& name : ext) out.push_back("ext:" + name);
  return out;
}

FeatureVector sentence_features(const ProbeRecord& record, const FeatureOptions& options,
                                const ExternalScores* external) {
  FeatureVector fv;
  const auto stats = metrics::segment_stats(record.translation.hypothesis,
                                            record.pair.reference);
  const auto precision = [&stats](int order) {
    const auto i = static_cast<std::size_t>(order - 1);
    return stats.total[i] > 0 ? static_cast<double>(stats.matched[i]) /
                                    static_cast<double>(stats.total[i])
                              : 0.0;
  };
  fv.p1 = precision(1);
  fv.p2 = precision(2);
  fv.p3 = precision(3);
  fv.p4 = precision(4);
  fv.sbleu = metrics::sentence_bleu(stats);

  if (options.include_model_score) {
    if (!record.translation.model_score)
      throw ConfigError("model_score requested but oracle '" + record.translation.origin +
                        "' did not provide one for (" + record.pair.domain + ", " +
                        std::to_string(record.pair.index) + ")");
    fv.model_score = record.translation.model_score;
  }

  if (!options.external_names.empty()) {
    if (!external)
      throw ConfigError("external feature(s) requested but no score table was supplied");
    std::vector<std::string> names = options.external_names;
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
      const auto value = external->get(record.pair.key(), name);
      if (!value)
        throw ConfigError("external score '" + name + "' missing for (" +
                          record.pair.domain + ", " + std::to_string(record.pair.index) + ")");
      fv.external.emplace_back(name, *value);
    }
  }
  return fv;
}

SentenceEval evaluate_sentence(const ProbeRecord& record) {
  SentenceEval eval;
  eval.stats = metrics::segment_stats(record.translation.hypothesis, record.pair.reference);
  eval.sbleu = metrics::sentence_bleu(eval.stats);
  return eval;
}

std::vector<SentenceEval> evaluate_sentences(std::span<const ProbeRecord> records) {
  std::vector<SentenceEval> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(evaluate_sentence(r));
  return out;
}

std::vector<std::string> GroupFeatureVector::schema() {
  std::vector<std::string> out;
  out.reserve(kBleuBins + 1);
  for (int b = 0; b < kBleuBins; ++b) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "bin%03d", b);
    out.emplace_back(buf);
  }
  out.emplace_back("corpus_bleu");
  return out;
}

std::vector<double> GroupFeatureVector::values() const {
  std::vector<double> out(hist.begin(), hist.end());
  out.push_back(corpus_bleu);
  return out;
}

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

int bleu_bin(double sbleu) {
  if (sbleu >= 1.0) return kBleuBins - 1;  // closed top bin
  const int bin = static_cast<int>(sbleu / 0.01);
  return std::min(bin, kBleuBins - 2);
}

}  // namespace

GroupFeatureVector group_features(std::span<const SentenceEval> evals, double delta_bleu) {
  if (evals.empty()) throw InvalidArgument("group_features: empty group");
  GroupFeatureVector out;
  out.group_size = static_cast<int>(evals.size());
  metrics::SegmentStats pooled;
  for (const auto& eval : evals) {
    out.hist[static_cast<std::size_t>(bleu_bin(clamp01(eval.sbleu - delta_bleu)))] += 1.0;
    pooled += eval.stats;
  }
  for (auto& h : out.hist) h /= static_cast<double>(evals.size());
  out.corpus_bleu = clamp01(metrics::corpus_bleu(pooled) - delta_bleu);
  return out;
}

GroupFeatureVector adjust_group_features(std::span<const SentenceEval> evals,
                                         double delta_bleu) {
  return group_features(evals, delta_bleu);
}

std::vector<LabeledGroup> sample_training_groups(std::span<const ProbeRecord> records,
                                                 std::span<const SentenceEval> evals,
                                                 int group_size, int n_groups,
                                                 std::uint64_t seed, double delta_bleu) {
  if (records.size() != evals.size())
    throw InvalidArgument("sample_training_groups: records/evals size mismatch");
  if (group_size < 1 || n_groups < 1)
    throw InvalidArgument("sample_training_groups: group_size and n_groups must be >= 1");

  std::map<Membership, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < records.size(); ++i)
    by_label[records[i].membership_label()].push_back(i);

  for (const auto& [label, indices] : by_label) {
    if (indices.size() < static_cast<std::size_t>(group_size))
      throw SizingError("label '" + std::string(to_string(label)) + "' has " +
                        std::to_string(indices.size()) + " records, needs at least " +
                        std::to_string(group_size) + " per group");
  }

  const int labels = static_cast<int>(by_label.size());
  std::vector<LabeledGroup> out;
  out.reserve(static_cast<std::size_t>(n_groups));
  int remainder = n_groups % labels;
  for (const auto& [label, indices] : by_label) {
    int groups_here = n_groups / labels + (remainder > 0 ? 1 : 0);
    if (remainder > 0) --remainder;
    SplitMix64 rng(derive_seed(seed, "groups:" + std::string(to_string(label))));
    for (int g = 0; g < groups_here; ++g) {
      const auto draw =
          sample_indices(indices.size(), static_cast<std::size_t>(group_size), rng);
      std::vector<SentenceEval> group;
      group.reserve(draw.size());
      for (const auto d : draw) group.push_back(evals[indices[d]]);
      out.push_back({group_features(group, delta_bleu), label});
    }
  }
  return out;
}

PartitionedGroups partition_eval_groups(std::span<const ProbeRecord> records,
                                        std::span<const SentenceEval> evals, int group_size,
                                        double delta_bleu) {
  if (records.size() != evals.size())
    throw InvalidArgument("partition_eval_groups: records/evals size mismatch");
  if (group_size < 1) throw InvalidArgument("partition_eval_groups: group_size must be >= 1");

  std::map<Membership, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < records.size(); ++i)
    by_label[records[i].membership_label()].push_back(i);

  PartitionedGroups out;
  for (const auto& [label, indices] : by_label) {
    const std::size_t usable =
        indices.size() / static_cast<std::size_t>(group_size) *
        static_cast<std::size_t>(group_size);
    out.dropped += static_cast<std::int64_t>(indices.size() - usable);
    for (std::size_t base = 0; base < usable; base += static_cast<std::size_t>(group_size)) {
      std::vector<SentenceEval> group;
      group.reserve(static_cast<std::size_t>(group_size));
      for (std::size_t j = 0; j < static_cast<std::size_t>(group_size); ++j)
        group.push_back(evals[indices[base + j]]);
      out.groups.push_back({group_features(group, delta_bleu), label});
    }
  }
  return out;
}

}  // namespace mtaudit::features
