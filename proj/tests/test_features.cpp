#include <doctest.h>

#include <cmath>

#include "mtaudit/features.hpp"
#include "mtaudit/io_util.hpp"
#include "test_util.hpp"

using mtaudit::ConfigError;
using mtaudit::InvalidArgument;
using mtaudit::Membership;
using mtaudit::SizingError;
using mtaudit::TokenSeq;
using testutil::make_pair;
using testutil::TempDir;
namespace corpus = mtaudit::corpus;
namespace features = mtaudit::features;
namespace translator = mtaudit::translator;

namespace {

features::ProbeRecord make_record(const std::string& ref, const std::string& hyp,
                                  Membership label, const std::string& domain = "d",
                                  int index = 1,
                                  std::optional<double> model_score = std::nullopt) {
  auto pair = make_pair("src tokens here", ref, domain, index);
  translator::Translation t;
  t.hypothesis = mtaudit::split_tokens(hyp);
  t.model_score = model_score;
  t.origin = "test";
  return {std::move(pair), std::move(t), label, domain, {}};
}

}  // namespace

TEST_CASE("sentence_features: identity, degenerate, partial overlap") {
  const auto identity = make_record("a b c d e", "a b c d e", Membership::in);
  auto fv = features::sentence_features(identity);
  CHECK(fv.p1 == 1.0);
  CHECK(fv.p2 == 1.0);
  CHECK(fv.p3 == 1.0);
  CHECK(fv.p4 == 1.0);
  CHECK(fv.sbleu == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fv.schema() == std::vector<std::string>{"p1", "p2", "p3", "p4", "sbleu"});

  const auto empty = make_record("a b c", "", Membership::out);
  auto zero = features::sentence_features(empty);
  CHECK(zero.p1 == 0.0);
  CHECK(zero.p4 == 0.0);
  CHECK(zero.sbleu == 0.0);

  // unigram overlap only: p1 > 0, higher orders 0, sbleu survives smoothing
  const auto partial = make_record("a b c d", "a x y z", Membership::out);
  auto part = features::sentence_features(partial);
  CHECK(part.p1 == doctest::Approx(0.25));
  CHECK(part.p2 == 0.0);
  CHECK(part.p3 == 0.0);
  CHECK(part.p4 == 0.0);
  CHECK(part.sbleu > 0.0);
}

TEST_CASE("sentence_features: model score plumbing") {
  const auto with_score = make_record("a b", "a b", Membership::in, "d", 1, -0.25);
  features::FeatureOptions opts;
  opts.include_model_score = true;
  auto fv = features::sentence_features(with_score, opts);
  REQUIRE(fv.model_score.has_value());
  CHECK(*fv.model_score == -0.25);
  CHECK(fv.schema().back() == "model_score");
  CHECK(fv.values().size() == 6);

  const auto without = make_record("a b", "a b", Membership::in);
  CHECK_THROWS_AS(features::sentence_features(without, opts), ConfigError);
}

TEST_CASE("sentence_features: external score ingestion") {
  TempDir tmp("ext");
  testutil::write_lines(tmp.path / "scores.tsv",
                        {"d\t1\tqe\t0.75", "d\t2\tqe\t0.5", "d\t1\tother\t9"});
  const auto table = features::ExternalScores::load(tmp.path / "scores.tsv");
  CHECK(table.size() == 3);

  features::FeatureOptions opts;
  opts.external_names = {"qe"};
  const auto rec = make_record("a b", "a b", Membership::in, "d", 1);
  auto fv = features::sentence_features(rec, opts, &table);
  REQUIRE(fv.external.size() == 1);
  CHECK(fv.external[0].second == 0.75);
  CHECK(fv.schema().back() == "ext:qe");

  const auto missing = make_record("a b", "a b", Membership::in, "d", 99);
  CHECK_THROWS_AS(features::sentence_features(missing, opts, &table), ConfigError);
  CHECK_THROWS_AS(features::sentence_features(rec, opts, nullptr), ConfigError);
}

TEST_CASE("group_features: binning, normalization, top bin") {
  // identical pairs: all mass in the closed 1.0 bin, corpus BLEU 1
  std::vector<features::ProbeRecord> records;
  for (int i = 1; i <= 4; ++i)
    records.push_back(make_record("a b c d e", "a b c d e", Membership::in, "d", i));
  const auto evals = features::evaluate_sentences(records);
  const auto gv = features::group_features(evals);
  CHECK(gv.group_size == 4);
  CHECK(gv.hist[100] == doctest::Approx(1.0));
  CHECK(gv.corpus_bleu == doctest::Approx(1.0));

  double sum = 0.0;
  for (const auto h : gv.hist) sum += h;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(features::GroupFeatureVector::schema().size() == 102);
  CHECK(gv.values().size() == 102);

  CHECK_THROWS_AS(features::group_features({}), InvalidArgument);
}

TEST_CASE("group_features: single record lands in floor(sbleu/0.01)") {
  // hypothesis = 32-token prefix of a 67-token reference: precisions all 1,
  // BP = exp(1 - 67/32) = 0.3349..., so the single record fills bin 33.
  TokenSeq ref, hyp;
  for (int i = 0; i < 67; ++i) ref.push_back("t" + std::to_string(i));
  for (int i = 0; i < 32; ++i) hyp.push_back("t" + std::to_string(i));
  auto pair = make_pair("x", mtaudit::join_tokens(ref), "d", 1);
  translator::Translation t;
  t.hypothesis = hyp;
  t.origin = "test";
  features::ProbeRecord record(std::move(pair), std::move(t), Membership::out, "d", {});

  const auto eval = features::evaluate_sentence(record);
  CHECK(eval.sbleu == doctest::Approx(std::exp(1.0 - 67.0 / 32.0)).epsilon(1e-12));
  REQUIRE((eval.sbleu >= 0.33 && eval.sbleu < 0.34));

  const auto gv = features::group_features(std::vector<features::SentenceEval>{eval});
  CHECK(gv.hist[33] == doctest::Approx(1.0));
}

TEST_CASE("group_features: order invariance") {
  std::vector<features::ProbeRecord> records;
  records.push_back(make_record("a b c d e", "a b c d e", Membership::in, "d", 1));
  records.push_back(make_record("a b c d e", "a b x d e", Membership::in, "d", 2));
  records.push_back(make_record("a b c d e", "x y z", Membership::in, "d", 3));
  auto evals = features::evaluate_sentences(records);
  const auto forward = features::group_features(evals);
  std::reverse(evals.begin(), evals.end());
  const auto backward = features::group_features(evals);
  CHECK(forward.hist == backward.hist);
  CHECK(forward.corpus_bleu == backward.corpus_bleu);
}

TEST_CASE("adjust_group_features: delta shifts pre-binning") {
  std::vector<features::ProbeRecord> records;
  records.push_back(make_record("a b c d e", "a b c d e", Membership::in, "d", 1));
  records.push_back(make_record("a b c d e f g h", "a b c d", Membership::in, "d", 2));
  const auto evals = features::evaluate_sentences(records);

  const auto base = features::group_features(evals);
  const auto zero = features::adjust_group_features(evals, 0.0);
  CHECK(base.hist == zero.hist);
  CHECK(base.corpus_bleu == zero.corpus_bleu);

  const auto shifted = features::adjust_group_features(evals, 0.05);
  CHECK(shifted.hist != base.hist);
  // identical pair shifted from the closed 1.0 bin down to bin 95
  CHECK(shifted.hist[95] == doctest::Approx(0.5));
  CHECK(shifted.corpus_bleu == doctest::Approx(std::max(0.0, base.corpus_bleu - 0.05)));

  // shifting by a huge delta clamps everything into bin 0
  const auto clamped = features::adjust_group_features(evals, 2.0);
  CHECK(clamped.hist[0] == doctest::Approx(1.0));
  CHECK(clamped.corpus_bleu == 0.0);
}

TEST_CASE("sample_training_groups: balance, determinism, within-group uniqueness") {
  std::vector<features::ProbeRecord> records;
  for (int i = 1; i <= 30; ++i)
    records.push_back(make_record("a b c d e", i % 3 ? "a b c d e" : "a b x d e",
                                  i <= 15 ? Membership::in : Membership::out, "d", i));
  const auto evals = features::evaluate_sentences(records);

  const auto groups = features::sample_training_groups(records, evals, 5, 8, 99);
  REQUIRE(groups.size() == 8);
  int in_groups = 0;
  for (const auto& g : groups) {
    CHECK(g.features.group_size == 5);
    if (g.label == Membership::in) ++in_groups;
  }
  CHECK(in_groups == 4);

  const auto again = features::sample_training_groups(records, evals, 5, 8, 99);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    CHECK(groups[i].features.hist == again[i].features.hist);
    CHECK(groups[i].label == again[i].label);
  }

  // group_size == label size: sampling without replacement must use every
  // record exactly once, matching the partitioned histogram
  const auto full = features::sample_training_groups(records, evals, 15, 2, 7);
  const auto partitioned = features::partition_eval_groups(records, evals, 15);
  REQUIRE(full.size() == 2);
  REQUIRE(partitioned.groups.size() == 2);
  for (const auto& g : full) {
    bool matched = false;
    for (const auto& p : partitioned.groups)
      if (p.label == g.label && p.features.hist == g.features.hist) matched = true;
    CHECK(matched);
  }

  CHECK_THROWS_AS(features::sample_training_groups(records, evals, 16, 2, 7), SizingError);
}

TEST_CASE("partition_eval_groups: contiguity, drops, disjointness") {
  std::vector<features::ProbeRecord> records;
  for (int i = 1; i <= 7; ++i)
    records.push_back(make_record("a b c d e", "a b c d e", Membership::in, "d", i));
  const auto evals = features::evaluate_sentences(records);
  const auto parts = features::partition_eval_groups(records, evals, 5);
  CHECK(parts.groups.size() == 1);
  CHECK(parts.dropped == 2);

  // both labels, multiple groups
  std::vector<features::ProbeRecord> mixed;
  for (int i = 1; i <= 10; ++i)
    mixed.push_back(make_record("a b c d e", "a b c d e", Membership::in, "d", i));
  for (int i = 11; i <= 20; ++i)
    mixed.push_back(make_record("a b c d e", "x y z", Membership::out, "d", i));
  const auto mixed_evals = features::evaluate_sentences(mixed);
  const auto mixed_parts = features::partition_eval_groups(mixed, mixed_evals, 5);
  CHECK(mixed_parts.groups.size() == 4);
  CHECK(mixed_parts.dropped == 0);
  int in_count = 0;
  for (const auto& g : mixed_parts.groups)
    if (g.label == Membership::in) ++in_count;
  CHECK(in_count == 2);
}

TEST_CASE("label hygiene: membership labels unreadable inside prediction scope") {
  const auto record = make_record("a b", "a b", Membership::in);
  CHECK(record.membership_label() == Membership::in);
  {
    features::PredictionScope scope;
    CHECK(features::PredictionScope::active());
    CHECK_THROWS_AS(record.membership_label(), mtaudit::Error);
  }
  CHECK_FALSE(features::PredictionScope::active());
  CHECK(record.membership_label() == Membership::in);
}
