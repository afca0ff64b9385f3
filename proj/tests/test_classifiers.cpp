#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mtaudit/classifiers.hpp"
#include "mtaudit/io_util.hpp"
#include "mtaudit/rng.hpp"
#include "test_util.hpp"

using mtaudit::FormatError;
using mtaudit::InvalidArgument;
using mtaudit::Membership;
using mtaudit::SchemaError;
using mtaudit::SplitMix64;
using testutil::TempDir;
namespace classifiers = mtaudit::classifiers;
using classifiers::ClassifierKind;
using classifiers::ClassifierSpec;
using classifiers::Dataset;

namespace {

ClassifierSpec spec_of(ClassifierKind kind, std::uint64_t seed = 1) {
  ClassifierSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  return spec;
}

Dataset two_cluster_data(int per_class, double separation, std::uint64_t seed) {
  Dataset data;
  data.schema = {"x", "y"};
  SplitMix64 rng(seed);
  for (int i = 0; i < per_class; ++i) {
    data.rows.push_back({rng.next_double(), rng.next_double()});
    data.labels.push_back(Membership::out);
    data.rows.push_back({rng.next_double() + separation, rng.next_double() + separation});
    data.labels.push_back(Membership::in);
  }
  return data;
}

double gauss(SplitMix64& rng) {
  // Box-Muller
  const double u1 = std::max(rng.next_double(), 1e-12);
  const double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

TEST_CASE("perceptron: converges on linearly separable data") {
  const auto data = two_cluster_data(50, 3.0, 2);
  const auto model = classifiers::train(spec_of(ClassifierKind::perceptron), data);
  CHECK(model.meta.train_accuracy == 1.0);
}

TEST_CASE("perceptron: zero model ties to out") {
  classifiers::TrainedModel model;
  model.spec = spec_of(ClassifierKind::perceptron);
  model.schema = {"x", "y"};
  model.params = classifiers::PerceptronParams{{0.0, 0.0}, 0.0};
  const auto pred = model.predict(std::vector<double>{0.7, 0.3});
  CHECK(pred.score == 0.0);
  CHECK(pred.label == Membership::out);
}

TEST_CASE("decision tree: one-threshold data needs a single split") {
  Dataset data;
  data.schema = {"a", "b"};
  for (int i = 0; i < 20; ++i) {
    data.rows.push_back({i < 10 ? 0.1 + 0.01 * i : 0.8 + 0.01 * i, 0.5});
    data.labels.push_back(i < 10 ? Membership::out : Membership::in);
  }
  const auto model = classifiers::train(spec_of(ClassifierKind::decision_tree), data);
  CHECK(model.meta.train_accuracy == 1.0);
  const auto& tree = std::get<classifiers::TreeParams>(model.params);
  CHECK(tree.nodes.size() == 3);  // root + two pure leaves
  CHECK(tree.nodes[0].feature == 0);
}

TEST_CASE("decision tree: depth cap and strict impurity reduction") {
  // noisy data forces many splits; the cap and the improvement rule must hold
  Dataset data;
  data.schema = {"a", "b", "c"};
  SplitMix64 rng(5);
  for (int i = 0; i < 400; ++i) {
    data.rows.push_back({rng.next_double(), rng.next_double(), rng.next_double()});
    data.labels.push_back(rng.next_below(2) ? Membership::in : Membership::out);
  }
  const auto model = classifiers::train(spec_of(ClassifierKind::decision_tree), data);
  const auto& tree = std::get<classifiers::TreeParams>(model.params);

  const auto gini_of = [](const classifiers::TreeNode& n) {
    return 2.0 * n.in_fraction * (1.0 - n.in_fraction);
  };
  // walk with explicit depths
  std::vector<std::pair<int, int>> stack = {{0, 0}};
  while (!stack.empty()) {
    const auto [idx, depth] = stack.back();
    stack.pop_back();
    const auto& node = tree.nodes[static_cast<std::size_t>(idx)];
    CHECK(depth <= 5);
    if (node.feature >= 0) {
      CHECK(depth < 5);
      const auto& left = tree.nodes[static_cast<std::size_t>(node.left)];
      const auto& right = tree.nodes[static_cast<std::size_t>(node.right)];
      const double child_gini =
          (static_cast<double>(left.samples) * gini_of(left) +
           static_cast<double>(right.samples) * gini_of(right)) /
          static_cast<double>(node.samples);
      CHECK(child_gini < gini_of(node));
      stack.push_back({node.left, depth + 1});
      stack.push_back({node.right, depth + 1});
    }
  }
}

TEST_CASE("decision tree: manual leaf fraction scoring") {
  classifiers::TrainedModel model;
  model.spec = spec_of(ClassifierKind::decision_tree);
  model.schema = {"x"};
  classifiers::TreeParams params;
  params.nodes.push_back({-1, 0.0, -1, -1, 0.8, 5});  // leaf holding 4 in / 1 out
  model.params = params;
  const auto pred = model.predict(std::vector<double>{0.0});
  CHECK(pred.score == 0.8);
  CHECK(pred.label == Membership::in);
}

TEST_CASE("gaussian nb: two far-apart gaussians are almost perfectly separable") {
  Dataset train;
  train.schema = {"x"};
  SplitMix64 rng(7);
  for (int i = 0; i < 400; ++i) {
    train.rows.push_back({gauss(rng)});
    train.labels.push_back(Membership::out);
    train.rows.push_back({gauss(rng) + 10.0});
    train.labels.push_back(Membership::in);
  }
  const auto model = classifiers::train(spec_of(ClassifierKind::gaussian_nb), train);

  int correct = 0;
  const int heldout = 1000;
  for (int i = 0; i < heldout; ++i) {
    const bool is_in = i % 2 == 0;
    const double x = gauss(rng) + (is_in ? 10.0 : 0.0);
    const auto pred = model.predict(std::vector<double>{x});
    if ((pred.label == Membership::in) == is_in) ++correct;
  }
  CHECK(static_cast<double>(correct) / heldout > 0.99);
}

TEST_CASE("gaussian nb: constant feature survives variance smoothing") {
  Dataset data;
  data.schema = {"flat", "useful"};
  for (int i = 0; i < 40; ++i) {
    data.rows.push_back({1.0, i < 20 ? 0.0 : 1.0});
    data.labels.push_back(i < 20 ? Membership::out : Membership::in);
  }
  const auto model = classifiers::train(spec_of(ClassifierKind::gaussian_nb), data);
  const auto pred = model.predict(std::vector<double>{1.0, 1.0});
  CHECK(std::isfinite(pred.score));
  CHECK(pred.label == Membership::in);
  CHECK(model.meta.train_accuracy == 1.0);
}

TEST_CASE("knn: neighbor fraction scoring and tie handling") {
  Dataset data;
  data.schema = {"x"};
  data.rows = {{0.0}, {0.1}, {0.2}, {0.3}, {0.4}};
  data.labels = {Membership::in, Membership::in, Membership::in, Membership::out,
                 Membership::out};
  const auto model = classifiers::train(spec_of(ClassifierKind::knn), data);
  const auto pred = model.predict(std::vector<double>{0.2});
  CHECK(pred.score == doctest::Approx(0.6));  // 3 of 5 neighbors are in
  CHECK(pred.label == Membership::in);

  // Duplicating the training set turns the 5-NN into two copies each of the
  // two nearest plus the third; labels are preserved wherever the original
  // neighborhood is unanimous (deep inside a cluster).
  Dataset wide;
  wide.schema = {"x"};
  for (int i = 0; i < 10; ++i) {
    wide.rows.push_back({static_cast<double>(i) * 0.01});
    wide.labels.push_back(Membership::in);
    wide.rows.push_back({1.0 + static_cast<double>(i) * 0.01});
    wide.labels.push_back(Membership::out);
  }
  Dataset doubled = wide;
  doubled.rows.insert(doubled.rows.end(), wide.rows.begin(), wide.rows.end());
  doubled.labels.insert(doubled.labels.end(), wide.labels.begin(), wide.labels.end());
  const auto base_model = classifiers::train(spec_of(ClassifierKind::knn), wide);
  const auto doubled_model = classifiers::train(spec_of(ClassifierKind::knn), doubled);
  for (const double q : {0.03, 0.07, 1.02, 1.08}) {
    const auto a = base_model.predict(std::vector<double>{q});
    const auto b = doubled_model.predict(std::vector<double>{q});
    CHECK((a.score == 0.0 || a.score == 1.0));  // unanimous neighborhood
    CHECK(a.label == b.label);
  }
}

TEST_CASE("mlp: learns a separable problem deterministically") {
  const auto data = two_cluster_data(120, 2.0, 11);
  auto spec = spec_of(ClassifierKind::mlp, 3);
  spec.mlp_hidden = 16;
  spec.mlp_epochs = 60;
  const auto model = classifiers::train(spec, data);
  CHECK(model.meta.train_accuracy > 0.97);
  CHECK(model.meta.epochs_run >= 1);

  const auto again = classifiers::train(spec, data);
  CHECK(std::get<classifiers::MlpParams>(model.params).w1 ==
        std::get<classifiers::MlpParams>(again.params).w1);
  CHECK(std::get<classifiers::MlpParams>(model.params).b2 ==
        std::get<classifiers::MlpParams>(again.params).b2);
}

TEST_CASE("training rejects single-class and non-finite data") {
  Dataset single;
  single.schema = {"x"};
  single.rows = {{0.0}, {1.0}};
  single.labels = {Membership::in, Membership::in};
  CHECK_THROWS_AS(classifiers::train(spec_of(ClassifierKind::decision_tree), single),
                  InvalidArgument);

  Dataset nan_data;
  nan_data.schema = {"x"};
  nan_data.rows = {{0.0}, {std::nan("")}};
  nan_data.labels = {Membership::in, Membership::out};
  CHECK_THROWS_WITH_AS(classifiers::train(spec_of(ClassifierKind::gaussian_nb), nan_data),
                       doctest::Contains("row 1"), InvalidArgument);
}

TEST_CASE("determinism: same spec, seed, and data give identical parameters") {
  const auto data = two_cluster_data(60, 0.5, 13);
  for (const auto kind : {ClassifierKind::perceptron, ClassifierKind::decision_tree,
                          ClassifierKind::gaussian_nb}) {
    const auto a = classifiers::train(spec_of(kind, 17), data);
    const auto b = classifiers::train(spec_of(kind, 17), data);
    SplitMix64 rng(19);
    for (int i = 0; i < 50; ++i) {
      const std::vector<double> q = {rng.next_double() * 2, rng.next_double() * 2};
      CHECK(a.predict(q).score == b.predict(q).score);
    }
  }
}

TEST_CASE("model persistence: round trip is prediction-identical") {
  TempDir tmp("models");
  const auto data = two_cluster_data(60, 1.0, 23);
  SplitMix64 rng(29);
  std::vector<std::vector<double>> queries;
  for (int i = 0; i < 100; ++i)
    queries.push_back({rng.next_double() * 3 - 0.5, rng.next_double() * 3 - 0.5});

  for (const auto kind :
       {ClassifierKind::perceptron, ClassifierKind::decision_tree,
        ClassifierKind::gaussian_nb, ClassifierKind::knn, ClassifierKind::mlp}) {
    auto spec = spec_of(kind, 31);
    spec.mlp_hidden = 8;
    spec.mlp_epochs = 10;
    const auto model = classifiers::train(spec, data);
    const auto path = tmp.path / (std::string(classifiers::to_string(kind)) + ".json");
    classifiers::save_model(model, path);
    const auto loaded = classifiers::load_model(path);
    CHECK(loaded.schema == model.schema);
    CHECK(loaded.meta.train_accuracy == model.meta.train_accuracy);
    for (const auto& q : queries) {
      const auto a = model.predict(q);
      const auto b = loaded.predict(q);
      CHECK(a.score == b.score);
      CHECK(a.label == b.label);
    }
  }
}

TEST_CASE("model persistence: corrupted and mismatched files are rejected") {
  TempDir tmp("badmodels");
  const auto path = tmp.path / "model.json";

  testutil::write_lines(path, {"{ not json"});
  CHECK_THROWS_AS(classifiers::load_model(path), FormatError);

  testutil::write_lines(path, {R"({"format": "mtaudit-model-v999", "spec": {}})"});
  CHECK_THROWS_WITH_AS(classifiers::load_model(path), doctest::Contains("version"),
                       FormatError);

  // structurally valid JSON with missing params must not yield a partial model
  testutil::write_lines(path, {R"({"format": "mtaudit-model-v1", "schema": []})"});
  CHECK_THROWS_AS(classifiers::load_model(path), FormatError);
}

TEST_CASE("schema mismatches are named") {
  const auto data = two_cluster_data(30, 2.0, 37);
  const auto model = classifiers::train(spec_of(ClassifierKind::decision_tree), data);
  const std::vector<std::string> wrong = {"x", "z"};
  CHECK_THROWS_WITH_AS(
      model.predict_checked(std::vector<double>{0.0, 0.0}, wrong),
      doctest::Contains("missing: [y]"), SchemaError);
  CHECK_THROWS_AS(model.predict(std::vector<double>{0.0}), SchemaError);

  const std::vector<std::string> right = {"x", "y"};
  CHECK_NOTHROW(model.predict_checked(std::vector<double>{0.0, 0.0}, right));
}
