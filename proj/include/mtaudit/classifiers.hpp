#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mtaudit/base.hpp"

namespace mtaudit::classifiers {

enum class ClassifierKind { perceptron, decision_tree, gaussian_nb, knn, mlp };

std::string_view to_string(ClassifierKind kind);
std::string_view short_label(ClassifierKind kind);  // P, DT, NB, NN, MLP
ClassifierKind kind_from_string(std::string_view s);

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::decision_tree;
  std::uint64_t seed = 0;

  // decision tree
  int tree_max_depth = 5;
  int tree_min_split = 2;

  // k nearest neighbors
  int knn_k = 5;
  double knn_minkowski_p = 2.0;

  // multi-layer perceptron
  int mlp_hidden = 100;
  double mlp_l2 = 1e-4;
  double mlp_learning_rate = 1e-3;
  int mlp_batch = 32;
  int mlp_epochs = 200;
  int mlp_patience = 10;
  double mlp_validation_fraction = 0.1;

  // averaged perceptron
  double perceptron_learning_rate = 1.0;
  int perceptron_epochs = 100;

  // gaussian naive bayes
  double nb_var_smoothing = 1e-9;
};

struct Dataset {
  std::vector<std::string> schema;
  std::vector<std::vector<double>> rows;
  std::vector<Membership> labels;

  std::size_t size() const { return rows.size(); }
};

struct Prediction {
  Membership label = Membership::out;
  double score = 0.0;  // larger = more in-like; ties resolve to out
};

struct PerceptronParams {
  std::vector<double> weights;  // averaged
  double bias = 0.0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double in_fraction = 0.0;
  std::int64_t samples = 0;
};

struct TreeParams {
  std::vector<TreeNode> nodes;  // node 0 is the root
};

struct GaussianNbParams {
  double log_prior_in = 0.0;
  double log_prior_out = 0.0;
  std::vector<double> mean_in, var_in;
  std::vector<double> mean_out, var_out;
};

struct KnnParams {
  std::vector<std::vector<double>> points;
  std::vector<Membership> labels;
};

struct MlpParams {
  int hidden = 0;
  std::vector<double> w1;  // hidden x inputs, row-major
  std::vector<double> b1;
  std::vector<double> w2;  // 1 x hidden
  double b2 = 0.0;
};

using Params =
    std::variant<PerceptronParams, TreeParams, GaussianNbParams, KnnParams, MlpParams>;

struct TrainingMeta {
  double train_accuracy = 0.0;
  std::int64_t rows = 0;
  std::uint64_t seed = 0;
  int epochs_run = 0;  // iterative trainers only
};

class TrainedModel {
 public:
  ClassifierSpec spec;
  std::vector<std::string> schema;
  TrainingMeta meta;
  Params params;

  Prediction predict(std::span<const double> row) const;

  // Verifies the caller's column layout matches the model's before predicting.
  Prediction predict_checked(std::span<const double> row,
                             std::span<const std::string> schema) const;
};

// Deterministic given spec.seed. Rejects single-class data and non-finite
// features (naming the offending row). An optional validation set drives early
// stopping for trainers that use one; otherwise a held-out shard is carved
// from the training data.
TrainedModel train(const ClassifierSpec& spec, const Dataset& data,
                   const Dataset* validation = nullptr);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace mtaudit::classifiers
