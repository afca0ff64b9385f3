#include "mtaudit/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mtaudit/io_util.hpp"
#include "mtaudit/rng.hpp"

namespace mtaudit::classifiers {

using nlohmann::json;

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::perceptron: return "perceptron";
    case ClassifierKind::decision_tree: return "decision_tree";
    case ClassifierKind::gaussian_nb: return "gaussian_nb";
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::mlp: return "mlp";
  }
  return "decision_tree";
}

std::string_view short_label(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::perceptron: return "P";
    case ClassifierKind::decision_tree: return "DT";
    case ClassifierKind::gaussian_nb: return "NB";
    case ClassifierKind::knn: return "NN";
    case ClassifierKind::mlp: return "MLP";
  }
  return "DT";
}

ClassifierKind kind_from_string(std::string_view s) {
  if (s == "perceptron") return ClassifierKind::perceptron;
  if (s == "decision_tree") return ClassifierKind::decision_tree;
  if (s == "gaussian_nb") return ClassifierKind::gaussian_nb;
  if (s == "knn") return ClassifierKind::knn;
  if (s == "mlp") return ClassifierKind::mlp;
  throw FormatError("unknown classifier kind: " + std::string(s));
}

namespace {

constexpr const char* kModelFormat = "mtaudit-model-v1";

void validate_data(const Dataset& data) {
  if (data.rows.size() != data.labels.size())
    throw InvalidArgument("training data rows and labels differ in length");
  if (data.rows.empty()) throw InvalidArgument("training data is empty");
  bool has_in = false, has_out = false;
  for (const auto label : data.labels) {
    (label == Membership::in ? has_in : has_out) = true;
  }
  if (!has_in || !has_out)
    throw InvalidArgument("training data must contain both labels, found only '" +
                          std::string(to_string(has_in ? Membership::in : Membership::out)) +
                          "'");
  const std::size_t width = data.schema.size();
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    if (data.rows[i].size() != width)
      throw InvalidArgument("row " + std::to_string(i) + " has " +
                            std::to_string(data.rows[i].size()) + " features, schema has " +
                            std::to_string(width));
    for (const double v : data.rows[i]) {
      if (!std::isfinite(v))
        throw InvalidArgument("non-finite feature value in row " + std::to_string(i));
    }
  }
}

double label_sign(Membership m) { return m == Membership::in ? 1.0 : -1.0; }

double compute_accuracy(const TrainedModel& model, const Dataset& data) {
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    if (model.predict(data.rows[i]).label == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.rows.size());
}

// ---- perceptron ----------------------------------------------------------------

// Classic perceptron keeping the final weights. On inseparable data the
// endpoint of the mistake-driven walk often leaves the whole feature cloud on
// one side, yielding a constant predictor; averaging would smooth that mode
// away, and the degenerate outcome is part of the contract here.
PerceptronParams train_perceptron(const ClassifierSpec& spec, const Dataset& data, int* epochs) {
  const std::size_t d = data.schema.size();
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  SplitMix64 rng(spec.seed);
  std::vector<std::size_t> order(data.rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < spec.perceptron_epochs; ++epoch) {
    shuffle_seeded_inplace(order, rng);
    for (const std::size_t i : order) {
      const auto& x = data.rows[i];
      const double y = label_sign(data.labels[i]);
      double activation = b;
      for (std::size_t f = 0; f < d; ++f) activation += w[f] * x[f];
      if (y * activation <= 0.0) {
        for (std::size_t f = 0; f < d; ++f) w[f] += spec.perceptron_learning_rate * y * x[f];
        b += spec.perceptron_learning_rate * y;
      }
    }
  }
  *epochs = spec.perceptron_epochs;
  PerceptronParams params;
  params.weights = std::move(w);
  params.bias = b;
  return params;
}

// ---- decision tree ------------------------------------------------------------

double gini(std::int64_t n_in, std::int64_t n) {
  if (n == 0) return 0.0;
  const double p = static_cast<double>(n_in) / static_cast<double>(n);
  return 2.0 * p * (1.0 - p);
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double weighted_gini = std::numeric_limits<double>::infinity();
};

TreeParams train_tree(const ClassifierSpec& spec, const Dataset& data) {
  TreeParams params;
  const std::size_t d = data.schema.size();

  struct Work {
    std::vector<std::size_t> samples;
    int depth;
    int node;
  };

  std::vector<std::size_t> all(data.rows.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  params.nodes.push_back({});
  std::vector<Work> stack;
  stack.push_back({std::move(all), 0, 0});

  while (!stack.empty()) {
    Work work = std::move(stack.back());
    stack.pop_back();

    std::int64_t n_in = 0;
    for (const auto i : work.samples)
      if (data.labels[i] == Membership::in) ++n_in;
    const std::int64_t n = static_cast<std::int64_t>(work.samples.size());
    const double node_gini = gini(n_in, n);

    TreeNode& node = params.nodes[static_cast<std::size_t>(work.node)];
    node.samples = n;
    node.in_fraction = static_cast<double>(n_in) / static_cast<double>(n);

    const bool can_split = work.depth < spec.tree_max_depth &&
                           n >= spec.tree_min_split && n_in != 0 && n_in != n;
    if (!can_split) continue;

    // Exhaustive midpoint search; first strictly-better (feature, threshold)
    // in ascending order wins ties.
    SplitChoice best;
    std::vector<std::size_t> sorted = work.samples;
    for (std::size_t f = 0; f < d; ++f) {
      std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return data.rows[a][f] < data.rows[b][f];
      });
      std::int64_t left_in = 0;
      for (std::int64_t i = 0; i + 1 < n; ++i) {
        const std::size_t idx = sorted[static_cast<std::size_t>(i)];
        if (data.labels[idx] == Membership::in) ++left_in;
        const double here = data.rows[idx][f];
        const double next = data.rows[sorted[static_cast<std::size_t>(i + 1)]][f];
        if (here == next) continue;
        const std::int64_t left_n = i + 1;
        const double weighted =
            (static_cast<double>(left_n) * gini(left_in, left_n) +
             static_cast<double>(n - left_n) * gini(n_in - left_in, n - left_n)) /
            static_cast<double>(n);
        if (weighted < best.weighted_gini - 1e-12) {
          best = {static_cast<int>(f), (here + next) / 2.0, weighted};
        }
      }
    }

    // A split must strictly reduce the weighted impurity.
    if (best.feature < 0 || best.weighted_gini >= node_gini - 1e-12) continue;

    std::vector<std::size_t> left, right;
    for (const auto i : work.samples) {
      (data.rows[i][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right)
          .push_back(i);
    }
    if (left.empty() || right.empty()) continue;

    const int left_node = static_cast<int>(params.nodes.size());
    const int right_node = left_node + 1;
    params.nodes.push_back({});
    params.nodes.push_back({});  // may reallocate; re-fetch the node below
    TreeNode& parent = params.nodes[static_cast<std::size_t>(work.node)];
    parent.feature = best.feature;
    parent.threshold = best.threshold;
    parent.left = left_node;
    parent.right = right_node;
    stack.push_back({std::move(right), work.depth + 1, right_node});
    stack.push_back({std::move(left), work.depth + 1, left_node});
  }
  return params;
}

// ---- gaussian naive bayes ------------------------------------------------------

GaussianNbParams train_gaussian_nb(const ClassifierSpec& spec, const Dataset& data) {
  const std::size_t d = data.schema.size();
  const std::size_t n = data.rows.size();

  GaussianNbParams params;
  params.mean_in.assign(d, 0.0);
  params.mean_out.assign(d, 0.0);
  params.var_in.assign(d, 0.0);
  params.var_out.assign(d, 0.0);

  std::int64_t n_in = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_in = data.labels[i] == Membership::in;
    if (is_in) ++n_in;
    auto& mean = is_in ? params.mean_in : params.mean_out;
    for (std::size_t f = 0; f < d; ++f) mean[f] += data.rows[i][f];
  }
  const std::int64_t n_out = static_cast<std::int64_t>(n) - n_in;
  for (std::size_t f = 0; f < d; ++f) {
    params.mean_in[f] /= static_cast<double>(n_in);
    params.mean_out[f] /= static_cast<double>(n_out);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_in = data.labels[i] == Membership::in;
    const auto& mean = is_in ? params.mean_in : params.mean_out;
    auto& var = is_in ? params.var_in : params.var_out;
    for (std::size_t f = 0; f < d; ++f) {
      const double diff = data.rows[i][f] - mean[f];
      var[f] += diff * diff;
    }
  }

  // Smoothing scaled by the largest overall feature variance keeps constant
  // features from collapsing a class-conditional density.
  double max_total_var = 0.0;
  for (std::size_t f = 0; f < d; ++f) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += data.rows[i][f];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = data.rows[i][f] - mean;
      var += diff * diff;
    }
    max_total_var = std::max(max_total_var, var / static_cast<double>(n));
  }
  const double epsilon = std::max(spec.nb_var_smoothing * max_total_var, 1e-300);
  for (std::size_t f = 0; f < d; ++f) {
    params.var_in[f] = params.var_in[f] / static_cast<double>(n_in) + epsilon;
    params.var_out[f] = params.var_out[f] / static_cast<double>(n_out) + epsilon;
  }
  params.log_prior_in = std::log(static_cast<double>(n_in) / static_cast<double>(n));
  params.log_prior_out = std::log(static_cast<double>(n_out) / static_cast<double>(n));
  return params;
}

// ---- multi-layer perceptron ----------------------------------------------------

struct MlpWork {
  MlpParams p;
  // Adam moments, laid out like the parameters
  std::vector<double> m_w1, v_w1, m_b1, v_b1, m_w2, v_w2;
  double m_b2 = 0.0, v_b2 = 0.0;
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double mlp_forward(const MlpParams& p, std::span<const double> x, std::vector<double>* hidden) {
  const std::size_t d = x.size();
  const std::size_t h_count = static_cast<std::size_t>(p.hidden);
  double out = p.b2;
  for (std::size_t h = 0; h < h_count; ++h) {
    double z = p.b1[h];
    const double* row = &p.w1[h * d];
    for (std::size_t f = 0; f < d; ++f) z += row[f] * x[f];
    const double a = z > 0.0 ? z : 0.0;
    if (hidden) (*hidden)[h] = a;
    out += p.w2[h] * a;
  }
  return sigmoid(out);
}

double mlp_loss(const MlpParams& p, const Dataset& data,
                std::span<const std::size_t> indices) {
  double loss = 0.0;
  for (const auto i : indices) {
    const double y = data.labels[i] == Membership::in ? 1.0 : 0.0;
    const double out = mlp_forward(p, data.rows[i], nullptr);
    const double eps = 1e-12;
    loss += -(y * std::log(out + eps) + (1.0 - y) * std::log(1.0 - out + eps));
  }
  return loss / static_cast<double>(indices.size());
}

MlpParams train_mlp(const ClassifierSpec& spec, const Dataset& data,
                    const Dataset* validation, int* epochs_run) {
  const std::size_t d = data.schema.size();
  const std::size_t h_count = static_cast<std::size_t>(spec.mlp_hidden);
  SplitMix64 rng(spec.seed);

  MlpWork work;
  work.p.hidden = spec.mlp_hidden;
  work.p.w1.resize(h_count * d);
  work.p.b1.assign(h_count, 0.0);
  work.p.w2.resize(h_count);
  const double scale1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double scale2 = 1.0 / std::sqrt(static_cast<double>(h_count));
  for (auto& w : work.p.w1) w = (rng.next_double() * 2.0 - 1.0) * scale1;
  for (auto& w : work.p.w2) w = (rng.next_double() * 2.0 - 1.0) * scale2;
  work.m_w1.assign(work.p.w1.size(), 0.0);
  work.v_w1.assign(work.p.w1.size(), 0.0);
  work.m_b1.assign(h_count, 0.0);
  work.v_b1.assign(h_count, 0.0);
  work.m_w2.assign(h_count, 0.0);
  work.v_w2.assign(h_count, 0.0);

  // Train/validation split: an external validation set if supplied, otherwise
  // a seeded 10% shard of the training data.
  std::vector<std::size_t> train_idx(data.rows.size());
  std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
  std::vector<std::size_t> val_idx;
  const Dataset* val_data = &data;
  if (validation && !validation->rows.empty()) {
    val_data = validation;
    val_idx.resize(validation->rows.size());
    std::iota(val_idx.begin(), val_idx.end(), std::size_t{0});
  } else if (data.rows.size() >= 10 && spec.mlp_validation_fraction > 0.0) {
    shuffle_seeded_inplace(train_idx, rng);
    const std::size_t val_n = std::max<std::size_t>(
        1, static_cast<std::size_t>(static_cast<double>(data.rows.size()) *
                                    spec.mlp_validation_fraction));
    val_idx.assign(train_idx.end() - static_cast<std::ptrdiff_t>(val_n), train_idx.end());
    train_idx.resize(train_idx.size() - val_n);
  }

  const double lr = spec.mlp_learning_rate;
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  const double l2_scale = spec.mlp_l2 / static_cast<double>(train_idx.size());
  std::int64_t step = 0;

  MlpParams best = work.p;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  int epoch = 0;

  std::vector<double> hidden(h_count);
  std::vector<double> grad_w1(h_count * d), grad_b1(h_count), grad_w2(h_count);

  for (; epoch < spec.mlp_epochs; ++epoch) {
    shuffle_seeded_inplace(train_idx, rng);
    for (std::size_t base = 0; base < train_idx.size();
         base += static_cast<std::size_t>(spec.mlp_batch)) {
      const std::size_t end =
          std::min(train_idx.size(), base + static_cast<std::size_t>(spec.mlp_batch));
      const double batch_n = static_cast<double>(end - base);
      std::fill(grad_w1.begin(), grad_w1.end(), 0.0);
      std::fill(grad_b1.begin(), grad_b1.end(), 0.0);
      std::fill(grad_w2.begin(), grad_w2.end(), 0.0);
      double grad_b2 = 0.0;

      for (std::size_t k = base; k < end; ++k) {
        const std::size_t i = train_idx[k];
        const auto& x = data.rows[i];
        const double y = data.labels[i] == Membership::in ? 1.0 : 0.0;
        const double out = mlp_forward(work.p, x, &hidden);
        const double delta_out = (out - y) / batch_n;  // dBCE/dz for sigmoid output
        grad_b2 += delta_out;
        for (std::size_t h = 0; h < h_count; ++h) {
          grad_w2[h] += delta_out * hidden[h];
          if (hidden[h] > 0.0) {
            const double delta_h = delta_out * work.p.w2[h];
            grad_b1[h] += delta_h;
            double* grow = &grad_w1[h * d];
            for (std::size_t f = 0; f < d; ++f) grow[f] += delta_h * x[f];
          }
        }
      }

      ++step;
      const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      auto adam_update = [&](double& param, double& m, double& v, double grad) {
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad * grad;
        param -= lr * (m / corr1) / (std::sqrt(v / corr2) + adam_eps);
      };
      for (std::size_t j = 0; j < work.p.w1.size(); ++j)
        adam_update(work.p.w1[j], work.m_w1[j], work.v_w1[j],
                    grad_w1[j] + l2_scale * work.p.w1[j]);
      for (std::size_t h = 0; h < h_count; ++h) {
        adam_update(work.p.b1[h], work.m_b1[h], work.v_b1[h], grad_b1[h]);
        adam_update(work.p.w2[h], work.m_w2[h], work.v_w2[h],
                    grad_w2[h] + l2_scale * work.p.w2[h]);
      }
      adam_update(work.p.b2, work.m_b2, work.v_b2, grad_b2);
    }

    if (!val_idx.empty()) {
      const double val_loss = mlp_loss(work.p, *val_data, val_idx);
      if (val_loss < best_loss - 1e-7) {
        best_loss = val_loss;
        best = work.p;
        since_best = 0;
      } else if (++since_best >= spec.mlp_patience) {
        ++epoch;
        break;
      }
    }
  }
  *epochs_run = epoch;
  return val_idx.empty() ? work.p : best;
}

// ---- prediction ----------------------------------------------------------------

Prediction predict_perceptron(const PerceptronParams& p, std::span<const double> x) {
  double score = p.bias;
  for (std::size_t f = 0; f < x.size(); ++f) score += p.weights[f] * x[f];
  return {score > 0.0 ? Membership::in : Membership::out, score};
}

Prediction predict_tree(const TreeParams& p, std::span<const double> x) {
  int node = 0;
  for (;;) {
    const TreeNode& n = p.nodes[static_cast<std::size_t>(node)];
    if (n.feature < 0) {
      return {n.in_fraction > 0.5 ? Membership::in : Membership::out, n.in_fraction};
    }
    node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
}

Prediction predict_gaussian_nb(const GaussianNbParams& p, std::span<const double> x) {
  double log_in = p.log_prior_in;
  double log_out = p.log_prior_out;
  for (std::size_t f = 0; f < x.size(); ++f) {
    const double di = x[f] - p.mean_in[f];
    const double doo = x[f] - p.mean_out[f];
    log_in += -0.5 * (std::log(2.0 * M_PI * p.var_in[f]) + di * di / p.var_in[f]);
    log_out += -0.5 * (std::log(2.0 * M_PI * p.var_out[f]) + doo * doo / p.var_out[f]);
  }
  const double score = log_in - log_out;
  return {score > 0.0 ? Membership::in : Membership::out, score};
}

Prediction predict_knn(const KnnParams& p, const ClassifierSpec& spec,
                       std::span<const double> x) {
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(spec.knn_k),
                                              p.points.size());
  // (distance, training index); index order breaks distance ties
  std::vector<std::pair<double, std::size_t>> dist(p.points.size());
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    double sum = 0.0;
    const auto& point = p.points[i];
    if (spec.knn_minkowski_p == 2.0) {
      for (std::size_t f = 0; f < x.size(); ++f) {
        const double diff = x[f] - point[f];
        sum += diff * diff;
      }
    } else {
      for (std::size_t f = 0; f < x.size(); ++f)
        sum += std::pow(std::abs(x[f] - point[f]), spec.knn_minkowski_p);
    }
    dist[i] = {sum, i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::size_t in_count = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (p.labels[dist[j].second] == Membership::in) ++in_count;
  }
  const double score = static_cast<double>(in_count) / static_cast<double>(k);
  return {score > 0.5 ? Membership::in : Membership::out, score};
}

Prediction predict_mlp(const MlpParams& p, std::span<const double> x) {
  const double score = mlp_forward(p, x, nullptr);
  return {score > 0.5 ? Membership::in : Membership::out, score};
}

}  // namespace

Prediction TrainedModel::predict(std::span<const double> row) const {
  if (row.size() != schema.size())
    throw SchemaError("feature row has " + std::to_string(row.size()) +
                      " values, model expects " + std::to_string(schema.size()));
  switch (spec.kind) {
    case ClassifierKind::perceptron:
      return predict_perceptron(std::get<PerceptronParams>(params), row);
    case ClassifierKind::decision_tree:
      return predict_tree(std::get<TreeParams>(params), row);
    case ClassifierKind::gaussian_nb:
      return predict_gaussian_nb(std::get<GaussianNbParams>(params), row);
    case ClassifierKind::knn:
      return predict_knn(std::get<KnnParams>(params), spec, row);
    case ClassifierKind::mlp:
      return predict_mlp(std::get<MlpParams>(params), row);
  }
  throw Error("unreachable classifier kind");
}

Prediction TrainedModel::predict_checked(std::span<const double> row,
                                         std::span<const std::string> row_schema) const {
  if (!std::equal(schema.begin(), schema.end(), row_schema.begin(), row_schema.end())) {
    std::string missing, extra;
    for (const auto& col : schema) {
      if (std::find(row_schema.begin(), row_schema.end(), col) == row_schema.end())
        missing += (missing.empty() ? "" : ", ") + col;
    }
    for (const auto& col : row_schema) {
      if (std::find(schema.begin(), schema.end(), col) == schema.end())
        extra += (extra.empty() ? "" : ", ") + col;
    }
    throw SchemaError("feature schema mismatch; missing: [" + missing + "], extra: [" +
                      extra + "]");
  }
  return predict(row);
}

TrainedModel train(const ClassifierSpec& spec, const Dataset& data,
                   const Dataset* validation) {
  validate_data(data);
  if (validation && !validation->rows.empty() && validation->schema != data.schema)
    throw SchemaError("validation set schema does not match the training schema");
  TrainedModel model;
  model.spec = spec;
  model.schema = data.schema;
  model.meta.rows = static_cast<std::int64_t>(data.rows.size());
  model.meta.seed = spec.seed;

  switch (spec.kind) {
    case ClassifierKind::perceptron:
      model.params = train_perceptron(spec, data, &model.meta.epochs_run);
      break;
    case ClassifierKind::decision_tree:
      model.params = train_tree(spec, data);
      break;
    case ClassifierKind::gaussian_nb:
      model.params = train_gaussian_nb(spec, data);
      break;
    case ClassifierKind::knn: {
      KnnParams params;
      params.points = data.rows;
      params.labels = data.labels;
      model.params = std::move(params);
      break;
    }
    case ClassifierKind::mlp:
      model.params = train_mlp(spec, data, validation, &model.meta.epochs_run);
      break;
  }
  model.meta.train_accuracy = compute_accuracy(model, data);
  return model;
}

// ---- persistence -----------------------------------------------------------------

namespace {

json spec_to_json(const ClassifierSpec& spec) {
  return {{"kind", std::string(to_string(spec.kind))},
          {"seed", spec.seed},
          {"tree_max_depth", spec.tree_max_depth},
          {"tree_min_split", spec.tree_min_split},
          {"knn_k", spec.knn_k},
          {"knn_minkowski_p", spec.knn_minkowski_p},
          {"mlp_hidden", spec.mlp_hidden},
          {"mlp_l2", spec.mlp_l2},
          {"mlp_learning_rate", spec.mlp_learning_rate},
          {"mlp_batch", spec.mlp_batch},
          {"mlp_epochs", spec.mlp_epochs},
          {"mlp_patience", spec.mlp_patience},
          {"mlp_validation_fraction", spec.mlp_validation_fraction},
          {"perceptron_learning_rate", spec.perceptron_learning_rate},
          {"perceptron_epochs", spec.perceptron_epochs},
          {"nb_var_smoothing", spec.nb_var_smoothing}};
}

ClassifierSpec spec_from_json(const json& j) {
  ClassifierSpec spec;
  spec.kind = kind_from_string(j.at("kind").get<std::string>());
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.tree_max_depth = j.at("tree_max_depth").get<int>();
  spec.tree_min_split = j.at("tree_min_split").get<int>();
  spec.knn_k = j.at("knn_k").get<int>();
  spec.knn_minkowski_p = j.at("knn_minkowski_p").get<double>();
  spec.mlp_hidden = j.at("mlp_hidden").get<int>();
  spec.mlp_l2 = j.at("mlp_l2").get<double>();
  spec.mlp_learning_rate = j.at("mlp_learning_rate").get<double>();
  spec.mlp_batch = j.at("mlp_batch").get<int>();
  spec.mlp_epochs = j.at("mlp_epochs").get<int>();
  spec.mlp_patience = j.at("mlp_patience").get<int>();
  spec.mlp_validation_fraction = j.at("mlp_validation_fraction").get<double>();
  spec.perceptron_learning_rate = j.at("perceptron_learning_rate").get<double>();
  spec.perceptron_epochs = j.at("perceptron_epochs").get<int>();
  spec.nb_var_smoothing = j.at("nb_var_smoothing").get<double>();
  return spec;
}

json params_to_json(const TrainedModel& model) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PerceptronParams>) {
          return {{"weights", p.weights}, {"bias", p.bias}};
        } else if constexpr (std::is_same_v<T, TreeParams>) {
          json nodes = json::array();
          for (const auto& n : p.nodes) {
            nodes.push_back({{"feature", n.feature},
                             {"threshold", n.threshold},
                             {"left", n.left},
                             {"right", n.right},
                             {"in_fraction", n.in_fraction},
                             {"samples", n.samples}});
          }
          return {{"nodes", nodes}};
        } else if constexpr (std::is_same_v<T, GaussianNbParams>) {
          return {{"log_prior_in", p.log_prior_in},
                  {"log_prior_out", p.log_prior_out},
                  {"mean_in", p.mean_in},
                  {"var_in", p.var_in},
                  {"mean_out", p.mean_out},
                  {"var_out", p.var_out}};
        } else if constexpr (std::is_same_v<T, KnnParams>) {
          json labels = json::array();
          for (const auto l : p.labels) labels.push_back(std::string(to_string(l)));
          return {{"points", p.points}, {"labels", labels}};
        } else {
          static_assert(std::is_same_v<T, MlpParams>);
          return {{"hidden", p.hidden},
                  {"w1", p.w1},
                  {"b1", p.b1},
                  {"w2", p.w2},
                  {"b2", p.b2}};
        }
      },
      model.params);
}

Params params_from_json(ClassifierKind kind, const json& j) {
  switch (kind) {
    case ClassifierKind::perceptron: {
      PerceptronParams p;
      p.weights = j.at("weights").get<std::vector<double>>();
      p.bias = j.at("bias").get<double>();
      return p;
    }
    case ClassifierKind::decision_tree: {
      TreeParams p;
      for (const auto& n : j.at("nodes")) {
        p.nodes.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(),
                           n.at("left").get<int>(), n.at("right").get<int>(),
                           n.at("in_fraction").get<double>(),
                           n.at("samples").get<std::int64_t>()});
      }
      return p;
    }
    case ClassifierKind::gaussian_nb: {
      GaussianNbParams p;
      p.log_prior_in = j.at("log_prior_in").get<double>();
      p.log_prior_out = j.at("log_prior_out").get<double>();
      p.mean_in = j.at("mean_in").get<std::vector<double>>();
      p.var_in = j.at("var_in").get<std::vector<double>>();
      p.mean_out = j.at("mean_out").get<std::vector<double>>();
      p.var_out = j.at("var_out").get<std::vector<double>>();
      return p;
    }
    case ClassifierKind::knn: {
      KnnParams p;
      p.points = j.at("points").get<std::vector<std::vector<double>>>();
      for (const auto& l : j.at("labels"))
        p.labels.push_back(membership_from_string(l.get<std::string>()));
      return p;
    }
    case ClassifierKind::mlp: {
      MlpParams p;
      p.hidden = j.at("hidden").get<int>();
      p.w1 = j.at("w1").get<std::vector<double>>();
      p.b1 = j.at("b1").get<std::vector<double>>();
      p.w2 = j.at("w2").get<std::vector<double>>();
      p.b2 = j.at("b2").get<double>();
      return p;
    }
  }
  throw Error("unreachable classifier kind");
}

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  const json doc = {{"format", kModelFormat},
                    {"spec", spec_to_json(model.spec)},
                    {"schema", model.schema},
                    {"meta",
                     {{"train_accuracy", model.meta.train_accuracy},
                      {"rows", model.meta.rows},
                      {"seed", model.meta.seed},
                      {"epochs_run", model.meta.epochs_run}}},
                    {"params", params_to_json(model)}};
  write_file_atomic(path, doc.dump(2) + "\n");
}

TrainedModel load_model(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError("cannot parse model file " + path.string() + ": " + e.what());
  }
  try {
    const std::string format = doc.value("format", "(missing)");
    if (format != kModelFormat)
      throw FormatError("model file " + path.string() + " has version tag '" + format +
                        "', expected '" + kModelFormat + "'");
    TrainedModel model;
    model.spec = spec_from_json(doc.at("spec"));
    model.schema = doc.at("schema").get<std::vector<std::string>>();
    const auto& meta = doc.at("meta");
    model.meta.train_accuracy = meta.at("train_accuracy").get<double>();
    model.meta.rows = meta.at("rows").get<std::int64_t>();
    model.meta.seed = meta.at("seed").get<std::uint64_t>();
    model.meta.epochs_run = meta.at("epochs_run").get<int>();
    model.params = params_from_json(model.spec.kind, doc.at("params"));
    return model;
  } catch (const json::exception& e) {
    throw FormatError("malformed model file " + path.string() + ": " + e.what());
  }
}

}  // namespace mtaudit::classifiers
