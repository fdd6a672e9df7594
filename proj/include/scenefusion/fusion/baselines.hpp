#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "scenefusion/common/dataset.hpp"
#include "scenefusion/common/error.hpp"
#include "scenefusion/common/random.hpp"
#include "scenefusion/eval/harness.hpp"

namespace scenefusion::fusion {

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(const Dataset& data) = 0;
  virtual int predict(std::span<const double> x) const = 0;
};

inline int count_present_classes(const Dataset& data) {
  std::vector<bool> seen(static_cast<std::size_t>(std::max(data.num_classes, 1)), false);
  for (int l : data.labels) seen[static_cast<std::size_t>(l)] = true;
  return static_cast<int>(std::count(seen.begin(), seen.end(), true));
}

/// Per-class, per-feature Gaussians with log-space scoring. Variances get
/// a small floor relative to the largest feature variance.
class GaussianNaiveBayes : public Classifier {
 public:
  void fit(const Dataset& data) override {
    require(!data.empty(), "naive_bayes: empty dataset");
    data.validate();
    const std::size_t d = data.dim();
    const auto c = static_cast<std::size_t>(data.num_classes);
    mean_.assign(c, std::vector<double>(d, 0.0));
    var_.assign(c, std::vector<double>(d, 0.0));
    log_prior_.assign(c, -std::numeric_limits<double>::infinity());
    std::vector<double> count(c, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto k = static_cast<std::size_t>(data.labels[i]);
      count[k] += 1.0;
      for (std::size_t j = 0; j < d; ++j) mean_[k][j] += data.features[i][j];
    }
    for (std::size_t k = 0; k < c; ++k)
      if (count[k] > 0) for (double& m : mean_[k]) m /= count[k];
    double max_var = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto k = static_cast<std::size_t>(data.labels[i]);
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = data.features[i][j] - mean_[k][j];
        var_[k][j] += diff * diff;
      }
    }
    for (std::size_t k = 0; k < c; ++k) {
      if (count[k] == 0) continue;
      for (double& v : var_[k]) {
        v /= count[k];
        max_var = std::max(max_var, v);
      }
      log_prior_[k] = std::log(count[k] / static_cast<double>(data.size()));
    }
    const double floor = 1e-9 * std::max(max_var, 1.0);
    for (auto& row : var_)
      for (double& v : row) v += floor;
  }

  int predict(std::span<const double> x) const override {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < mean_.size(); ++k) {
      if (!std::isfinite(log_prior_[k])) continue;
      double s = log_prior_[k];
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double diff = x[j] - mean_[k][j];
        s -= 0.5 * (std::log(2.0 * std::numbers::pi * var_[k][j]) + diff * diff / var_[k][j]);
      }
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(k);
      }
    }
    return best;
  }

 private:
  std::vector<std::vector<double>> mean_, var_;
  std::vector<double> log_prior_;
};

struct SvmConfig {
  double lambda = 1e-3;  // L2 regularisation strength
  int epochs = 200;
  std::uint64_t seed = 0;
};

/// One-vs-rest linear SVM: per class, Pegasos-style subgradient descent on
/// lambda/2 |w|^2 + mean hinge(1 - y (w.x + b)) over z-scored features.
class LinearSvm : public Classifier {
 public:
  explicit LinearSvm(SvmConfig cfg = {}) : cfg_(cfg) {}

  void fit(const Dataset& data) override {
    require(!data.empty(), "linear_svm: empty dataset");
    data.validate();
    require(count_present_classes(data) >= 2, "linear_svm: need at least two classes");
    const std::size_t d = data.dim();
    fit_scaler(data);
    std::vector<std::vector<double>> z(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) z[i] = scale(data.features[i]);

    const auto classes = static_cast<std::size_t>(data.num_classes);
    w_.assign(classes, std::vector<double>(d, 0.0));
    b_.assign(classes, 0.0);
    Rng rng(cfg_.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t c = 0; c < classes; ++c) {
      auto& w = w_[c];
      double& b = b_[c];
      std::uint64_t t = 0;
      for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t i : order) {
          ++t;
          // Offset start keeps the first steps bounded (eta <= 1).
          const double eta = 1.0 / (cfg_.lambda * (static_cast<double>(t) + 1.0 / cfg_.lambda));
          const double y = data.labels[i] == static_cast<int>(c) ? 1.0 : -1.0;
          double margin = b;
          for (std::size_t j = 0; j < d; ++j) margin += w[j] * z[i][j];
          const double shrink = 1.0 - eta * cfg_.lambda;
          for (double& v : w) v *= shrink;
          if (y * margin < 1.0) {
            for (std::size_t j = 0; j < d; ++j) w[j] += eta * y * z[i][j];
            b += eta * y;
          }
        }
      }
    }
  }

  int predict(std::span<const double> x) const override {
    const auto zx = scale(x);
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < w_.size(); ++c) {
      double s = b_[c];
      for (std::size_t j = 0; j < zx.size(); ++j) s += w_[c][j] * zx[j];
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(c);
      }
    }
    return best;
  }

 private:
  void fit_scaler(const Dataset& data) {
    const std::size_t d = data.dim();
    mu_.assign(d, 0.0);
    inv_sd_.assign(d, 1.0);
    for (const auto& r : data.features)
      for (std::size_t j = 0; j < d; ++j) mu_[j] += r[j];
    for (double& m : mu_) m /= static_cast<double>(data.size());
    std::vector<double> var(d, 0.0);
    for (const auto& r : data.features)
      for (std::size_t j = 0; j < d; ++j) var[j] += (r[j] - mu_[j]) * (r[j] - mu_[j]);
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(data.size()));
      inv_sd_[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
  }

  std::vector<double> scale(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mu_[j]) * inv_sd_[j];
    return out;
  }

  SvmConfig cfg_;
  std::vector<std::vector<double>> w_;
  std::vector<double> b_;
  std::vector<double> mu_, inv_sd_;
};

struct ForestConfig {
  int trees = 100;
  int max_depth = 12;
  int min_samples_split = 2;
  std::uint64_t seed = 0;
};

/// Bagged CART trees (Gini impurity), sqrt(D) candidate features per split,
/// majority vote.
class RandomForest : public Classifier {
 public:
  explicit RandomForest(ForestConfig cfg = {}) : cfg_(cfg) {}

  void fit(const Dataset& data) override {
    require(!data.empty(), "random_forest: empty dataset");
    data.validate();
    require(count_present_classes(data) >= 2, "random_forest: need at least two classes");
    require(cfg_.trees >= 1 && cfg_.max_depth >= 0, "random_forest: trees >= 1 and max_depth >= 0 required");
    classes_ = data.num_classes;
    data_ = &data;
    trees_.clear();
    const int d = static_cast<int>(data.dim());
    features_per_split_ = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(d)))));
    for (int t = 0; t < cfg_.trees; ++t) {
      Rng rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(t)));
      std::vector<std::size_t> rows(data.size());
      // A single tree trains on all rows so that it is the plain CART fit.
      if (cfg_.trees == 1) {
        std::iota(rows.begin(), rows.end(), std::size_t{0});
      } else {
        for (auto& r : rows) r = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1));
      }
      Tree tree;
      grow(tree, rows, 0, rng);
      trees_.push_back(std::move(tree));
    }
    data_ = nullptr;
  }

  int predict(std::span<const double> x) const override {
    std::vector<int> votes(static_cast<std::size_t>(classes_), 0);
    for (const auto& tree : trees_) {
      std::size_t n = 0;
      while (tree[n].feature >= 0) n = x[static_cast<std::size_t>(tree[n].feature)] <= tree[n].threshold ? tree[n].left : tree[n].right;
      ++votes[static_cast<std::size_t>(tree[n].label)];
    }
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::size_t left = 0, right = 0;
    int label = 0;
  };
  using Tree = std::vector<Node>;

  static double gini(const std::vector<double>& counts, double total) {
    if (total <= 0) return 0.0;
    double s = 1.0;
    for (double c : counts) s -= (c / total) * (c / total);
    return s;
  }

  std::size_t grow(Tree& tree, std::vector<std::size_t>& rows, int depth, Rng& rng) {
    const std::size_t id = tree.size();
    tree.push_back({});
    std::vector<double> counts(static_cast<std::size_t>(classes_), 0.0);
    for (std::size_t r : rows) counts[static_cast<std::size_t>(data_->labels[r])] += 1.0;
    tree[id].label = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    const double n = static_cast<double>(rows.size());
    const double parent = gini(counts, n);
    if (depth >= cfg_.max_depth || rows.size() < static_cast<std::size_t>(cfg_.min_samples_split) || parent == 0.0) return id;

    const int d = static_cast<int>(data_->dim());
    std::vector<int> feats(static_cast<std::size_t>(d));
    std::iota(feats.begin(), feats.end(), 0);
    rng.shuffle(std::span<int>(feats));
    feats.resize(static_cast<std::size_t>(std::min(features_per_split_, d)));

    int best_feature = -1;
    double best_threshold = 0.0, best_impurity = parent;
    std::vector<std::size_t> sorted = rows;
    for (int f : feats) {
      const auto fi = static_cast<std::size_t>(f);
      std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return data_->features[a][fi] < data_->features[b][fi];
      });
      std::vector<double> left(static_cast<std::size_t>(classes_), 0.0), right = counts;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const auto lab = static_cast<std::size_t>(data_->labels[sorted[i]]);
        left[lab] += 1.0;
        right[lab] -= 1.0;
        const double v = data_->features[sorted[i]][fi], next = data_->features[sorted[i + 1]][fi];
        if (!(v < next)) continue;
        const double nl = static_cast<double>(i + 1), nr = n - nl;
        const double impurity = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
        if (impurity < best_impurity - 1e-12) {
          best_impurity = impurity;
          best_feature = f;
          best_threshold = 0.5 * (v + next);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> lo, hi;
    for (std::size_t r : rows) (data_->features[r][static_cast<std::size_t>(best_feature)] <= best_threshold ? lo : hi).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    tree[id].feature = best_feature;
    tree[id].threshold = best_threshold;
    const std::size_t l = grow(tree, lo, depth + 1, rng);
    const std::size_t r = grow(tree, hi, depth + 1, rng);
    tree[id].left = l;
    tree[id].right = r;
    return id;
  }

  ForestConfig cfg_;
  int classes_ = 0;
  int features_per_split_ = 1;
  const Dataset* data_ = nullptr;
  std::vector<Tree> trees_;
};

enum class BaselineKind { naive_bayes, linear_svm, random_forest };

inline std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::naive_bayes: return "naive_bayes";
    case BaselineKind::linear_svm: return "linear_svm";
    case BaselineKind::random_forest: return "random_forest";
  }
  return "?";
}

struct BaselineConfig {
  SvmConfig svm;
  ForestConfig forest;
};

inline std::unique_ptr<Classifier> make_baseline(BaselineKind kind, const BaselineConfig& cfg = {}) {
  switch (kind) {
    case BaselineKind::naive_bayes: return std::make_unique<GaussianNaiveBayes>();
    case BaselineKind::linear_svm: return std::make_unique<LinearSvm>(cfg.svm);
    case BaselineKind::random_forest: return std::make_unique<RandomForest>(cfg.forest);
  }
  throw InvalidArgument("unknown baseline kind");
}

struct BaselineResult {
  std::unique_ptr<Classifier> classifier;  // fitted on every row
  eval::FoldReport report;
};

/// Cross-validated accuracy of a classical model on fused feature vectors,
/// plus the model refitted on all rows.
inline BaselineResult train_baseline(BaselineKind kind, const Dataset& fused, const eval::FoldPlan& plan,
                                     const BaselineConfig& cfg = {}) {
  require(!fused.empty(), "train_baseline: empty dataset");
  if (kind != BaselineKind::naive_bayes) {
    require(count_present_classes(fused) >= 2, "train_baseline: " + to_string(kind) + " needs at least two classes");
  }
  auto fit = [&](const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows) {
    auto model = make_baseline(kind, cfg);
    model->fit(fused.subset(train_rows));
    std::vector<int> preds;
    for (std::size_t r : test_rows) preds.push_back(model->predict(fused.features[r]));
    return preds;
  };
  BaselineResult result;
  result.report = eval::evaluate(fit, fused.labels, fused.num_classes, plan);
  result.classifier = make_baseline(kind, cfg);
  result.classifier->fit(fused);
  return result;
}

}  // namespace scenefusion::fusion
