#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenefusion/common/error.hpp"
#include "scenefusion/common/parallel.hpp"
#include "scenefusion/common/random.hpp"

namespace scenefusion::eval {

/// Assignment of every sample to exactly one test fold.
struct FoldPlan {
  int k = 10;
  std::uint64_t seed = 0;
  std::vector<int> assignments;

  std::size_t size() const { return assignments.size(); }

  std::vector<std::size_t> test_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] == fold) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> train_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] != fold) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
    return sizes;
  }
};

/// Shuffle indices, then deal them round-robin into k folds.
inline FoldPlan kfold_split(std::size_t n, int k, std::uint64_t seed) {
  require(k >= 2, "kfold_split: k must be >= 2");
  require(n >= static_cast<std::size_t>(k), "kfold_split: fewer samples than folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  FoldPlan plan{k, seed, std::vector<int>(n, 0)};
  for (std::size_t i = 0; i < n; ++i) plan.assignments[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return plan;
}

/// Per-class shuffle, then one continuous round-robin deal across classes,
/// so every fold gets near-equal share of each class.
inline FoldPlan stratified_kfold_split(std::span<const int> labels, int k, std::uint64_t seed) {
  require(k >= 2, "kfold_split: k must be >= 2");
  require(labels.size() >= static_cast<std::size_t>(k), "kfold_split: fewer samples than folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(seed);
  FoldPlan plan{k, seed, std::vector<int>(labels.size(), 0)};
  std::size_t dealt = 0;
  for (auto& [label, rows] : by_class) {
    rng.shuffle(std::span<std::size_t>(rows));
    for (std::size_t r : rows) plan.assignments[r] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
  }
  return plan;
}

/// Keeps all samples of a group (e.g. one source video) in the same fold.
/// Groups are shuffled and each goes to the currently smallest fold, so fold
/// sizes are only approximately balanced.
inline FoldPlan grouped_kfold_split(std::span<const std::string> groups, int k, std::uint64_t seed) {
  require(k >= 2, "kfold_split: k must be >= 2");
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);
  require(members.size() >= static_cast<std::size_t>(k), "kfold_split: fewer groups than folds");
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [g, rows] : members) order.push_back(&rows);
  Rng rng(seed);
  rng.shuffle(std::span<const std::vector<std::size_t>*>(order));
  FoldPlan plan{k, seed, std::vector<int>(groups.size(), 0)};
  std::vector<std::size_t> load(static_cast<std::size_t>(k), 0);
  for (const auto* rows : order) {
    const auto fold = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    for (std::size_t r : *rows) plan.assignments[r] = static_cast<int>(fold);
    load[fold] += rows->size();
  }
  return plan;
}

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int num_classes)
      : num_classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
    require(num_classes >= 1, "ConfusionMatrix: num_classes must be >= 1");
  }

  void add(int truth, int predicted) {
    require(truth >= 0 && truth < num_classes_ && predicted >= 0 && predicted < num_classes_,
            "ConfusionMatrix: class index out of range");
    ++counts_[static_cast<std::size_t>(truth) * num_classes_ + predicted];
  }

  void merge(const ConfusionMatrix& other) {
    require(other.num_classes_ == num_classes_, "ConfusionMatrix: size mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  }

  int num_classes() const { return num_classes_; }
  std::int64_t at(int truth, int predicted) const {
    return counts_[static_cast<std::size_t>(truth) * num_classes_ + predicted];
  }
  std::int64_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }
  std::int64_t trace() const {
    std::int64_t t = 0;
    for (int c = 0; c < num_classes_; ++c) t += at(c, c);
    return t;
  }
  std::int64_t row_sum(int truth) const {
    std::int64_t s = 0;
    for (int c = 0; c < num_classes_; ++c) s += at(truth, c);
    return s;
  }
  double accuracy() const {
    const auto n = total();
    return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
  }

  std::string to_csv(std::span<const std::string> class_names = {}) const {
    auto name = [&](int c) {
      return static_cast<std::size_t>(c) < class_names.size() ? class_names[static_cast<std::size_t>(c)]
                                                              : std::to_string(c);
    };
    std::ostringstream out;
    out << "true\\predicted";
    for (int c = 0; c < num_classes_; ++c) out << ',' << name(c);
    out << '\n';
    for (int t = 0; t < num_classes_; ++t) {
      out << name(t);
      for (int p = 0; p < num_classes_; ++p) out << ',' << at(t, p);
      out << '\n';
    }
    return out.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (int t = 0; t < num_classes_; ++t) {
      nlohmann::json row = nlohmann::json::array();
      for (int p = 0; p < num_classes_; ++p) row.push_back(at(t, p));
      rows.push_back(row);
    }
    return rows;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int num_classes_ = 0;
  std::vector<std::int64_t> counts_;
};

inline double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
inline double stddev_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct FoldReport {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<double> fold_accuracies;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  ConfusionMatrix confusion;
  nlohmann::json config = nlohmann::json::object();

  // Pooled accuracy, trace / total over every test prediction.
  double pooled_accuracy() const { return confusion.accuracy(); }

  nlohmann::json to_json() const {
    return {{"k", k},
            {"seed", seed},
            {"fold_accuracies", fold_accuracies},
            {"mean_accuracy", mean_accuracy},
            {"std_accuracy", std_accuracy},
            {"pooled_accuracy", pooled_accuracy()},
            {"samples", confusion.total()},
            {"confusion", confusion.to_json()},
            {"config", config}};
  }
};

/// Report from predictions already made for each fold's test rows, in
/// test_indices order.
inline FoldReport report_from_predictions(std::span<const int> labels, int num_classes, const FoldPlan& plan,
                                          const std::vector<std::vector<int>>& predictions) {
  require(plan.size() == labels.size(), "evaluate: fold plan size does not match dataset");
  require(predictions.size() == static_cast<std::size_t>(plan.k), "evaluate: need one prediction list per fold");
  FoldReport report;
  report.k = plan.k;
  report.seed = plan.seed;
  report.confusion = ConfusionMatrix(num_classes);
  for (int f = 0; f < plan.k; ++f) {
    const auto test = plan.test_indices(f);
    if (test.empty()) continue;
    const auto& preds = predictions[static_cast<std::size_t>(f)];
    require(preds.size() == test.size(), "evaluate: predictor returned wrong number of predictions");
    ConfusionMatrix fold_cm(num_classes);
    for (std::size_t i = 0; i < test.size(); ++i) fold_cm.add(labels[test[i]], preds[i]);
    report.fold_accuracies.push_back(fold_cm.accuracy());
    report.confusion.merge(fold_cm);
  }
  report.mean_accuracy = mean_of(report.fold_accuracies);
  report.std_accuracy = stddev_of(report.fold_accuracies);
  return report;
}

/// Fit is callable as fit(train_rows, test_rows) -> predicted class per test
/// row. Each fold is trained on the complement of its test rows. Folds run
/// on up to `threads` workers; the report is assembled in fold order.
template <typename Fit>
FoldReport evaluate(Fit&& fit, std::span<const int> labels, int num_classes, const FoldPlan& plan, int threads = 1) {
  require(plan.size() == labels.size(), "evaluate: fold plan size does not match dataset");
  require(!labels.empty(), "evaluate: empty dataset");
  std::vector<std::vector<int>> predictions(static_cast<std::size_t>(plan.k));
  parallel_for(static_cast<std::size_t>(plan.k), threads, [&](std::size_t f) {
    const auto test = plan.test_indices(static_cast<int>(f));
    if (!test.empty()) predictions[f] = fit(plan.train_indices(static_cast<int>(f)), test);
  });
  return report_from_predictions(labels, num_classes, plan, predictions);
}

struct NamedPredictor {
  std::string name;
  std::function<int(std::size_t)> predict;  // sample row -> class
};

struct HoldoutRow {
  std::string name;
  std::int64_t correct = 0;
  std::int64_t total = 0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

/// Scores already-trained predictors on data from sources never seen in
/// training. Nothing is fitted here.
inline std::vector<HoldoutRow> holdout_evaluate(std::span<const NamedPredictor> models, std::span<const int> labels,
                                                int num_classes, std::span<const std::string> unseen_sources,
                                                std::span<const std::string> training_sources) {
  require(!labels.empty(), "holdout_evaluate: unseen dataset is empty");
  require(unseen_sources.size() == labels.size(), "holdout_evaluate: source list does not match dataset");
  const std::set<std::string> seen(training_sources.begin(), training_sources.end());
  for (const auto& s : unseen_sources) {
    require(!seen.contains(s), "holdout_evaluate: source '" + s + "' also appears in the training data");
  }
  std::vector<HoldoutRow> rows;
  for (const auto& model : models) {
    HoldoutRow row{model.name, 0, 0, 0.0, ConfusionMatrix(num_classes)};
    for (std::size_t i = 0; i < labels.size(); ++i) row.confusion.add(labels[i], model.predict(i));
    row.correct = row.confusion.trace();
    row.total = row.confusion.total();
    row.accuracy = row.confusion.accuracy();
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string holdout_csv(std::span<const HoldoutRow> rows) {
  std::ostringstream out;
  out << "approach,correct,incorrect,correct_incorrect,accuracy_percent\n";
  out.setf(std::ios::fixed);
  out.precision(2);
  for (const auto& r : rows) {
    const auto wrong = r.total - r.correct;
    out << r.name << ',' << r.correct << ',' << wrong << ',' << r.correct << '/' << wrong << ','
        << 100.0 * r.accuracy << '\n';
  }
  return out.str();
}

}  // namespace scenefusion::eval
