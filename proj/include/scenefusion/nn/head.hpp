#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "scenefusion/common/dataset.hpp"
#include "scenefusion/eval/harness.hpp"
#include "scenefusion/nn/network.hpp"
#include "scenefusion/nn/train.hpp"

namespace scenefusion::nn {

/// Powers of two 2, 4, ..., 4096.
inline std::vector<int> default_interpretation_widths() {
  std::vector<int> widths;
  for (int w = 2; w <= 4096; w *= 2) widths.push_back(w);
  return widths;
}

/// Dense interpretation head: input -> width (ReLU) -> classes (softmax),
/// with a z-score input map fitted on the training rows.
inline NetworkModel train_head(const Dataset& train_rows, int width, const TrainConfig& cfg, bool standardize = true) {
  require(width >= 1, "train_head: width must be >= 1");
  require(!train_rows.empty(), "train_head: empty dataset");
  const int hidden[] = {width};
  NetworkModel head = make_mlp(static_cast<int>(train_rows.dim()), hidden, train_rows.num_classes,
                               derive_seed(cfg.seed, static_cast<std::uint64_t>(width)));
  if (standardize) head.input_norm = fit_standardizer(train_rows);
  return train(std::move(head), train_rows, cfg).model;
}

struct SweepRow {
  int width = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::vector<double> fold_accuracies;
};

struct SweepResult {
  int best_width = 0;
  std::vector<SweepRow> table;

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "width,mean_accuracy,std\n";
    for (const auto& r : table) out << r.width << ',' << r.mean_accuracy << ',' << r.std_accuracy << '\n';
    return out.str();
  }
};

struct SweepConfig {
  TrainConfig train;
  int folds = 10;
  std::uint64_t fold_seed = 0;
  bool standardize = true;
  int threads = 1;
};

/// Cross-validated accuracy for each candidate width. The best width
/// maximises mean accuracy; ties go to the smaller width.
inline SweepResult sweep_head_widths(const Dataset& data, std::span<const int> widths, const SweepConfig& cfg) {
  require(!widths.empty(), "head sweep: no candidate widths");
  require(!data.empty(), "head sweep: empty dataset");
  data.validate();
  std::vector<int> sorted(widths.begin(), widths.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  require(sorted.front() >= 1, "head sweep: widths must be >= 1");

  const auto plan = eval::kfold_split(data.size(), cfg.folds, cfg.fold_seed);
  SweepResult result;
  for (int width : sorted) {
    auto fit = [&](const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows) {
      const auto head = train_head(data.subset(train_rows), width, cfg.train, cfg.standardize);
      std::vector<int> preds;
      preds.reserve(test_rows.size());
      for (std::size_t r : test_rows) preds.push_back(predict_class(head, data.features[r]));
      return preds;
    };
    const auto report = eval::evaluate(fit, data.labels, data.num_classes, plan, cfg.threads);
    result.table.push_back({width, report.mean_accuracy, report.std_accuracy, report.fold_accuracies});
  }
  const auto best = std::max_element(result.table.begin(), result.table.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.mean_accuracy < b.mean_accuracy;  // first maximum == smallest width
  });
  result.best_width = best->width;
  return result;
}

}  // namespace scenefusion::nn
