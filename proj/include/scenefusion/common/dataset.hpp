#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "scenefusion/common/error.hpp"

namespace scenefusion {

/// Row-per-sample feature table with integer class labels.
struct Dataset {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }

  void validate() const {
    require(features.size() == labels.size(), "dataset: feature/label count mismatch");
    require(num_classes >= 1, "dataset: num_classes must be >= 1");
    const std::size_t d = dim();
    for (std::size_t i = 0; i < features.size(); ++i) {
      require(features[i].size() == d, "dataset: ragged feature row " + std::to_string(i));
      require(labels[i] >= 0 && labels[i] < num_classes, "dataset: label out of range at row " + std::to_string(i));
    }
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.num_classes = num_classes;
    out.features.reserve(rows.size());
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) {
      out.features.push_back(features.at(r));
      out.labels.push_back(labels.at(r));
    }
    return out;
  }
};

}  // namespace scenefusion
