#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "scenefusion/common/dataset.hpp"
#include "scenefusion/common/error.hpp"
#include "scenefusion/common/parallel.hpp"
#include "scenefusion/data/manifest.hpp"
#include "scenefusion/dsp/mfcc.hpp"
#include "scenefusion/vision/backbone.hpp"

namespace scenefusion::data {

/// One MFCC row per pair, in dataset order.
inline Dataset audio_feature_dataset(const PairedDataset& ds, const dsp::MfccConfig& cfg = {}, int threads = 1) {
  const dsp::MfccExtractor extractor(cfg);
  Dataset out;
  out.num_classes = ds.num_classes();
  out.labels = ds.labels;
  out.features.resize(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    try {
      out.features[i] = extractor.clip(ds.clips[i]);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("sample '" + ds.records[i].sample_id + "': " + e.what());
    }
  });
  return out;
}

/// One frozen-backbone row per pair, in dataset order.
inline Dataset image_feature_dataset(const vision::Backbone& backbone, const PairedDataset& ds, int threads = 1) {
  Dataset out;
  out.num_classes = ds.num_classes();
  out.labels = ds.labels;
  out.features = vision::extract_features(backbone, ds.images, ds.sample_ids(), threads);
  return out;
}

/// Header f1..fD,label; one row per sample with the class name last.
inline void write_features_csv(const std::filesystem::path& path, const Dataset& data,
                               const std::vector<std::string>& class_names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'f' << j + 1 << ',';
  out << "label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features[i]) out << v << ',';
    out << class_names.at(static_cast<std::size_t>(data.labels[i])) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

/// Inverse of write_features_csv; labels are mapped through class_names.
inline Dataset read_features_csv(const std::filesystem::path& path, const std::vector<std::string>& class_names) {
  std::ifstream in(path);
  if (!in) throw NotFound("features file not found: " + path.string());
  Dataset out;
  out.num_classes = static_cast<int>(class_names.size());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line_no == 1) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    require(cells.size() >= 2, path.string() + ":" + std::to_string(line_no) + ": too few columns");
    std::vector<double> row;
    for (std::size_t j = 0; j + 1 < cells.size(); ++j) {
      try {
        row.push_back(std::stod(cells[j]));
      } catch (const std::exception&) {
        throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cells[j] + "'");
      }
    }
    const auto it = std::find(class_names.begin(), class_names.end(), cells.back());
    require(it != class_names.end(), path.string() + ":" + std::to_string(line_no) + ": unknown label '" + cells.back() + "'");
    out.features.push_back(std::move(row));
    out.labels.push_back(static_cast<int>(it - class_names.begin()));
  }
  out.validate();
  return out;
}

}  // namespace scenefusion::data
