#pragma once

#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenefusion/common/dataset.hpp"
#include "scenefusion/common/error.hpp"
#include "scenefusion/eval/harness.hpp"
#include "scenefusion/nn/head.hpp"
#include "scenefusion/nn/network.hpp"
#include "scenefusion/nn/serialize.hpp"
#include "scenefusion/nn/train.hpp"

namespace scenefusion::fusion {

/// Two frozen single-modality classifiers and the interpretation head
/// trained on their concatenated logits (audio first).
struct FusionModel {
  nn::NetworkModel audio_branch;
  nn::NetworkModel image_branch;  // operates on backbone features
  nn::NetworkModel head;

  int num_classes() const { return audio_branch.output_dim(); }

  void validate() const {
    audio_branch.validate();
    image_branch.validate();
    require(audio_branch.output_dim() == image_branch.output_dim(), "fusion: branches disagree on class count");
    require(audio_branch.all_frozen() && image_branch.all_frozen(), "fusion: branches must be frozen");
    if (!head.layers.empty()) {
      head.validate();
      require(head.input_dim() == 2 * num_classes(), "fusion: head input must be 2 x num_classes");
    }
  }

  nlohmann::json to_json() const {
    return {{"format", "scenefusion.fusion"},
            {"version", 1},
            {"audio_branch", nn::to_json(audio_branch)},
            {"image_branch", nn::to_json(image_branch)},
            {"head", nn::to_json(head)}};
  }

  static FusionModel from_json(const nlohmann::json& doc) {
    try {
      require(doc.at("format").get<std::string>() == "scenefusion.fusion", "fusion: unexpected format tag");
      FusionModel m{nn::network_from_json(doc.at("audio_branch")), nn::network_from_json(doc.at("image_branch")),
                    nn::network_from_json(doc.at("head"))};
      m.validate();
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("fusion: malformed document: ") + e.what());
    }
  }
};

/// Freezes copies of both branches; the head is left empty.
inline FusionModel make_fusion_model(nn::NetworkModel audio_branch, nn::NetworkModel image_branch) {
  audio_branch.set_frozen(true);
  image_branch.set_frozen(true);
  FusionModel m{std::move(audio_branch), std::move(image_branch), {}};
  m.validate();
  return m;
}

/// predict_logits(audio) ++ predict_logits(image).
inline std::vector<double> fused_feature_vector(const FusionModel& model, std::span<const double> audio_features,
                                                std::span<const double> image_features) {
  auto fused = nn::predict_logits(model.audio_branch, audio_features);
  const auto image = nn::predict_logits(model.image_branch, image_features);
  fused.insert(fused.end(), image.begin(), image.end());
  return fused;
}

/// Synchronised per-sample inputs for both branches.
struct PairedFeatures {
  std::vector<std::string> audio_ids;
  std::vector<std::string> image_ids;
  std::vector<std::vector<double>> audio;
  std::vector<std::vector<double>> image;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }

  void validate() const {
    require(audio.size() == labels.size() && image.size() == labels.size(), "paired features: count mismatch");
    require(audio_ids.size() == labels.size() && image_ids.size() == labels.size(), "paired features: id count mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      require(audio_ids[i] == image_ids[i], "paired features: row " + std::to_string(i) + " pairs audio '" +
                                                audio_ids[i] + "' with image '" + image_ids[i] + "'");
    }
  }
};

/// Fused logit vectors for every pair, as a Dataset for head training or
/// classical baselines.
inline Dataset fused_dataset(const FusionModel& model, const PairedFeatures& pairs) {
  pairs.validate();
  Dataset out;
  out.num_classes = pairs.num_classes;
  out.labels = pairs.labels;
  out.features.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out.features.push_back(fused_feature_vector(model, pairs.audio[i], pairs.image[i]));
  return out;
}

inline int predict_fused(const FusionModel& model, std::span<const double> audio_features,
                         std::span<const double> image_features) {
  return nn::predict_class(model.head, fused_feature_vector(model, audio_features, image_features));
}

/// Trains only the head: 2C -> width (ReLU) -> C (softmax). Branch
/// parameters come back bit-identical.
inline FusionModel train_fusion_head(const FusionModel& model, const PairedFeatures& pairs, const nn::TrainConfig& cfg,
                                     int width) {
  model.validate();
  require(pairs.size() > 0, "train_fusion_head: empty dataset");
  FusionModel out = model;
  out.head = nn::train_head(fused_dataset(model, pairs), width, cfg);
  return out;
}

inline nn::SweepResult fusion_head_sweep(const FusionModel& model, const PairedFeatures& pairs, std::span<const int> widths,
                                         const nn::SweepConfig& cfg) {
  require(!widths.empty(), "fusion_head_sweep: no candidate widths");
  model.validate();
  return nn::sweep_head_widths(fused_dataset(model, pairs), widths, cfg);
}

struct ComparisonRow {
  std::string model;
  double accuracy = 0.0;
  std::vector<double> fold_accuracies;
};

inline std::string comparison_csv(std::span<const ComparisonRow> rows) {
  std::ostringstream out;
  out.precision(17);
  std::size_t folds = 0;
  for (const auto& r : rows) folds = std::max(folds, r.fold_accuracies.size());
  out << "model,accuracy";
  for (std::size_t f = 0; f < folds; ++f) out << ",fold" << f + 1;
  out << '\n';
  for (const auto& r : rows) {
    out << r.model << ',' << r.accuracy;
    for (double a : r.fold_accuracies) out << ',' << a;
    out << '\n';
  }
  return out.str();
}

}  // namespace scenefusion::fusion
