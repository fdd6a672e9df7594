#pragma once

#include <string>
#include <utility>
#include <vector>

#include "scenefusion/audio/evolve.hpp"
#include "scenefusion/common/dataset.hpp"
#include "scenefusion/common/error.hpp"
#include "scenefusion/common/parallel.hpp"
#include "scenefusion/eval/harness.hpp"
#include "scenefusion/fusion/baselines.hpp"
#include "scenefusion/fusion/fusion.hpp"
#include "scenefusion/nn/head.hpp"

namespace scenefusion::fusion {

struct ComparisonConfig {
  audio::Genome audio_genome{{32}};
  int image_width = 32;
  int fusion_width = 32;
  nn::TrainConfig audio_train;
  nn::TrainConfig image_train;
  nn::TrainConfig fusion_train;
  bool baselines = true;
  BaselineConfig baseline;
};

/// Cross-validated accuracy of every model on identical folds.
struct ModalityComparison {
  eval::FoldReport audio;
  eval::FoldReport image;
  eval::FoldReport fused;
  std::vector<std::pair<BaselineKind, eval::FoldReport>> baselines;

  std::vector<ComparisonRow> rows() const {
    std::vector<ComparisonRow> out{{"audio", audio.mean_accuracy, audio.fold_accuracies},
                                   {"image", image.mean_accuracy, image.fold_accuracies},
                                   {"fusion", fused.mean_accuracy, fused.fold_accuracies}};
    for (const auto& [kind, r] : baselines) out.push_back({to_string(kind), r.mean_accuracy, r.fold_accuracies});
    return out;
  }
};

/// For each fold, trains the audio MLP and the image head on the training
/// rows, freezes them, trains the fusion head on their training-row logits,
/// and fits every baseline on those same fused training vectors. All models
/// are scored on the fold's test rows.
inline ModalityComparison compare_modalities(const Dataset& audio_rows, const Dataset& image_rows,
                                             const std::vector<std::string>& sample_ids, const eval::FoldPlan& plan,
                                             const ComparisonConfig& cfg, int threads = 1) {
  require(!audio_rows.empty(), "compare_modalities: empty dataset");
  require(audio_rows.labels == image_rows.labels && sample_ids.size() == audio_rows.size(),
          "compare_modalities: audio, image and id lists are not aligned");
  require(plan.size() == audio_rows.size(), "compare_modalities: fold plan size does not match dataset");
  const std::vector<BaselineKind> kinds =
      cfg.baselines ? std::vector<BaselineKind>{BaselineKind::naive_bayes, BaselineKind::linear_svm, BaselineKind::random_forest}
                    : std::vector<BaselineKind>{};
  const std::size_t k = static_cast<std::size_t>(plan.k);
  const std::size_t models = 3 + kinds.size();
  std::vector<std::vector<std::vector<int>>> preds(models, std::vector<std::vector<int>>(k));

  parallel_for(k, threads, [&](std::size_t f) {
    const auto train_rows = plan.train_indices(static_cast<int>(f));
    const auto test_rows = plan.test_indices(static_cast<int>(f));
    if (test_rows.empty()) return;
    const auto audio_net = audio::train_audio_classifier(audio_rows.subset(train_rows), cfg.audio_genome, cfg.audio_train);
    const auto image_net = nn::train_head(image_rows.subset(train_rows), cfg.image_width, cfg.image_train);
    FusionModel model = make_fusion_model(audio_net, image_net);

    auto pairs_of = [&](const std::vector<std::size_t>& rows) {
      PairedFeatures p;
      p.num_classes = audio_rows.num_classes;
      for (std::size_t r : rows) {
        p.audio_ids.push_back(sample_ids[r]);
        p.image_ids.push_back(sample_ids[r]);
        p.audio.push_back(audio_rows.features[r]);
        p.image.push_back(image_rows.features[r]);
        p.labels.push_back(audio_rows.labels[r]);
      }
      return p;
    };
    const Dataset fused_train = fused_dataset(model, pairs_of(train_rows));
    const Dataset fused_test = fused_dataset(model, pairs_of(test_rows));
    model.head = nn::train_head(fused_train, cfg.fusion_width, cfg.fusion_train);

    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      const std::size_t r = test_rows[i];
      preds[0][f].push_back(nn::predict_class(model.audio_branch, audio_rows.features[r]));
      preds[1][f].push_back(nn::predict_class(model.image_branch, image_rows.features[r]));
      preds[2][f].push_back(nn::predict_class(model.head, fused_test.features[i]));
    }
    for (std::size_t b = 0; b < kinds.size(); ++b) {
      auto clf = make_baseline(kinds[b], cfg.baseline);
      clf->fit(fused_train);
      for (const auto& x : fused_test.features) preds[3 + b][f].push_back(clf->predict(x));
    }
  });

  const int c = audio_rows.num_classes;
  ModalityComparison out;
  out.audio = eval::report_from_predictions(audio_rows.labels, c, plan, preds[0]);
  out.image = eval::report_from_predictions(audio_rows.labels, c, plan, preds[1]);
  out.fused = eval::report_from_predictions(audio_rows.labels, c, plan, preds[2]);
  for (std::size_t b = 0; b < kinds.size(); ++b) {
    out.baselines.emplace_back(kinds[b], eval::report_from_predictions(audio_rows.labels, c, plan, preds[3 + b]));
  }
  return out;
}

}  // namespace scenefusion::fusion
