#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "scenefusion/common/dataset.hpp"
#include "scenefusion/common/error.hpp"
#include "scenefusion/common/random.hpp"
#include "scenefusion/nn/network.hpp"

namespace scenefusion::nn {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const {
    require(epochs >= 0, "train: epochs must be >= 0");
    require(batch_size >= 1, "train: batch_size must be >= 1");
    require(learning_rate > 0.0, "train: learning_rate must be > 0");
    require(momentum >= 0.0 && momentum < 1.0, "train: momentum must be in [0, 1)");
  }
};

/// Heavy-ball SGD: v <- g + momentum * v, w <- w - lr * v. Frozen layers
/// are skipped entirely, so their parameters stay bit-identical.
class SgdOptimizer {
 public:
  SgdOptimizer(const NetworkModel& model, double learning_rate, double momentum)
      : learning_rate_(learning_rate), momentum_(momentum), velocity_(Gradients::zeros_like(model)) {}

  void step(NetworkModel& model, const Gradients& grads) {
    require(grads.weights.size() == model.layers.size() && grads.bias.size() == model.layers.size(),
            "sgd_step: gradient layer count mismatch");
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      auto& layer = model.layers[l];
      require(grads.weights[l].size() == layer.weights.size() && grads.bias[l].size() == layer.bias.size(),
              "sgd_step: gradient shape mismatch in layer " + std::to_string(l));
      if (layer.spec.frozen) continue;
      update(layer.weights, grads.weights[l], velocity_.weights[l]);
      update(layer.bias, grads.bias[l], velocity_.bias[l]);
    }
  }

  const Gradients& velocity() const { return velocity_; }

 private:
  void update(std::vector<double>& params, const std::vector<double>& grad, std::vector<double>& vel) const {
    for (std::size_t i = 0; i < params.size(); ++i) {
      vel[i] = grad[i] + momentum_ * vel[i];
      params[i] -= learning_rate_ * vel[i];
    }
  }

  double learning_rate_;
  double momentum_;
  Gradients velocity_;
};

/// Per-feature z-score fitted on `data`; constant features get scale 1.
inline InputNorm fit_standardizer(const Dataset& data) {
  require(!data.empty(), "fit_standardizer: empty dataset");
  const std::size_t d = data.dim();
  InputNorm norm;
  norm.shift.assign(d, 0.0);
  norm.scale.assign(d, 1.0);
  const double n = static_cast<double>(data.size());
  for (const auto& row : data.features)
    for (std::size_t j = 0; j < d; ++j) norm.shift[j] += row[j];
  for (double& m : norm.shift) m /= n;
  std::vector<double> var(d, 0.0);
  for (const auto& row : data.features)
    for (std::size_t j = 0; j < d; ++j) var[j] += (row[j] - norm.shift[j]) * (row[j] - norm.shift[j]);
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / n);
    norm.scale[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  return norm;
}

struct TrainResult {
  NetworkModel model;
  std::vector<double> loss_history;  // mean minibatch loss per epoch
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shuffled minibatch SGD on softmax cross-entropy. Deterministic in
/// (model, data, cfg).
inline TrainResult train(NetworkModel model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  require(!data.empty(), "train: empty dataset");
  data.validate();
  model.validate();
  require(data.dim() == static_cast<std::size_t>(model.input_dim()), "train: feature dim does not match model input");
  require(data.num_classes <= model.output_dim(), "train: more classes than model outputs");

  TrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  if (model.all_frozen()) {
    for (int e = 0; e < cfg.epochs; ++e) result.loss_history.push_back(dataset_loss(model, data));
    result.model = std::move(model);
    return result;
  }

  Rng rng(cfg.seed);
  SgdOptimizer opt(model, cfg.learning_rate, cfg.momentum);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Gradients grads = Gradients::zeros_like(model);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grads.scale(0.0);
      for (std::size_t i = start; i < end; ++i) {
        epoch_loss += accumulate_gradients(model, data.features[order[i]], data.labels[order[i]], grads);
      }
      grads.scale(1.0 / static_cast<double>(end - start));
      opt.step(model, grads);
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss)) throw TrainingDiverged("train: loss became non-finite at epoch " + std::to_string(epoch));
    result.loss_history.push_back(epoch_loss);
  }
  for (const auto& l : model.layers) {
    for (double v : l.weights)
      if (!std::isfinite(v)) throw TrainingDiverged("train: non-finite weight after training");
  }
  result.model = std::move(model);
  return result;
}

}  // namespace scenefusion::nn
