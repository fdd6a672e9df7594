#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "scenefusion/common/dataset.hpp"
#include "scenefusion/common/error.hpp"
#include "scenefusion/common/random.hpp"

namespace scenefusion::nn {

enum class Activation { relu, softmax, identity };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
    case Activation::identity: return "identity";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "softmax") return Activation::softmax;
  if (s == "identity") return Activation::identity;
  throw InvalidArgument("unknown activation: " + s);
}

struct LayerSpec {
  int input_dim = 1;
  int output_dim = 1;
  Activation activation = Activation::identity;
  bool frozen = false;
};

/// Affine layer y = act(W x + b); W is output_dim x input_dim, row-major.
struct DenseLayer {
  LayerSpec spec;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  explicit DenseLayer(LayerSpec s)
      : spec(s),
        weights(static_cast<std::size_t>(s.input_dim) * s.output_dim, 0.0),
        bias(static_cast<std::size_t>(s.output_dim), 0.0) {
    require(s.input_dim >= 1 && s.output_dim >= 1, "DenseLayer: dims must be >= 1");
  }

  double& w(int out, int in) { return weights[static_cast<std::size_t>(out) * spec.input_dim + in]; }
  double w(int out, int in) const { return weights[static_cast<std::size_t>(out) * spec.input_dim + in]; }
};

/// Fixed per-feature affine map (x - shift) * scale applied ahead of the
/// first layer. Empty means identity. Never trained.
struct InputNorm {
  std::vector<double> shift;
  std::vector<double> scale;

  bool empty() const { return shift.empty(); }
};

class NetworkModel {
 public:
  std::vector<DenseLayer> layers;
  InputNorm input_norm;

  int input_dim() const { return layers.empty() ? 0 : layers.front().spec.input_dim; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().spec.output_dim; }

  void validate() const {
    require(!layers.empty(), "network: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& s = layers[l].spec;
      require(s.input_dim >= 1 && s.output_dim >= 1, "network: layer dims must be >= 1");
      require(layers[l].weights.size() == static_cast<std::size_t>(s.input_dim) * s.output_dim &&
                  layers[l].bias.size() == static_cast<std::size_t>(s.output_dim),
              "network: parameter shape mismatch in layer " + std::to_string(l));
      if (l > 0) {
        require(layers[l - 1].spec.output_dim == s.input_dim,
                "network: layer " + std::to_string(l) + " input_dim does not match previous output");
      }
    }
    if (!input_norm.empty()) {
      require(input_norm.shift.size() == static_cast<std::size_t>(input_dim()) &&
                  input_norm.scale.size() == input_norm.shift.size(),
              "network: input_norm size mismatch");
    }
  }

  void set_frozen(bool frozen) {
    for (auto& l : layers) l.spec.frozen = frozen;
  }

  bool all_frozen() const {
    return std::all_of(layers.begin(), layers.end(), [](const DenseLayer& l) { return l.spec.frozen; });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }
};

/// FNV-1a over the bit patterns of every parameter; equal hashes are used to
/// assert that frozen parameters were left untouched.
inline std::uint64_t parameter_hash(const NetworkModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& l : model.layers) {
    for (double v : l.weights) mix(v);
    for (double v : l.bias) mix(v);
  }
  return h;
}

/// Uniform He initialisation, U(-sqrt(6/fan_in), sqrt(6/fan_in)); zero biases.
inline void he_uniform_init(NetworkModel& model, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& l : model.layers) {
    const double limit = std::sqrt(6.0 / l.spec.input_dim);
    for (double& w : l.weights) w = rng.uniform(-limit, limit);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

/// input -> hidden (ReLU)... -> output (softmax), He-initialised.
inline NetworkModel make_mlp(int input_dim, std::span<const int> hidden, int output_dim, std::uint64_t seed) {
  NetworkModel model;
  int prev = input_dim;
  for (int width : hidden) {
    model.layers.emplace_back(LayerSpec{prev, width, Activation::relu, false});
    prev = width;
  }
  model.layers.emplace_back(LayerSpec{prev, output_dim, Activation::softmax, false});
  he_uniform_init(model, seed);
  return model;
}

/// Weights between consecutive layers, biases excluded.
inline std::int64_t count_connections(int input_dim, std::span<const int> hidden, int output_dim) {
  require(input_dim >= 1 && output_dim >= 1, "count_connections: dims must be >= 1");
  std::int64_t total = 0;
  std::int64_t prev = input_dim;
  for (int width : hidden) {
    require(width >= 1, "count_connections: hidden widths must be >= 1");
    total += prev * width;
    prev = width;
  }
  return total + prev * output_dim;
}

inline std::int64_t count_connections(const NetworkModel& model) {
  std::int64_t total = 0;
  for (const auto& l : model.layers) total += static_cast<std::int64_t>(l.spec.input_dim) * l.spec.output_dim;
  return total;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax: empty input");
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : logits) {
    require(!std::isnan(v), "softmax: NaN input");
    peak = std::max(peak, v);
  }
  require(std::isfinite(peak), "softmax: non-finite input");
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

constexpr double kProbabilityFloor = 1e-10;

/// -ln(max(p[target], floor)).
inline double cross_entropy(std::span<const double> predicted, int target_class,
                            double floor = kProbabilityFloor) {
  require(target_class >= 0 && static_cast<std::size_t>(target_class) < predicted.size(),
          "cross_entropy: target class out of range");
  const double total = std::accumulate(predicted.begin(), predicted.end(), 0.0);
  require(std::abs(total - 1.0) <= 1e-6, "cross_entropy: probabilities do not sum to 1");
  return -std::log(std::max(predicted[static_cast<std::size_t>(target_class)], floor));
}

inline double relu(double v) { return v > 0.0 ? v : 0.0; }

/// Activations of one forward pass. post[l] is the output of layer l;
/// `input` is the normalised network input.
struct ForwardPass {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;

  const std::vector<double>& output() const { return post.back(); }
};

inline std::vector<double> apply_input_norm(const NetworkModel& model, std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  if (!model.input_norm.empty()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - model.input_norm.shift[i]) * model.input_norm.scale[i];
  }
  return out;
}

inline void affine(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out) {
  const int n_out = layer.spec.output_dim, n_in = layer.spec.input_dim;
  out.resize(static_cast<std::size_t>(n_out));
  for (int o = 0; o < n_out; ++o) {
    const double* row = layer.weights.data() + static_cast<std::size_t>(o) * n_in;
    double acc = layer.bias[o];
    for (int i = 0; i < n_in; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

inline ForwardPass dense_forward(const NetworkModel& model, std::span<const double> input) {
  require(!model.layers.empty(), "dense_forward: empty model");
  require(input.size() == static_cast<std::size_t>(model.input_dim()),
          "dense_forward: input has " + std::to_string(input.size()) + " values, model expects " +
              std::to_string(model.input_dim()));
  ForwardPass pass;
  pass.input = apply_input_norm(model, input);
  pass.pre.resize(model.layers.size());
  pass.post.resize(model.layers.size());
  std::span<const double> current = pass.input;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    affine(layer, current, pass.pre[l]);
    auto& post = pass.post[l];
    switch (layer.spec.activation) {
      case Activation::relu:
        post.resize(pass.pre[l].size());
        std::transform(pass.pre[l].begin(), pass.pre[l].end(), post.begin(), relu);
        break;
      case Activation::softmax:
        post = softmax(pass.pre[l]);
        break;
      case Activation::identity:
        post = pass.pre[l];
        break;
    }
    current = post;
  }
  return pass;
}

/// Output of the last layer with a softmax there treated as identity.
inline std::vector<double> logits_of(const NetworkModel& model, const ForwardPass& pass) {
  return model.layers.back().spec.activation == Activation::softmax ? pass.pre.back() : pass.post.back();
}

/// Forward pass with the final softmax removed; this is what a branch hands
/// to the fusion head.
inline std::vector<double> predict_logits(const NetworkModel& model, std::span<const double> input) {
  return logits_of(model, dense_forward(model, input));
}

inline std::vector<double> predict_proba(const NetworkModel& model, std::span<const double> input) {
  return softmax(predict_logits(model, input));
}

inline int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline int predict_class(const NetworkModel& model, std::span<const double> input) {
  return argmax(predict_logits(model, input));
}

/// Per-parameter gradients shaped like a model's layers.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  static Gradients zeros_like(const NetworkModel& model) {
    Gradients g;
    for (const auto& l : model.layers) {
      g.weights.emplace_back(l.weights.size(), 0.0);
      g.bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
  }

  void scale(double s) {
    for (auto& w : weights) for (double& v : w) v *= s;
    for (auto& b : bias) for (double& v : b) v *= s;
  }

  bool all_zero() const {
    for (const auto& w : weights) for (double v : w) if (v != 0.0) return false;
    for (const auto& b : bias) for (double v : b) if (v != 0.0) return false;
    return true;
  }
};

/// Adds d(loss)/d(param) for one sample into `acc`, where loss is cross
/// entropy of softmax(logits). Frozen layers receive nothing but still pass
/// the error signal down. If `input_grad` is non-null it receives d(loss)/d(raw
/// input). Returns the sample loss.
inline double accumulate_gradients(const NetworkModel& model, std::span<const double> input, int target_class,
                                   Gradients& acc, std::vector<double>* input_grad = nullptr) {
  const int classes = model.output_dim();
  require(target_class >= 0 && target_class < classes, "backward: target class out of range");
  const ForwardPass pass = dense_forward(model, input);
  const auto logits = logits_of(model, pass);
  auto delta = softmax(logits);
  const double loss = -std::log(std::max(delta[static_cast<std::size_t>(target_class)], kProbabilityFloor));
  delta[static_cast<std::size_t>(target_class)] -= 1.0;

  // Lowest layer that still needs a gradient.
  std::size_t lowest = model.layers.size();
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    if (!model.layers[l].spec.frozen) {
      lowest = l;
      break;
    }
  }
  if (input_grad != nullptr) lowest = 0;

  std::vector<double> below;
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const auto& layer = model.layers[l];
    if (layer.spec.activation == Activation::relu) {
      for (std::size_t o = 0; o < delta.size(); ++o) {
        if (pass.pre[l][o] <= 0.0) delta[o] = 0.0;
      }
    }
    const std::vector<double>& in = l == 0 ? pass.input : pass.post[l - 1];
    const int n_in = layer.spec.input_dim, n_out = layer.spec.output_dim;
    if (!layer.spec.frozen) {
      auto& gw = acc.weights[l];
      auto& gb = acc.bias[l];
      for (int o = 0; o < n_out; ++o) {
        const double d = delta[o];
        gb[o] += d;
        if (d == 0.0) continue;
        double* row = gw.data() + static_cast<std::size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) row[i] += d * in[i];
      }
    }
    if (l == 0 && input_grad == nullptr) break;
    if (l <= lowest && l > 0 && input_grad == nullptr) break;
    below.assign(static_cast<std::size_t>(n_in), 0.0);
    for (int o = 0; o < n_out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = layer.weights.data() + static_cast<std::size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) below[i] += d * row[i];
    }
    delta.swap(below);
  }
  if (input_grad != nullptr) {
    *input_grad = delta;
    if (!model.input_norm.empty()) {
      for (std::size_t i = 0; i < input_grad->size(); ++i) (*input_grad)[i] *= model.input_norm.scale[i];
    }
  }
  return loss;
}

inline Gradients backward_gradients(const NetworkModel& model, std::span<const double> input, int target_class) {
  Gradients g = Gradients::zeros_like(model);
  accumulate_gradients(model, input, target_class, g);
  return g;
}

/// Mean cross-entropy of softmax(logits) over a dataset.
inline double dataset_loss(const NetworkModel& model, const Dataset& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto p = predict_proba(model, data.features[i]);
    total += -std::log(std::max(p[static_cast<std::size_t>(data.labels[i])], kProbabilityFloor));
  }
  return data.empty() ? 0.0 : total / static_cast<double>(data.size());
}

inline double accuracy(const NetworkModel& model, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += predict_class(model, data.features[i]) == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace scenefusion::nn
