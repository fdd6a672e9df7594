#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenefusion/common/bits.hpp"
#include "scenefusion/common/dataset.hpp"
#include "scenefusion/common/error.hpp"
#include "scenefusion/common/parallel.hpp"
#include "scenefusion/common/random.hpp"
#include "scenefusion/nn/head.hpp"
#include "scenefusion/nn/network.hpp"
#include "scenefusion/nn/train.hpp"
#include "scenefusion/vision/conv.hpp"
#include "scenefusion/vision/tensor.hpp"

namespace scenefusion::vision {

struct ConvBlock {
  int filters = 8;
  int kernel_size = 3;
  int pool = 2;
};

enum class BackboneKind { builtin_cnn, imported_features };

/// Where frozen image features come from: a small builtin conv stack, or a
/// table of features computed elsewhere (e.g. a pretrained VGG16).
struct BackboneSpec {
  BackboneKind kind = BackboneKind::builtin_cnn;
  std::vector<ConvBlock> conv_blocks = {{8, 3, 2}, {16, 3, 2}, {32, 3, 2}};
  int input_size = kDefaultImageSize;
  int input_channels = 3;
  int feature_dim = 0;  // imported kind only

  // Builtin convs use "same" zero padding (kernel/2) so every pool divides
  // its input evenly.
  static int padding_for(const ConvBlock& b) { return b.kernel_size / 2; }

  /// Flattened feature length, derived from the block list for builtin.
  int output_dim() const {
    if (kind == BackboneKind::imported_features) return feature_dim;
    int side = input_size, channels = input_channels;
    for (const auto& b : conv_blocks) {
      side = conv_output_dim(side, b.kernel_size, 1, padding_for(b));
      require(b.pool >= 1 && side % b.pool == 0, "backbone: pool does not divide feature map");
      side /= b.pool;
      channels = b.filters;
    }
    return side * side * channels;
  }

  void validate() const {
    if (kind == BackboneKind::imported_features) {
      require(feature_dim >= 1, "backbone: imported feature_dim must be >= 1");
      return;
    }
    require(!conv_blocks.empty(), "backbone: builtin spec needs at least one conv block");
    for (const auto& b : conv_blocks) {
      require(b.filters >= 1 && b.kernel_size >= 1 && b.pool >= 1, "backbone: conv block values must be >= 1");
      require(b.kernel_size % 2 == 1, "backbone: builtin kernels must have odd size");
    }
    require(output_dim() >= 1, "backbone: empty feature map");
  }
};

/// Intermediate tensors of one builtin forward pass, kept for backprop.
struct BackboneTrace {
  std::vector<Tensor3> block_inputs;
  std::vector<Tensor3> conv_out;  // pre-ReLU
  std::vector<Tensor3> activated;
  Tensor3 output;
};

class Backbone {
 public:
  Backbone() = default;

  /// Builtin stack with He-uniform kernels.
  static Backbone builtin(BackboneSpec spec, std::uint64_t seed) {
    spec.kind = BackboneKind::builtin_cnn;
    spec.validate();
    Backbone b;
    b.spec_ = spec;
    Rng rng(seed);
    int channels = spec.input_channels;
    for (const auto& block : spec.conv_blocks) {
      ConvKernels k(block.filters, block.kernel_size, channels);
      const double limit = std::sqrt(6.0 / (block.kernel_size * block.kernel_size * channels));
      for (double& w : k.weights) w = rng.uniform(-limit, limit);
      b.convs_.push_back(std::move(k));
      channels = block.filters;
    }
    return b;
  }

  static Backbone imported(std::map<std::string, std::vector<double>> table, std::string source = {}) {
    require(!table.empty(), "backbone: imported feature table is empty");
    Backbone b;
    b.spec_.kind = BackboneKind::imported_features;
    b.spec_.conv_blocks.clear();
    b.spec_.feature_dim = static_cast<int>(table.begin()->second.size());
    for (const auto& [id, row] : table) {
      require(row.size() == static_cast<std::size_t>(b.spec_.feature_dim),
              "backbone: imported feature row for '" + id + "' has the wrong length");
    }
    b.spec_.validate();
    b.table_ = std::move(table);
    b.source_ = std::move(source);
    return b;
  }

  const BackboneSpec& spec() const { return spec_; }
  const std::vector<ConvKernels>& convs() const { return convs_; }
  std::vector<ConvKernels>& mutable_convs() { return convs_; }
  const std::string& imported_source() const { return source_; }
  int feature_dim() const { return spec_.output_dim(); }

  /// Frozen feature vector for one sample. Builtin uses the image; imported
  /// looks the sample id up.
  std::vector<double> features(const ImageTensor& image, const std::string& sample_id = {}) const {
    if (spec_.kind == BackboneKind::imported_features) {
      const auto it = table_.find(sample_id);
      if (it == table_.end()) throw NotFound("backbone: no imported features for sample '" + sample_id + "'");
      return it->second;
    }
    return trace(image).output.data;
  }

  BackboneTrace trace(const ImageTensor& image) const {
    require(spec_.kind == BackboneKind::builtin_cnn, "backbone: trace requires the builtin kind");
    require(image.height == spec_.input_size && image.width == spec_.input_size &&
                image.channels == spec_.input_channels,
            "backbone: image is " + std::to_string(image.height) + "x" + std::to_string(image.width) + "x" +
                std::to_string(image.channels) + ", expected " + std::to_string(spec_.input_size) + "x" +
                std::to_string(spec_.input_size) + "x" + std::to_string(spec_.input_channels));
    BackboneTrace t;
    Tensor3 current = image;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      const auto& block = spec_.conv_blocks[i];
      t.block_inputs.push_back(current);
      t.conv_out.push_back(conv2d(current, convs_[i], 1, BackboneSpec::padding_for(block)));
      t.activated.push_back(relu(t.conv_out.back()));
      current = maxpool2d(t.activated.back(), block.pool);
    }
    t.output = std::move(current);
    return t;
  }

  /// Accumulates d(loss)/d(kernel, bias) given d(loss)/d(flattened output).
  void backward(const BackboneTrace& t, std::span<const double> grad_features, std::vector<ConvKernels>& acc) const {
    require(grad_features.size() == t.output.size(), "backbone: gradient size mismatch");
    Tensor3 grad = t.output;
    std::copy(grad_features.begin(), grad_features.end(), grad.data.begin());
    for (std::size_t i = convs_.size(); i-- > 0;) {
      const auto& block = spec_.conv_blocks[i];
      Tensor3 g = maxpool2d_backward(t.activated[i], block.pool, grad);
      for (std::size_t j = 0; j < g.data.size(); ++j)
        if (t.conv_out[i].data[j] <= 0.0) g.data[j] = 0.0;
      ConvGrad cg = conv2d_backward(t.block_inputs[i], convs_[i], g, 1, BackboneSpec::padding_for(block));
      for (std::size_t j = 0; j < cg.weights.size(); ++j) acc[i].weights[j] += cg.weights[j];
      for (std::size_t j = 0; j < cg.bias.size(); ++j) acc[i].bias[j] += cg.bias[j];
      grad = std::move(cg.input);
    }
  }

  std::vector<ConvKernels> zero_gradients() const {
    std::vector<ConvKernels> z;
    for (const auto& k : convs_) z.emplace_back(k.out_channels, k.size, k.in_channels);
    return z;
  }

  std::uint64_t parameter_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& k : convs_) {
      for (const auto* v : {&k.weights, &k.bias}) {
        for (double x : *v) {
          std::uint64_t bits;
          std::memcpy(&bits, &x, sizeof bits);
          h = mix_seed(h ^ bits);
        }
      }
    }
    return h;
  }

  nlohmann::json to_json() const {
    nlohmann::json doc = {{"format", "scenefusion.backbone"}, {"version", 1}};
    if (spec_.kind == BackboneKind::imported_features) {
      doc["kind"] = "imported_features";
      doc["feature_dim"] = spec_.feature_dim;
      doc["source"] = source_;
      return doc;
    }
    doc["kind"] = "builtin_cnn";
    doc["input_size"] = spec_.input_size;
    doc["input_channels"] = spec_.input_channels;
    nlohmann::json blocks = nlohmann::json::array();
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      const auto& b = spec_.conv_blocks[i];
      blocks.push_back({{"filters", b.filters},
                        {"kernel_size", b.kernel_size},
                        {"pool", b.pool},
                        {"weights", encode_doubles_hex(convs_[i].weights)},
                        {"bias", encode_doubles_hex(convs_[i].bias)}});
    }
    doc["blocks"] = blocks;
    return doc;
  }

  static Backbone from_json(const nlohmann::json& doc);

 private:
  BackboneSpec spec_;
  std::vector<ConvKernels> convs_;
  std::map<std::string, std::vector<double>> table_;
  std::string source_;
};

/// CSV rows of sample_id,f1..fD; a header row whose first cell is
/// "sample_id" is skipped.
inline std::map<std::string, std::vector<double>> read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("feature file not found: " + path.string());
  std::map<std::string, std::vector<double>> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell, id;
    std::getline(ss, id, ',');
    if (line_no == 1 && id == "sample_id") continue;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    require(!row.empty(), path.string() + ":" + std::to_string(line_no) + ": no feature values");
    require(table.emplace(id, std::move(row)).second,
            path.string() + ": duplicate sample_id '" + id + "'");
  }
  return table;
}

inline Backbone Backbone::from_json(const nlohmann::json& doc) {
  try {
    require(doc.at("format").get<std::string>() == "scenefusion.backbone", "backbone: unexpected format tag");
    if (doc.at("kind").get<std::string>() == "imported_features") {
      const std::string source = doc.at("source").get<std::string>();
      auto b = imported(read_feature_csv(source), source);
      require(b.feature_dim() == doc.at("feature_dim").get<int>(), "backbone: imported feature_dim mismatch");
      return b;
    }
    BackboneSpec spec;
    spec.input_size = doc.at("input_size").get<int>();
    spec.input_channels = doc.at("input_channels").get<int>();
    spec.conv_blocks.clear();
    for (const auto& jb : doc.at("blocks")) {
      spec.conv_blocks.push_back({jb.at("filters").get<int>(), jb.at("kernel_size").get<int>(), jb.at("pool").get<int>()});
    }
    Backbone b = builtin(spec, 0);
    std::size_t i = 0;
    for (const auto& jb : doc.at("blocks")) {
      auto w = decode_doubles_hex(jb.at("weights").get<std::string>());
      auto bias = decode_doubles_hex(jb.at("bias").get<std::string>());
      require(w.size() == b.convs_[i].weights.size() && bias.size() == b.convs_[i].bias.size(),
              "backbone: parameter size mismatch");
      b.convs_[i].weights = std::move(w);
      b.convs_[i].bias = std::move(bias);
      ++i;
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("backbone: malformed document: ") + e.what());
  }
}

/// Loss and gradients of softmax cross-entropy for backbone + dense head on
/// one image. Gradients are accumulated into conv_acc / head_acc.
inline double backbone_head_gradients(const Backbone& backbone, const nn::NetworkModel& head, const ImageTensor& image,
                                      int label, std::vector<ConvKernels>& conv_acc, nn::Gradients& head_acc) {
  const BackboneTrace t = backbone.trace(image);
  std::vector<double> grad_features;
  const double loss = nn::accumulate_gradients(head, t.output.data, label, head_acc, &grad_features);
  backbone.backward(t, grad_features, conv_acc);
  return loss;
}

/// Trains the builtin conv stack jointly with a throwaway linear softmax
/// head, then returns the stack for use as a frozen feature extractor.
/// Returns the per-epoch mean loss.
inline std::vector<double> pretrain_backbone(Backbone& backbone, std::span<const ImageTensor> images,
                                             std::span<const int> labels, int num_classes,
                                             const nn::TrainConfig& cfg) {
  cfg.validate();
  require(backbone.spec().kind == BackboneKind::builtin_cnn, "pretrain_backbone: builtin backbone required");
  require(!images.empty() && images.size() == labels.size(), "pretrain_backbone: empty or mismatched data");
  const int dim = backbone.feature_dim();
  nn::NetworkModel head = nn::make_mlp(dim, {}, num_classes, derive_seed(cfg.seed, 0x4eadULL));
  nn::SgdOptimizer head_opt(head, cfg.learning_rate, cfg.momentum);
  auto conv_velocity = backbone.zero_gradients();
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      auto conv_grad = backbone.zero_gradients();
      auto head_grad = nn::Gradients::zeros_like(head);
      for (std::size_t i = start; i < end; ++i) {
        epoch_loss += backbone_head_gradients(backbone, head, images[order[i]], labels[order[i]], conv_grad, head_grad);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      head_grad.scale(inv);
      head_opt.step(head, head_grad);
      auto& convs = backbone.mutable_convs();
      for (std::size_t c = 0; c < convs.size(); ++c) {
        auto step = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& v) {
          for (std::size_t j = 0; j < p.size(); ++j) {
            v[j] = g[j] * inv + cfg.momentum * v[j];
            p[j] -= cfg.learning_rate * v[j];
          }
        };
        step(convs[c].weights, conv_grad[c].weights, conv_velocity[c].weights);
        step(convs[c].bias, conv_grad[c].bias, conv_velocity[c].bias);
      }
    }
    epoch_loss /= static_cast<double>(images.size());
    if (!std::isfinite(epoch_loss)) throw nn::TrainingDiverged("pretrain_backbone: loss became non-finite");
    history.push_back(epoch_loss);
  }
  return history;
}

/// Feature rows for a batch of images, in input order.
inline std::vector<std::vector<double>> extract_features(const Backbone& backbone, std::span<const ImageTensor> images,
                                                         std::span<const std::string> sample_ids, int threads = 1) {
  require(sample_ids.empty() || sample_ids.size() == images.size(), "extract_features: id count mismatch");
  const std::size_t n = backbone.spec().kind == BackboneKind::imported_features ? sample_ids.size() : images.size();
  std::vector<std::vector<double>> rows(n);
  parallel_for(n, threads, [&](std::size_t i) {
    static const ImageTensor kNone;
    rows[i] = backbone.features(i < images.size() ? images[i] : kNone, sample_ids.empty() ? std::string{} : sample_ids[i]);
  });
  return rows;
}

/// Interpretation-width sweep for the image branch over frozen backbone
/// features.
inline nn::SweepResult head_sweep(const Dataset& backbone_features, std::span<const int> widths,
                                  const nn::SweepConfig& cfg) {
  require(!backbone_features.empty(), "head_sweep: empty dataset");
  return nn::sweep_head_widths(backbone_features, widths, cfg);
}

}  // namespace scenefusion::vision
