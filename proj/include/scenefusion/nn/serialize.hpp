#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "scenefusion/common/bits.hpp"
#include "scenefusion/common/error.hpp"
#include "scenefusion/nn/network.hpp"

namespace scenefusion::nn {

constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const NetworkModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers) {
    layers.push_back({{"input_dim", l.spec.input_dim},
                      {"output_dim", l.spec.output_dim},
                      {"activation", to_string(l.spec.activation)},
                      {"frozen", l.spec.frozen},
                      {"weights", encode_doubles_hex(l.weights)},
                      {"bias", encode_doubles_hex(l.bias)}});
  }
  nlohmann::json doc = {{"format", "scenefusion.network"}, {"version", kModelFormatVersion}, {"layers", layers}};
  if (!model.input_norm.empty()) {
    doc["input_norm"] = {{"shift", encode_doubles_hex(model.input_norm.shift)},
                         {"scale", encode_doubles_hex(model.input_norm.scale)}};
  }
  return doc;
}

inline NetworkModel network_from_json(const nlohmann::json& doc) {
  try {
    require(doc.at("format").get<std::string>() == "scenefusion.network", "model: unexpected format tag");
    require(doc.at("version").get<int>() == kModelFormatVersion, "model: unsupported format version");
    NetworkModel model;
    for (const auto& jl : doc.at("layers")) {
      DenseLayer layer(LayerSpec{jl.at("input_dim").get<int>(), jl.at("output_dim").get<int>(),
                                 activation_from_string(jl.at("activation").get<std::string>()),
                                 jl.at("frozen").get<bool>()});
      layer.weights = decode_doubles_hex(jl.at("weights").get<std::string>());
      layer.bias = decode_doubles_hex(jl.at("bias").get<std::string>());
      model.layers.push_back(std::move(layer));
    }
    if (doc.contains("input_norm")) {
      model.input_norm.shift = decode_doubles_hex(doc["input_norm"].at("shift").get<std::string>());
      model.input_norm.scale = decode_doubles_hex(doc["input_norm"].at("scale").get<std::string>());
    }
    model.validate();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("model: malformed document: ") + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("short write: " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("file not found: " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void save_network(const std::filesystem::path& path, const NetworkModel& model) {
  write_json_file(path, to_json(model));
}

inline NetworkModel load_network(const std::filesystem::path& path) { return network_from_json(read_json_file(path)); }

}  // namespace scenefusion::nn
