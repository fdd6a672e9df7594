#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenefusion/common/error.hpp"
#include "scenefusion/common/parallel.hpp"
#include "scenefusion/dsp/mfcc.hpp"
#include "scenefusion/io/image_io.hpp"
#include "scenefusion/io/wav.hpp"
#include "scenefusion/vision/tensor.hpp"

namespace scenefusion::data {

namespace fs = std::filesystem;

/// One synchronised (image, one-second audio) pair. sample_id is
/// "<source_id>:<second_index>".
struct SampleRecord {
  std::string sample_id;
  fs::path image_path;
  fs::path audio_path;
  std::string label;
};

/// Everything before the last ':' of a sample id.
inline std::string source_id(const std::string& sample_id) {
  const auto pos = sample_id.rfind(':');
  return pos == std::string::npos ? sample_id : sample_id.substr(0, pos);
}

inline std::vector<std::string> read_class_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("class list not found: " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    require(std::find(names.begin(), names.end(), line) == names.end(), "class list: duplicate label '" + line + "'");
    names.push_back(line);
  }
  return names;
}

inline void write_class_list(const fs::path& path, const std::vector<std::string>& names) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& n : names) out << n << '\n';
}

struct Manifest {
  fs::path path;
  std::vector<SampleRecord> records;  // paths resolved against the manifest directory
  std::vector<std::string> class_names;

  int class_index(const std::string& label) const {
    const auto it = std::find(class_names.begin(), class_names.end(), label);
    require(it != class_names.end(), "manifest: label '" + label + "' is not in the class list");
    return static_cast<int>(it - class_names.begin());
  }
};

/// Parses a JSON Lines manifest (sample_id, image, audio, label; relative
/// paths). Class order comes from classes.txt beside the manifest when it
/// exists, otherwise from the sorted set of labels. Referenced files must
/// exist.
inline Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("manifest not found: " + path.string());
  Manifest m;
  m.path = path;
  const fs::path base = path.parent_path();
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    SampleRecord r;
    try {
      const auto j = nlohmann::json::parse(line);
      r.sample_id = j.at("sample_id").get<std::string>();
      r.image_path = base / j.at("image").get<std::string>();
      r.audio_path = base / j.at("audio").get<std::string>();
      r.label = j.at("label").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    require(ids.insert(r.sample_id).second, "manifest: duplicate sample_id '" + r.sample_id + "'");
    if (!fs::exists(r.image_path)) throw NotFound("sample '" + r.sample_id + "': image not found: " + r.image_path.string());
    if (!fs::exists(r.audio_path)) throw NotFound("sample '" + r.sample_id + "': audio not found: " + r.audio_path.string());
    m.records.push_back(std::move(r));
  }
  const fs::path classes = base / "classes.txt";
  if (fs::exists(classes)) {
    m.class_names = read_class_list(classes);
  } else {
    std::set<std::string> labels;
    for (const auto& r : m.records) labels.insert(r.label);
    m.class_names.assign(labels.begin(), labels.end());
  }
  for (const auto& r : m.records) (void)m.class_index(r.label);
  return m;
}

/// Writes records as JSON Lines with paths relative to the manifest's
/// directory.
inline void write_manifest(const fs::path& path, const std::vector<SampleRecord>& records) {
  std::set<std::string> ids;
  for (const auto& r : records) require(ids.insert(r.sample_id).second, "manifest: duplicate sample_id '" + r.sample_id + "'");
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  for (const auto& r : records) {
    const nlohmann::json j = {{"sample_id", r.sample_id},
                              {"image", r.image_path.is_absolute() ? fs::relative(r.image_path, fs::absolute(base)).generic_string()
                                                                   : r.image_path.generic_string()},
                              {"audio", r.audio_path.is_absolute() ? fs::relative(r.audio_path, fs::absolute(base)).generic_string()
                                                                   : r.audio_path.generic_string()},
                              {"label", r.label}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("short write: " + path.string());
}

/// Folder-per-class layout: root/<label>/<stem>.{png,jpg,jpeg} paired with
/// root/<label>/<stem>.wav. Unpaired files are skipped. The sample id is
/// "<label>/<stem>" with a trailing "_<n>" turned into ":<n>".
inline std::vector<SampleRecord> scan_class_folders(const fs::path& root) {
  if (!fs::is_directory(root)) throw NotFound("dataset directory not found: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  std::vector<SampleRecord> records;
  for (const auto& dir : class_dirs) {
    std::map<std::string, fs::path> images, audio;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") images[e.path().stem().string()] = e.path();
      if (ext == ".wav") audio[e.path().stem().string()] = e.path();
    }
    const std::string label = dir.filename().string();
    for (const auto& [stem, img] : images) {
      const auto it = audio.find(stem);
      if (it == audio.end()) continue;
      std::string id = label + "/" + stem;
      const auto us = id.rfind('_');
      if (us != std::string::npos && us + 1 < id.size() &&
          std::all_of(id.begin() + static_cast<std::ptrdiff_t>(us) + 1, id.end(), [](unsigned char c) { return std::isdigit(c); })) {
        id[us] = ':';
      }
      records.push_back({id, fs::relative(img, root), fs::relative(it->second, root), label});
    }
  }
  return records;
}

struct LoadOptions {
  int image_size = vision::kDefaultImageSize;
  int sample_rate = 16000;
  int threads = 1;
};

/// Decoded pairs in manifest order.
struct PairedDataset {
  std::vector<SampleRecord> records;
  std::vector<std::string> class_names;
  std::vector<vision::ImageTensor> images;
  std::vector<dsp::AudioClip> clips;
  std::vector<int> labels;

  std::size_t size() const { return records.size(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }

  std::vector<std::string> sample_ids() const {
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.sample_id);
    return ids;
  }
  std::vector<std::string> source_ids() const {
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(source_id(r.sample_id));
    return ids;
  }
};

/// Audio must be exactly one second at opts.sample_rate; images are
/// centre-cropped and resized to opts.image_size.
inline PairedDataset load_manifest_dataset(const fs::path& manifest_path, const LoadOptions& opts = {}) {
  Manifest m = read_manifest(manifest_path);
  PairedDataset ds;
  ds.class_names = m.class_names;
  const std::size_t n = m.records.size();
  ds.images.resize(n);
  ds.clips.resize(n);
  ds.labels.resize(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    const auto& r = m.records[i];
    dsp::AudioClip clip;
    try {
      clip = io::read_wav(r.audio_path);
    } catch (const IoError& e) {
      throw IoError("sample '" + r.sample_id + "': " + e.what());
    }
    require(clip.sample_rate == opts.sample_rate, "sample '" + r.sample_id + "': audio sample rate " +
                                                      std::to_string(clip.sample_rate) + " Hz, expected " +
                                                      std::to_string(opts.sample_rate));
    require(clip.samples.size() == static_cast<std::size_t>(opts.sample_rate),
            "sample '" + r.sample_id + "': audio has " + std::to_string(clip.samples.size()) + " samples, expected " +
                std::to_string(opts.sample_rate) + " (one second)");
    try {
      ds.images[i] = io::load_image(r.image_path, opts.image_size);
    } catch (const IoError& e) {
      throw IoError("sample '" + r.sample_id + "': " + e.what());
    }
    ds.clips[i] = std::move(clip);
    ds.labels[i] = m.class_index(r.label);
  });
  ds.records = std::move(m.records);
  return ds;
}

}  // namespace scenefusion::data
