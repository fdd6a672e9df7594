#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <system_error>
#include <vector>

#include "scenefusion/common/error.hpp"
#include "scenefusion/common/parallel.hpp"
#include "scenefusion/common/random.hpp"
#include "scenefusion/data/manifest.hpp"
#include "scenefusion/dsp/mfcc.hpp"
#include "scenefusion/io/image_io.hpp"
#include "scenefusion/io/wav.hpp"
#include "scenefusion/vision/tensor.hpp"

namespace scenefusion::data {

/// Paired audio/image generator with a tunable cross-modal ambiguity.
///
/// Every class k owns an audio signature (two tones) and an image signature
/// (hue + oriented stripes). A clean sample of class c uses signatures
/// (c, c). With probability `ambiguity` a sample is confusable instead and
/// takes, with equal odds, either the audio of class c+1 with its own image,
/// or its own audio with the image of class c+1 (indices mod C). At
/// ambiguity 1 each single modality is right at most half the time, but the
/// (audio, image) pair still identifies the class uniquely for C >= 3.
struct SynthConfig {
  int num_classes = 3;
  int samples_per_class = 50;
  double ambiguity = 0.0;
  std::uint64_t seed = 0;
  int seconds_per_source = 10;
  int first_source = 0;  // offset for source numbering, so disjoint sets can be generated
  double audio_noise = 0.05;
  double image_noise = 0.05;
  int sample_rate = 16000;
  int image_size = vision::kDefaultImageSize;

  void validate() const {
    require(num_classes >= 3, "synth: num_classes must be >= 3");
    require(samples_per_class >= 1, "synth: samples_per_class must be >= 1");
    require(ambiguity >= 0.0 && ambiguity <= 1.0, "synth: ambiguity must be in [0, 1]");
    require(seconds_per_source >= 1, "synth: seconds_per_source must be >= 1");
    require(first_source >= 0, "synth: first_source must be >= 0");
    require(audio_noise >= 0.0 && image_noise >= 0.0, "synth: noise levels must be >= 0");
    require(sample_rate >= 1 && image_size >= 1, "synth: sample_rate and image_size must be >= 1");
  }
};

struct SyntheticSample {
  std::string sample_id;
  std::string label;
  int class_index = 0;
  int audio_signature = 0;
  int image_signature = 0;
  dsp::AudioClip audio;
  vision::ImageTensor image;
};

inline std::string synth_class_name(int k) { return "class" + std::to_string(k); }

inline std::string synth_sample_id(const SynthConfig& cfg, int cls, int index) {
  const int source = cfg.first_source + index / cfg.seconds_per_source;
  const int second = index % cfg.seconds_per_source;
  return synth_class_name(cls) + "_src" + std::to_string(source) + ":" + std::to_string(second);
}

inline dsp::AudioClip synth_audio(int signature, const SynthConfig& cfg, Rng& rng) {
  const double f1 = 300.0 + 310.0 * signature;
  const double f2 = 2000.0 + 570.0 * signature;
  const double a1 = 0.25 * rng.uniform(0.8, 1.2);
  const double a2 = 0.20 * rng.uniform(0.8, 1.2);
  const double p1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double p2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  dsp::AudioClip clip;
  clip.sample_rate = cfg.sample_rate;
  clip.samples.resize(static_cast<std::size_t>(cfg.sample_rate));
  for (std::size_t n = 0; n < clip.samples.size(); ++n) {
    const double t = static_cast<double>(n) / cfg.sample_rate;
    const double tone = a1 * std::sin(2.0 * std::numbers::pi * f1 * t + p1) + a2 * std::sin(2.0 * std::numbers::pi * f2 * t + p2);
    clip.samples[n] = std::clamp(tone + cfg.audio_noise * rng.normal(), -1.0, 1.0);
  }
  return clip;
}

inline vision::ImageTensor synth_image(int signature, const SynthConfig& cfg, Rng& rng) {
  // Hue around the colour wheel, stripes rotated and tightened per class.
  const double hue = static_cast<double>(signature) / cfg.num_classes;
  auto channel = [&](double offset) {
    const double h = std::fmod(hue + offset, 1.0) * 6.0;
    const double x = std::clamp(std::abs(std::fmod(h, 6.0) - 3.0) - 1.0, 0.0, 1.0);
    return 0.25 + 0.55 * x;
  };
  const double rgb[3] = {channel(0.0), channel(2.0 / 3.0), channel(1.0 / 3.0)};
  const double angle = std::numbers::pi * signature / cfg.num_classes;
  const double cycles = 3.0 + 2.0 * signature;
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double dx = std::cos(angle), dy = std::sin(angle);
  vision::ImageTensor img(cfg.image_size, cfg.image_size, 3);
  for (int y = 0; y < cfg.image_size; ++y) {
    for (int x = 0; x < cfg.image_size; ++x) {
      const double u = (x * dx + y * dy) / cfg.image_size;
      const double stripe = 0.8 + 0.2 * std::sin(2.0 * std::numbers::pi * cycles * u + phase);
      for (int c = 0; c < 3; ++c) img(y, x, c) = std::clamp(rgb[c] * stripe + cfg.image_noise * rng.normal(), 0.0, 1.0);
    }
  }
  return img;
}

/// Deterministic in (cfg, cls, index) alone.
inline SyntheticSample synthesize_sample(const SynthConfig& cfg, int cls, int index) {
  Rng rng(derive_seed(derive_seed(cfg.seed, static_cast<std::uint64_t>(cls)), static_cast<std::uint64_t>(index)));
  SyntheticSample s;
  s.class_index = cls;
  s.label = synth_class_name(cls);
  s.sample_id = synth_sample_id(cfg, cls, index);
  s.audio_signature = cls;
  s.image_signature = cls;
  if (rng.uniform() < cfg.ambiguity) {
    const int neighbour = (cls + 1) % cfg.num_classes;
    if (rng.uniform() < 0.5) {
      s.audio_signature = neighbour;
    } else {
      s.image_signature = neighbour;
    }
  }
  s.audio = synth_audio(s.audio_signature, cfg, rng);
  s.image = synth_image(s.image_signature, cfg, rng);
  return s;
}

inline std::string file_stem(const std::string& sample_id) {
  std::string stem = sample_id;
  for (char& ch : stem)
    if (ch == ':' || ch == '/') ch = '_';
  return stem;
}

/// Writes audio/<id>.wav (PCM16 mono), images/<id>.png, classes.txt and
/// manifest.jsonl under out_dir. Returns the manifest path.
inline std::filesystem::path generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                                                int threads = 1) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "audio", ec);
  if (!ec) std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("synth: cannot create output directory " + out_dir.string() + ": " + ec.message());

  const std::size_t total = static_cast<std::size_t>(cfg.num_classes) * cfg.samples_per_class;
  std::vector<SampleRecord> records(total);
  parallel_for(total, threads, [&](std::size_t i) {
    const int cls = static_cast<int>(i / static_cast<std::size_t>(cfg.samples_per_class));
    const int idx = static_cast<int>(i % static_cast<std::size_t>(cfg.samples_per_class));
    const auto s = synthesize_sample(cfg, cls, idx);
    const std::string stem = file_stem(s.sample_id);
    const std::filesystem::path wav = std::filesystem::path("audio") / (stem + ".wav");
    const std::filesystem::path png = std::filesystem::path("images") / (stem + ".png");
    io::write_wav_pcm16(out_dir / wav, s.audio);
    io::write_png(out_dir / png, io::from_tensor(s.image));
    records[i] = {s.sample_id, png, wav, s.label};
  });
  std::vector<std::string> names;
  for (int k = 0; k < cfg.num_classes; ++k) names.push_back(synth_class_name(k));
  write_class_list(out_dir / "classes.txt", names);
  const auto manifest = out_dir / "manifest.jsonl";
  write_manifest(manifest, records);
  return manifest;
}

}  // namespace scenefusion::data
