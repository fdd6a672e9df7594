#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "scenefusion/data/features.hpp"
#include "scenefusion/data/manifest.hpp"
#include "scenefusion/data/synthetic.hpp"
#include "scenefusion/fusion/experiment.hpp"
#include "scenefusion/io/image_io.hpp"
#include "scenefusion/io/wav.hpp"

namespace sf = scenefusion;
namespace data = scenefusion::data;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("scenefusion_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write_pair(const std::string& stem, std::size_t samples) {
    sf::dsp::AudioClip clip{std::vector<double>(samples, 0.1), 16000};
    sf::io::write_wav_pcm16(dir_ / (stem + ".wav"), clip);
    sf::io::write_png(dir_ / (stem + ".png"), sf::io::RgbImage{4, 4, std::vector<std::uint8_t>(48, 200)});
  }

  static std::string line(const std::string& id, const std::string& stem, const std::string& label) {
    return R"({"sample_id":")" + id + R"(","image":")" + stem + R"(.png","audio":")" + stem + R"(.wav","label":")" +
           label + "\"}\n";
  }

  void write_manifest(const std::string& body) { std::ofstream(dir_ / "manifest.jsonl") << body; }

  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

using Manifest = TempDir;

TEST_F(Manifest, EmptyManifestGivesEmptyDataset) {
  write_manifest("");
  const auto ds = data::load_manifest_dataset(dir_ / "manifest.jsonl");
  EXPECT_EQ(ds.size(), 0u);
}

TEST_F(Manifest, WellFormedLinesLoadInOrder) {
  std::string body;
  for (int i = 0; i < 4; ++i) {
    write_pair("s" + std::to_string(i), 16000);
    body += line("vid" + std::to_string(i / 2) + ":" + std::to_string(i), "s" + std::to_string(i), i % 2 ? "street" : "beach");
  }
  write_manifest(body);
  const auto ds = data::load_manifest_dataset(dir_ / "manifest.jsonl");
  ASSERT_EQ(ds.size(), 4u);
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"beach", "street"}));
  EXPECT_EQ(ds.labels, (std::vector<int>{0, 1, 0, 1}));
  EXPECT_EQ(ds.sample_ids()[3], "vid1:3");
  EXPECT_EQ(ds.source_ids()[3], "vid1");
  EXPECT_EQ(ds.images[0].height, 128);
  EXPECT_EQ(ds.images[0].channels, 3);
  EXPECT_NEAR(ds.images[0](5, 5, 1), 200.0 / 255.0, 1e-12);
  EXPECT_EQ(ds.clips[2].samples.size(), 16000u);
}

TEST_F(Manifest, ShortAudioErrorNamesSample) {
  write_pair("ok", 16000);
  write_pair("short", 15999);
  write_manifest(line("a:0", "ok", "x") + line("bad_clip:7", "short", "x"));
  try {
    data::load_manifest_dataset(dir_ / "manifest.jsonl");
    FAIL() << "expected an error";
  } catch (const sf::InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("bad_clip:7"), std::string::npos) << e.what();
  }
}

TEST_F(Manifest, MissingFileErrorNamesSample) {
  write_pair("ok", 16000);
  write_manifest(line("a:0", "ok", "x") + line("ghost:1", "nothing_here", "x"));
  try {
    data::read_manifest(dir_ / "manifest.jsonl");
    FAIL() << "expected an error";
  } catch (const sf::NotFound& e) {
    EXPECT_NE(std::string(e.what()).find("ghost:1"), std::string::npos) << e.what();
  }
}

TEST_F(Manifest, DuplicateIdRejected) {
  write_pair("ok", 16000);
  write_manifest(line("a:0", "ok", "x") + line("a:0", "ok", "x"));
  EXPECT_THROW(data::read_manifest(dir_ / "manifest.jsonl"), sf::InvalidArgument);
}

TEST_F(Manifest, ClassListFixesOrderAndRejectsUnknownLabels) {
  write_pair("ok", 16000);
  write_manifest(line("a:0", "ok", "beach"));
  data::write_class_list(dir_ / "classes.txt", {"street", "beach"});
  EXPECT_EQ(data::load_manifest_dataset(dir_ / "manifest.jsonl").labels, std::vector<int>{1});
  data::write_class_list(dir_ / "classes.txt", {"street"});
  EXPECT_THROW(data::read_manifest(dir_ / "manifest.jsonl"), sf::InvalidArgument);
}

TEST_F(Manifest, ClassFolderScan) {
  for (const std::string label : {"forest", "city"}) {
    fs::create_directories(dir_ / label);
    for (int i = 0; i < 2; ++i) {
      const auto stem = (dir_ / label / ("clip_" + std::to_string(i))).string();
      sf::io::write_wav_pcm16(stem + ".wav", {std::vector<double>(16000, 0.0), 16000});
      sf::io::write_png(stem + ".png", sf::io::RgbImage{2, 2, std::vector<std::uint8_t>(12, 0)});
    }
  }
  const auto records = data::scan_class_folders(dir_);
  ASSERT_EQ(records.size(), 4u);
  EXPECT_EQ(records[0].label, "city");
  data::write_manifest(dir_ / "manifest.jsonl", records);
  EXPECT_EQ(data::load_manifest_dataset(dir_ / "manifest.jsonl").size(), 4u);
}

using Synthetic = TempDir;

TEST_F(Synthetic, CountsAndRoundTrip) {
  data::SynthConfig cfg;
  cfg.samples_per_class = 50;
  cfg.ambiguity = 0.5;
  const auto manifest = data::generate_synthetic(cfg, dir_);
  std::size_t wavs = 0, pngs = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "audio")) wavs += e.path().extension() == ".wav";
  for (const auto& e : fs::directory_iterator(dir_ / "images")) pngs += e.path().extension() == ".png";
  EXPECT_EQ(wavs, 150u);
  EXPECT_EQ(pngs, 150u);
  const auto ds = data::load_manifest_dataset(manifest);
  ASSERT_EQ(ds.size(), 150u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(ds.labels[i], static_cast<int>(i / 50));
    EXPECT_EQ(ds.records[i].label, data::synth_class_name(ds.labels[i]));
    EXPECT_EQ(ds.records[i].image_path.stem(), ds.records[i].audio_path.stem());
    EXPECT_EQ(ds.records[i].audio_path.stem().string(), data::file_stem(ds.records[i].sample_id));
  }
}

TEST_F(Synthetic, ByteIdenticalAcrossRunsAndThreadCounts) {
  data::SynthConfig cfg;
  cfg.samples_per_class = 4;
  cfg.ambiguity = 1.0;
  cfg.seed = 9;
  data::generate_synthetic(cfg, dir_ / "a", 1);
  data::generate_synthetic(cfg, dir_ / "b", 3);
  EXPECT_EQ(slurp(dir_ / "a" / "manifest.jsonl"), slurp(dir_ / "b" / "manifest.jsonl"));
  EXPECT_EQ(slurp(dir_ / "a" / "classes.txt"), slurp(dir_ / "b" / "classes.txt"));
  for (const auto& e : fs::recursive_directory_iterator(dir_ / "a")) {
    if (!e.is_regular_file()) continue;
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / fs::relative(e.path(), dir_ / "a"))) << e.path();
  }
}

TEST_F(Synthetic, UnwritableDirectoryIsIoError) {
  std::ofstream(dir_ / "blocker") << "x";
  EXPECT_THROW(data::generate_synthetic({}, dir_ / "blocker" / "out"), sf::IoError);
}

TEST(SyntheticConstruction, AmbiguityMapsToNeighbourSignature) {
  data::SynthConfig cfg;
  cfg.ambiguity = 1.0;
  cfg.image_size = 8;
  int audio_swaps = 0;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 40; ++i) {
      const auto s = data::synthesize_sample(cfg, c, i);
      const bool audio_swapped = s.audio_signature != c;
      EXPECT_NE(audio_swapped, s.image_signature != c);
      EXPECT_EQ(audio_swapped ? s.audio_signature : s.image_signature, (c + 1) % 3);
      audio_swaps += audio_swapped;
    }
  }
  EXPECT_GT(audio_swaps, 40);
  EXPECT_LT(audio_swaps, 80);
  cfg.ambiguity = 0.0;
  const auto clean = data::synthesize_sample(cfg, 2, 5);
  EXPECT_EQ(clean.audio_signature, 2);
  EXPECT_EQ(clean.image_signature, 2);
  EXPECT_EQ(clean.sample_id, "class2_src0:5");
  data::SynthConfig shifted = cfg;
  shifted.first_source = 7;
  EXPECT_EQ(data::synthesize_sample(shifted, 2, 15).sample_id, "class2_src8:5");
  EXPECT_THROW(data::SynthConfig{2}.validate(), sf::InvalidArgument);
}

namespace {

struct ModalityScores {
  double audio, image, fused;
};

// Default-size synthetic set, default MFCC, default builtin backbone
// (random, frozen), 3-fold.
ModalityScores measure(double ambiguity, std::uint64_t seed) {
  data::SynthConfig cfg;
  cfg.ambiguity = ambiguity;
  cfg.seed = seed;
  data::PairedDataset ds;
  for (int k = 0; k < cfg.num_classes; ++k) ds.class_names.push_back(data::synth_class_name(k));
  for (int c = 0; c < cfg.num_classes; ++c) {
    for (int i = 0; i < cfg.samples_per_class; ++i) {
      auto s = data::synthesize_sample(cfg, c, i);
      ds.records.push_back({s.sample_id, {}, {}, s.label});
      ds.clips.push_back(std::move(s.audio));
      ds.images.push_back(std::move(s.image));
      ds.labels.push_back(c);
    }
  }
  const auto audio = data::audio_feature_dataset(ds);
  const auto image = data::image_feature_dataset(sf::vision::Backbone::builtin({}, seed), ds);
  sf::fusion::ComparisonConfig cc;
  cc.audio_train.epochs = cc.image_train.epochs = cc.fusion_train.epochs = 30;
  cc.baselines = false;
  const auto r = sf::fusion::compare_modalities(audio, image, ds.sample_ids(), sf::eval::kfold_split(ds.size(), 3, seed), cc);
  return {r.audio.mean_accuracy, r.image.mean_accuracy, r.fused.mean_accuracy};
}

}  // namespace

TEST(SyntheticSeparability, NoAmbiguityEachModalitySuffices) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto s = measure(0.0, seed);
    EXPECT_GE(s.audio, 0.95) << "seed " << seed;
    EXPECT_GE(s.image, 0.95) << "seed " << seed;
  }
}

TEST(SyntheticSeparability, FullAmbiguityNeedsBothModalities) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto s = measure(1.0, seed);
    EXPECT_LE(s.audio, 0.80) << "seed " << seed;
    EXPECT_LE(s.image, 0.80) << "seed " << seed;
    EXPECT_GE(s.fused, 0.90) << "seed " << seed;
  }
}
