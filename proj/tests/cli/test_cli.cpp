// Runs the scenefusion binary end to end in scratch directories.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#ifndef SCENEFUSION_CLI
#error "SCENEFUSION_CLI must name the CLI binary"
#endif

namespace {

namespace fs = std::filesystem;

std::string quote(const std::string& s) { return "'" + s + "'"; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = read_file(e.path());
  return files;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("scenefusion_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Exit status of the CLI run inside dir_; output goes to out.log.
  int run(const std::string& args) {
    const std::string cmd = "cd " + quote(dir_.string()) + " && " + quote(SCENEFUSION_CLI) + " " + args + " > out.log 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string log() const { return read_file(dir_ / "out.log"); }

  // Tiny ambiguous dataset plus trained branch and fusion models.
  void train_pipeline() {
    ASSERT_EQ(run("synth --per-class 12 --ambiguity 1 --seed 3 --out data"), 0) << log();
    ASSERT_EQ(run("train-audio --manifest data/manifest.jsonl --genome 8 --epochs 5 --folds 3 --out audio"), 0) << log();
    ASSERT_EQ(run("train-image --manifest data/manifest.jsonl --image-widths 4 --epochs 5 --folds 3 --out image"), 0)
        << log();
    ASSERT_EQ(run("train-fusion --manifest data/manifest.jsonl --audio-model audio/audio_model.json "
                  "--image-model image/image_model.json --backbone-file image/backbone.json --fusion-widths 4,8 "
                  "--epochs 5 --folds 3 --out fusion"),
              0)
        << log();
  }

  fs::path dir_;
};

TEST_F(Cli, NoArgumentsPrintsUsage) {
  EXPECT_EQ(run(""), 1);
  EXPECT_NE(log().find("Usage"), std::string::npos);
}

TEST_F(Cli, UnknownSubcommandIsUsageError) {
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("synth --no-such-flag 3"), 1);
  EXPECT_EQ(run("synth --ambiguity 2"), 1);
}

TEST_F(Cli, MissingRequiredFlagIsUsageError) {
  EXPECT_EQ(run("features"), 1);
  EXPECT_NE(log().find("--manifest"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "scenefusion-out"));
}

TEST_F(Cli, MissingInputIsDataError) {
  EXPECT_EQ(run("features --manifest nowhere/manifest.jsonl --out f"), 2);
  EXPECT_NE(log().find("nowhere"), std::string::npos);
}

TEST_F(Cli, SynthThenFeaturesGives150By105) {
  ASSERT_EQ(run("synth --classes 3 --per-class 50 --out d/"), 0) << log();
  ASSERT_EQ(run("features --manifest d/manifest.jsonl"), 0) << log();
  std::ifstream in(dir_ / "scenefusion-out" / "audio_features.csv");
  std::string line;
  std::size_t rows = 0;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, 105);
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, 105);
    ++rows;
  }
  EXPECT_EQ(rows, 150u);
  EXPECT_TRUE(fs::exists(dir_ / "scenefusion-out" / "run_config.txt"));
}

TEST_F(Cli, ConfigFileSitsBetweenDefaultsAndFlags) {
  ASSERT_EQ(run("synth --per-class 4 --out data"), 0) << log();
  std::ofstream(dir_ / "my.cfg") << "# shared settings\nepochs = 7\nfolds = 3  # inline comment\ngenome = 6-4\n";
  ASSERT_EQ(run("--config my.cfg train-audio --manifest data/manifest.jsonl --epochs 2 --out a"), 0) << log();
  const std::string resolved = read_file(dir_ / "a" / "run_config.txt");
  EXPECT_NE(resolved.find("\nepochs = 2\n"), std::string::npos);
  EXPECT_NE(resolved.find("\nfolds = 3\n"), std::string::npos);
  EXPECT_NE(resolved.find("\ngenome = 6-4\n"), std::string::npos);
  EXPECT_NE(resolved.find("\nbatch-size = 32\n"), std::string::npos);
}

TEST_F(Cli, RerunFromResolvedConfigReproducesOutputs) {
  ASSERT_EQ(run("synth --per-class 6 --out data"), 0) << log();
  ASSERT_EQ(run("train-audio --manifest data/manifest.jsonl --genome 5 --epochs 3 --folds 3 --seed 4 --out a"), 0)
      << log();
  fs::copy_file(dir_ / "a" / "run_config.txt", dir_ / "saved.cfg");
  fs::remove_all(dir_ / "a");
  ASSERT_EQ(run("train-audio --manifest data/manifest.jsonl --genome 5 --epochs 3 --folds 3 --seed 4 --out a"), 0);
  const auto first = snapshot(dir_ / "a");
  fs::remove_all(dir_ / "a");
  ASSERT_EQ(run("--config saved.cfg train-audio"), 0) << log();
  EXPECT_EQ(snapshot(dir_ / "a"), first);
}

TEST_F(Cli, InputsAreNotModified) {
  ASSERT_EQ(run("synth --per-class 5 --out data"), 0) << log();
  const auto before = snapshot(dir_ / "data");
  ASSERT_EQ(run("features --manifest data/manifest.jsonl --out f"), 0) << log();
  ASSERT_EQ(run("baselines --manifest data/manifest.jsonl --epochs 2 --folds 3 --forest-trees 5 --out b"), 0) << log();
  EXPECT_EQ(snapshot(dir_ / "data"), before);
}

TEST_F(Cli, PredictGivesThreeDistributions) {
  train_pipeline();
  ASSERT_EQ(run("predict --fusion-model fusion/fusion_model.json --backbone-file image/backbone.json "
                "--audio data/audio/class1_src0_3.wav --image data/images/class1_src0_3.png --out p"),
            0)
      << log();
  const auto doc = nlohmann::json::parse(read_file(dir_ / "p" / "prediction.json"));
  for (const char* key : {"audio", "image", "fusion"}) {
    const auto p = doc.at(key).get<std::vector<double>>();
    ASSERT_EQ(p.size(), 3u) << key;
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9) << key;
    for (double v : p) EXPECT_GE(v, 0.0);
  }
  EXPECT_EQ(doc.at("class_names").size(), 3u);
}

TEST_F(Cli, HoldoutScoresUnseenSourcesAndRejectsSeenOnes) {
  train_pipeline();
  ASSERT_EQ(run("synth --per-class 4 --ambiguity 1 --seed 8 --first-source 50 --out unseen"), 0) << log();
  ASSERT_EQ(run("holdout --manifest unseen/manifest.jsonl --fusion-model fusion/fusion_model.json "
                "--backbone-file image/backbone.json --out h"),
            0)
      << log();
  const std::string table = read_file(dir_ / "h" / "holdout.csv");
  EXPECT_EQ(table.rfind("approach,correct,incorrect,correct_incorrect,accuracy_percent\naudio,", 0), 0u) << table;
  EXPECT_NE(table.find("\nfusion,"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "h" / "holdout_confusion_fusion.csv"));

  EXPECT_EQ(run("holdout --manifest data/manifest.jsonl --fusion-model fusion/fusion_model.json "
                "--backbone-file image/backbone.json --out h2"),
            2);
  EXPECT_NE(log().find("also appears in the training data"), std::string::npos);
}

TEST_F(Cli, EvaluateWritesFoldReport) {
  ASSERT_EQ(run("synth --per-class 6 --out data"), 0) << log();
  ASSERT_EQ(run("evaluate --manifest data/manifest.jsonl --target image --epochs 2 --folds 3 --fold-mode grouped --out e"),
            0)
      << log();
  const auto report = nlohmann::json::parse(read_file(dir_ / "e" / "report.json"));
  EXPECT_EQ(report.at("k").get<int>(), 3);
  EXPECT_EQ(report.at("samples").get<int>(), 18);
  EXPECT_EQ(report.at("config").at("target").get<std::string>(), "image");
  EXPECT_TRUE(fs::exists(dir_ / "e" / "confusion.csv"));
}

}  // namespace
