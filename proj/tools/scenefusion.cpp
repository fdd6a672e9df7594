// scenefusion: command-line driver for the audio/image scene classifier.
//
// Every tunable is a top-level option so one flat key = value file can hold
// the whole run configuration. Options may follow the subcommand name.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scenefusion/scenefusion.hpp"

namespace {

namespace fs = std::filesystem;
namespace sf = scenefusion;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

// Seed streams derived from --seed.
constexpr std::uint64_t kFoldStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kBackboneStream = 3;
constexpr std::uint64_t kEvolutionStream = 4;
constexpr std::uint64_t kBaselineStream = 5;
constexpr std::uint64_t kPretrainStream = 6;

class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

struct Options {
  std::string out = "scenefusion-out";
  int threads = 1;
  std::uint64_t seed = 0;

  // data
  std::string manifest;
  std::string train_manifest;
  int sample_rate = 16000;
  int image_size = sf::vision::kDefaultImageSize;

  // synth
  int classes = 3;
  int per_class = 50;
  double ambiguity = 0.0;
  int seconds_per_source = 10;
  int first_source = 0;
  double audio_noise = 0.05;
  double image_noise = 0.05;

  // mfcc
  sf::dsp::MfccConfig mfcc;

  // training and evaluation
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int folds = 10;
  std::string fold_mode = "random";

  // audio branch
  std::string genome = "32";
  int population = 20;
  int generations = 10;
  int runs = 5;
  double mutation_rate = 0.3;
  double crossover_rate = 0.7;
  int elitism = 1;
  int tournament_size = 3;
  int min_layers = 1;
  int max_layers = 5;
  int min_width = 8;
  int max_width = 2048;
  int fitness_folds = 3;
  int final_folds = 10;

  // image branch
  std::string backbone_file;
  std::string backbone_features;
  int pretrain_epochs = 0;
  std::vector<int> image_widths = sf::nn::default_interpretation_widths();
  int image_width = 32;

  // fusion and baselines
  std::vector<int> fusion_widths = sf::nn::default_interpretation_widths();
  int fusion_width = 32;
  double svm_lambda = 1e-3;
  int svm_epochs = 200;
  int forest_trees = 100;
  int forest_depth = 12;
  std::string target = "fusion";

  // model files and single-pair inputs
  std::string audio_model;
  std::string image_model;
  std::string fusion_model;
  std::string audio;
  std::string image;
  std::string sample_id;
};

void add_options(CLI::App& app, Options& o) {
  const auto positive = CLI::PositiveNumber;
  const auto unit = CLI::Range(0.0, 1.0);
  auto opt = [&](const std::string& group, const std::string& name, auto& value, const std::string& help) {
    return app.add_option(name, value, help)->capture_default_str()->group(group);
  };

  opt("General", "--out", o.out, "Output directory");
  opt("General", "--threads", o.threads, "Worker thread cap")->check(positive);
  opt("General", "--seed", o.seed, "Global seed");

  opt("Data", "--manifest", o.manifest, "Dataset manifest (JSON Lines)");
  opt("Data", "--train-manifest", o.train_manifest, "Training manifest whose sources holdout data must avoid");
  opt("Data", "--sample-rate", o.sample_rate, "Audio sample rate in Hz")->check(positive);
  opt("Data", "--image-size", o.image_size, "Square image side after preprocessing")->check(positive);

  opt("Synthetic data", "--classes", o.classes, "Number of classes")->check(CLI::Range(3, 1000000));
  opt("Synthetic data", "--per-class", o.per_class, "Pairs per class")->check(positive);
  opt("Synthetic data", "--ambiguity", o.ambiguity, "Probability that one modality borrows the next class")->check(unit);
  opt("Synthetic data", "--seconds-per-source", o.seconds_per_source, "Consecutive seconds per synthetic source")
      ->check(positive);
  opt("Synthetic data", "--first-source", o.first_source, "Number of the first synthetic source")
      ->check(CLI::NonNegativeNumber);
  opt("Synthetic data", "--audio-noise", o.audio_noise, "Gaussian noise level on audio")->check(CLI::NonNegativeNumber);
  opt("Synthetic data", "--image-noise", o.image_noise, "Gaussian noise level on images")->check(CLI::NonNegativeNumber);

  opt("MFCC", "--window-seconds", o.mfcc.window_seconds, "Analysis window length");
  opt("MFCC", "--windows-per-clip", o.mfcc.windows_per_clip, "Windows per one-second clip");
  opt("MFCC", "--coefficients", o.mfcc.coefficients_per_window, "Cepstral coefficients kept per window");
  opt("MFCC", "--mel-filters", o.mfcc.mel_filters, "Triangular mel filters");
  opt("MFCC", "--fft-size", o.mfcc.fft_size, "FFT length (power of two)");
  opt("MFCC", "--log-floor", o.mfcc.log_floor, "Floor applied before the log");
  app.add_flag("--hamming,!--no-hamming", o.mfcc.hamming_window, "Apply a Hamming window to each frame")
      ->default_str(o.mfcc.hamming_window ? "true" : "false")
      ->group("MFCC");
  opt("MFCC", "--pre-emphasis", o.mfcc.pre_emphasis, "Pre-emphasis coefficient (0 disables)");

  opt("Training", "--epochs", o.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  opt("Training", "--batch-size", o.batch_size, "Mini-batch size")->check(positive);
  opt("Training", "--learning-rate", o.learning_rate, "SGD learning rate")->check(positive);
  opt("Training", "--momentum", o.momentum, "SGD momentum");
  opt("Training", "--folds", o.folds, "Cross-validation folds")->check(CLI::Range(2, 1000000));
  opt("Training", "--fold-mode", o.fold_mode, "Fold assignment")->check(CLI::IsMember({"random", "stratified", "grouped"}));

  opt("Audio branch", "--genome", o.genome, "Hidden widths, e.g. 977-365-703-41");
  opt("Audio branch", "--population", o.population, "Genomes per generation");
  opt("Audio branch", "--generations", o.generations, "Generations per run");
  opt("Audio branch", "--runs", o.runs, "Independent evolution runs");
  opt("Audio branch", "--mutation-rate", o.mutation_rate, "Per-gene mutation probability")->check(unit);
  opt("Audio branch", "--crossover-rate", o.crossover_rate, "Crossover probability")->check(unit);
  opt("Audio branch", "--elitism", o.elitism, "Genomes copied unchanged each generation");
  opt("Audio branch", "--tournament-size", o.tournament_size, "Tournament selection size");
  opt("Audio branch", "--min-layers", o.min_layers, "Fewest hidden layers");
  opt("Audio branch", "--max-layers", o.max_layers, "Most hidden layers");
  opt("Audio branch", "--min-width", o.min_width, "Narrowest hidden layer");
  opt("Audio branch", "--max-width", o.max_width, "Widest hidden layer");
  opt("Audio branch", "--fitness-folds", o.fitness_folds, "Folds used to score genomes during search");
  opt("Audio branch", "--final-folds", o.final_folds, "Folds used to re-score each run's winner (0 skips)");

  opt("Image branch", "--backbone-file", o.backbone_file, "Saved backbone (backbone.json)");
  opt("Image branch", "--backbone-features", o.backbone_features, "Imported per-sample backbone features CSV");
  opt("Image branch", "--pretrain-epochs", o.pretrain_epochs, "Epochs of builtin backbone pretraining (0 keeps it random)")
      ->check(CLI::NonNegativeNumber);
  opt("Image branch", "--image-widths", o.image_widths, "Interpretation widths to sweep")->delimiter(',');
  opt("Image branch", "--image-width", o.image_width, "Interpretation width for evaluate/baselines")->check(positive);

  opt("Fusion", "--fusion-widths", o.fusion_widths, "Fusion interpretation widths to sweep")->delimiter(',');
  opt("Fusion", "--fusion-width", o.fusion_width, "Fusion interpretation width for evaluate/baselines")->check(positive);
  opt("Fusion", "--svm-lambda", o.svm_lambda, "Linear SVM regularisation")->check(positive);
  opt("Fusion", "--svm-epochs", o.svm_epochs, "Linear SVM epochs")->check(positive);
  opt("Fusion", "--forest-trees", o.forest_trees, "Random forest size")->check(positive);
  opt("Fusion", "--forest-depth", o.forest_depth, "Random forest depth limit")->check(positive);
  opt("Fusion", "--target", o.target, "Model reported by evaluate")
      ->check(CLI::IsMember({"audio", "image", "fusion", "naive_bayes", "linear_svm", "random_forest"}));

  opt("Models", "--audio-model", o.audio_model, "Audio classifier (audio_model.json)");
  opt("Models", "--image-model", o.image_model, "Image interpretation head (image_model.json)");
  opt("Models", "--fusion-model", o.fusion_model, "Fusion model (fusion_model.json)");
  opt("Models", "--audio", o.audio, "WAV file for predict");
  opt("Models", "--image", o.image, "PNG/JPEG file for predict");
  opt("Models", "--sample-id", o.sample_id, "Sample id for imported backbone lookups in predict");
}

// ---------------------------------------------------------------------------
// Small helpers.

void need(const std::string& value, const std::string& flag, const std::string& command) {
  if (value.empty()) throw UsageError(command + " requires " + flag);
}

fs::path out_dir(const Options& o) {
  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw sf::IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw sf::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw sf::IoError("short write: " + path.string());
  std::cout << "wrote " << path.string() << '\n';
}

void write_json(const fs::path& path, const json& doc) {
  sf::nn::write_json_file(path, doc);
  std::cout << "wrote " << path.string() << '\n';
}

// One "key = value" line per option, in declaration order. Values come from
// the command line or config file when given, else the default, and are
// normalised so a run reproduced from this file writes the same text.
std::string resolved_config(const CLI::App& app) {
  std::ostringstream out;
  for (const CLI::Option* opt : app.get_options()) {
    const std::string key = opt->get_single_name();
    if (key == "help" || key == "config" || key.empty()) continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->reduced_results()) value += (value.empty() ? "" : ",") + r;
    } else {
      for (char ch : opt->get_default_str())
        if (ch != '[' && ch != ']' && ch != ' ' && ch != '"') value += ch;
    }
    if (value.empty() || value.find_first_of(" #=\"'") != std::string::npos) value = '"' + value + '"';
    out << key << " = " << value << '\n';
  }
  return out.str();
}

// key -> value pairs of the resolved configuration, for embedding in reports.
json config_json(const std::string& resolved) {
  json doc = json::object();
  std::istringstream in(resolved);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find(" = ");
    if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
    std::string value = line.substr(eq + 3);
    if (value.size() >= 2 && value.front() == '"') value = value.substr(1, value.size() - 2);
    doc[line.substr(0, eq)] = value;
  }
  return doc;
}

sf::nn::TrainConfig train_config(const Options& o) {
  sf::nn::TrainConfig t;
  t.epochs = o.epochs;
  t.batch_size = o.batch_size;
  t.learning_rate = o.learning_rate;
  t.momentum = o.momentum;
  t.seed = sf::derive_seed(o.seed, kTrainStream);
  t.validate();
  return t;
}

sf::dsp::MfccConfig mfcc_config(const Options& o) {
  sf::dsp::MfccConfig c = o.mfcc;
  c.sample_rate = o.sample_rate;
  c.validate();
  return c;
}

sf::data::PairedDataset load_dataset(const Options& o, const std::string& manifest) {
  sf::data::LoadOptions lo;
  lo.image_size = o.image_size;
  lo.sample_rate = o.sample_rate;
  lo.threads = o.threads;
  auto ds = sf::data::load_manifest_dataset(manifest, lo);
  sf::require(ds.size() > 0, "manifest " + manifest + " has no samples");
  return ds;
}

sf::eval::FoldPlan fold_plan(const Options& o, const sf::data::PairedDataset& ds) {
  const auto seed = sf::derive_seed(o.seed, kFoldStream);
  if (o.fold_mode == "stratified") return sf::eval::stratified_kfold_split(ds.labels, o.folds, seed);
  if (o.fold_mode == "grouped") {
    const auto sources = ds.source_ids();
    return sf::eval::grouped_kfold_split(sources, o.folds, seed);
  }
  return sf::eval::kfold_split(ds.size(), o.folds, seed);
}

sf::vision::Backbone load_backbone_file(const std::string& path) {
  return sf::vision::Backbone::from_json(sf::nn::read_json_file(path));
}

// Saved backbone, imported features, or a builtin stack (random unless
// pretraining is requested).
sf::vision::Backbone make_backbone(const Options& o, const sf::data::PairedDataset& ds) {
  if (!o.backbone_file.empty()) return load_backbone_file(o.backbone_file);
  if (!o.backbone_features.empty()) {
    return sf::vision::Backbone::imported(sf::vision::read_feature_csv(o.backbone_features), o.backbone_features);
  }
  sf::vision::BackboneSpec spec;
  spec.input_size = o.image_size;
  auto backbone = sf::vision::Backbone::builtin(spec, sf::derive_seed(o.seed, kBackboneStream));
  if (o.pretrain_epochs > 0) {
    auto cfg = train_config(o);
    cfg.epochs = o.pretrain_epochs;
    cfg.seed = sf::derive_seed(o.seed, kPretrainStream);
    const auto losses = sf::vision::pretrain_backbone(backbone, ds.images, ds.labels, ds.num_classes(), cfg);
    std::cout << "backbone pretraining loss " << losses.front() << " -> " << losses.back() << '\n';
  }
  return backbone;
}

sf::audio::EvoConfig evo_config(const Options& o) {
  sf::audio::EvoConfig e;
  e.population = o.population;
  e.generations = o.generations;
  e.runs = o.runs;
  e.mutation_rate = o.mutation_rate;
  e.crossover_rate = o.crossover_rate;
  e.elitism = o.elitism;
  e.tournament_size = o.tournament_size;
  e.seed = sf::derive_seed(o.seed, kEvolutionStream);
  e.bounds = {o.min_layers, o.max_layers, o.min_width, o.max_width};
  e.validate();
  return e;
}

sf::fusion::BaselineConfig baseline_config(const Options& o) {
  sf::fusion::BaselineConfig b;
  b.svm.lambda = o.svm_lambda;
  b.svm.epochs = o.svm_epochs;
  b.svm.seed = sf::derive_seed(o.seed, kBaselineStream);
  b.forest.trees = o.forest_trees;
  b.forest.max_depth = o.forest_depth;
  b.forest.seed = sf::derive_seed(o.seed, kBaselineStream);
  return b;
}

// Model documents carry the class names and the sources they were trained
// on so later stages can label outputs and enforce the holdout split.
json model_doc(json doc, const sf::data::PairedDataset& ds) {
  doc["class_names"] = ds.class_names;
  auto sources = ds.source_ids();
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
  doc["training_sources"] = sources;
  return doc;
}

std::vector<std::string> string_list(const json& doc, const std::string& key) {
  if (!doc.contains(key)) return {};
  try {
    return doc.at(key).get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw sf::InvalidArgument("model file: bad '" + key + "' list: " + e.what());
  }
}

void require_same_classes(const std::vector<std::string>& model_classes, const sf::data::PairedDataset& ds,
                          const std::string& what) {
  if (model_classes.empty()) return;
  sf::require(model_classes == ds.class_names, what + " was trained on a different class list");
}

sf::fusion::PairedFeatures paired_features(const sf::data::PairedDataset& ds, const sf::Dataset& audio_rows,
                                           const sf::Dataset& image_rows) {
  sf::fusion::PairedFeatures p;
  p.num_classes = ds.num_classes();
  p.audio_ids = ds.sample_ids();
  p.image_ids = p.audio_ids;
  p.audio = audio_rows.features;
  p.image = image_rows.features;
  p.labels = ds.labels;
  return p;
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns after writing its outputs under --out.

void run_synth(const Options& o) {
  sf::data::SynthConfig cfg;
  cfg.num_classes = o.classes;
  cfg.samples_per_class = o.per_class;
  cfg.ambiguity = o.ambiguity;
  cfg.seed = o.seed;
  cfg.seconds_per_source = o.seconds_per_source;
  cfg.first_source = o.first_source;
  cfg.audio_noise = o.audio_noise;
  cfg.image_noise = o.image_noise;
  cfg.sample_rate = o.sample_rate;
  cfg.image_size = o.image_size;
  const auto manifest = sf::data::generate_synthetic(cfg, out_dir(o), o.threads);
  std::cout << "wrote " << manifest.string() << " (" << cfg.num_classes * cfg.samples_per_class << " pairs)\n";
}

void run_features(const Options& o) {
  need(o.manifest, "--manifest", "features");
  const auto ds = load_dataset(o, o.manifest);
  const auto rows = sf::data::audio_feature_dataset(ds, mfcc_config(o), o.threads);
  const auto path = out_dir(o) / "audio_features.csv";
  sf::data::write_features_csv(path, rows, ds.class_names);
  std::cout << "wrote " << path.string() << " (" << rows.size() << " rows x " << rows.dim() + 1 << " columns)\n";
}

void run_train_audio(const Options& o, const json& config) {
  need(o.manifest, "--manifest", "train-audio");
  const auto ds = load_dataset(o, o.manifest);
  const auto rows = sf::data::audio_feature_dataset(ds, mfcc_config(o), o.threads);
  const auto genome = sf::audio::parse_genome(o.genome);
  const auto train = train_config(o);
  const auto plan = fold_plan(o, ds);
  auto fit = [&](const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows) {
    const auto model = sf::audio::train_audio_classifier(rows.subset(train_rows), genome, train);
    std::vector<int> preds;
    for (std::size_t r : test_rows) preds.push_back(sf::nn::predict_class(model, rows.features[r]));
    return preds;
  };
  auto report = sf::eval::evaluate(fit, rows.labels, rows.num_classes, plan, o.threads);
  report.config = config;
  const auto dir = out_dir(o);
  write_json(dir / "audio_report.json", report.to_json());
  write_text(dir / "audio_confusion.csv", report.confusion.to_csv(ds.class_names));
  const auto model = sf::audio::train_audio_classifier(rows, genome, train);
  write_json(dir / "audio_model.json", model_doc(sf::nn::to_json(model), ds));
  std::cout << "audio " << genome.to_string() << ": mean accuracy " << report.mean_accuracy << " over " << plan.k
            << " folds\n";
}

void run_evolve_audio(const Options& o) {
  need(o.manifest, "--manifest", "evolve-audio");
  const auto ds = load_dataset(o, o.manifest);
  const auto rows = sf::data::audio_feature_dataset(ds, mfcc_config(o), o.threads);
  sf::audio::FitnessConfig fit;
  fit.train = train_config(o);
  fit.folds = o.fitness_folds;
  fit.final_folds = o.final_folds;
  fit.fold_seed = sf::derive_seed(o.seed, kFoldStream);
  fit.threads = o.threads;
  const auto result = sf::audio::evolve_topology(rows, evo_config(o), fit);
  const auto dir = out_dir(o);
  write_text(dir / "evolution_history.csv", result.history_csv());
  write_text(dir / "evolution_summary.csv", result.summary_csv());
  write_text(dir / "best_genome.txt", result.best.genome.to_string() + '\n');
  const auto model = sf::audio::train_audio_classifier(rows, result.best.genome, fit.train);
  write_json(dir / "audio_model.json", model_doc(sf::nn::to_json(model), ds));
  std::cout << "best genome " << result.best.genome.to_string() << " (" << result.best.connections
            << " connections), search accuracy " << result.best.accuracy << '\n';
}

void run_train_image(const Options& o) {
  need(o.manifest, "--manifest", "train-image");
  const auto ds = load_dataset(o, o.manifest);
  const auto backbone = make_backbone(o, ds);
  const auto rows = sf::data::image_feature_dataset(backbone, ds, o.threads);
  sf::nn::SweepConfig sweep;
  sweep.train = train_config(o);
  sweep.folds = o.folds;
  sweep.fold_seed = sf::derive_seed(o.seed, kFoldStream);
  sweep.threads = o.threads;
  const auto result = sf::vision::head_sweep(rows, o.image_widths, sweep);
  const auto dir = out_dir(o);
  write_json(dir / "backbone.json", backbone.to_json());
  write_text(dir / "image_sweep.csv", result.to_csv());
  const auto head = sf::nn::train_head(rows, result.best_width, sweep.train);
  write_json(dir / "image_model.json", model_doc(sf::nn::to_json(head), ds));
  std::cout << "image head: best width " << result.best_width << '\n';
}

void run_train_fusion(const Options& o) {
  need(o.manifest, "--manifest", "train-fusion");
  need(o.audio_model, "--audio-model", "train-fusion");
  need(o.image_model, "--image-model", "train-fusion");
  need(o.backbone_file, "--backbone-file", "train-fusion");
  const auto ds = load_dataset(o, o.manifest);
  const auto audio_doc = sf::nn::read_json_file(o.audio_model);
  const auto image_doc = sf::nn::read_json_file(o.image_model);
  require_same_classes(string_list(audio_doc, "class_names"), ds, "audio model");
  require_same_classes(string_list(image_doc, "class_names"), ds, "image model");
  const auto backbone = load_backbone_file(o.backbone_file);
  const auto audio_rows = sf::data::audio_feature_dataset(ds, mfcc_config(o), o.threads);
  const auto image_rows = sf::data::image_feature_dataset(backbone, ds, o.threads);
  const auto model =
      sf::fusion::make_fusion_model(sf::nn::network_from_json(audio_doc), sf::nn::network_from_json(image_doc));
  const auto pairs = paired_features(ds, audio_rows, image_rows);
  sf::nn::SweepConfig sweep;
  sweep.train = train_config(o);
  sweep.folds = o.folds;
  sweep.fold_seed = sf::derive_seed(o.seed, kFoldStream);
  sweep.threads = o.threads;
  const auto result = sf::fusion::fusion_head_sweep(model, pairs, o.fusion_widths, sweep);
  const auto dir = out_dir(o);
  write_text(dir / "fusion_sweep.csv", result.to_csv());
  const auto trained = sf::fusion::train_fusion_head(model, pairs, sweep.train, result.best_width);
  json doc = model_doc(trained.to_json(), ds);
  // Holdout data must avoid the branches' training sources too.
  auto sources = doc["training_sources"].get<std::vector<std::string>>();
  for (const auto* d : {&audio_doc, &image_doc})
    for (const auto& s : string_list(*d, "training_sources")) sources.push_back(s);
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
  doc["training_sources"] = sources;
  write_json(dir / "fusion_model.json", doc);
  std::cout << "fusion head: best width " << result.best_width << '\n';
}

sf::fusion::ModalityComparison comparison(const Options& o, const sf::data::PairedDataset& ds, bool baselines) {
  const auto backbone = make_backbone(o, ds);
  const auto audio_rows = sf::data::audio_feature_dataset(ds, mfcc_config(o), o.threads);
  const auto image_rows = sf::data::image_feature_dataset(backbone, ds, o.threads);
  sf::fusion::ComparisonConfig cfg;
  cfg.audio_genome = sf::audio::parse_genome(o.genome);
  cfg.image_width = o.image_width;
  cfg.fusion_width = o.fusion_width;
  cfg.audio_train = cfg.image_train = cfg.fusion_train = train_config(o);
  cfg.baselines = baselines;
  cfg.baseline = baseline_config(o);
  return sf::fusion::compare_modalities(audio_rows, image_rows, ds.sample_ids(), fold_plan(o, ds), cfg, o.threads);
}

void run_baselines(const Options& o, const json& config) {
  need(o.manifest, "--manifest", "baselines");
  const auto ds = load_dataset(o, o.manifest);
  const auto result = comparison(o, ds, true);
  const auto rows = result.rows();
  const auto dir = out_dir(o);
  write_text(dir / "comparison.csv", sf::fusion::comparison_csv(rows));
  json reports = {{"audio", result.audio.to_json()}, {"image", result.image.to_json()}, {"fusion", result.fused.to_json()}};
  for (const auto& [kind, r] : result.baselines) reports[sf::fusion::to_string(kind)] = r.to_json();
  write_json(dir / "comparison.json", {{"class_names", ds.class_names}, {"config", config}, {"reports", reports}});
  for (const auto& r : rows) std::cout << r.model << ' ' << r.accuracy << '\n';
}

void run_evaluate(const Options& o, const json& config) {
  need(o.manifest, "--manifest", "evaluate");
  const auto ds = load_dataset(o, o.manifest);
  const bool baseline = o.target != "audio" && o.target != "image" && o.target != "fusion";
  const auto result = comparison(o, ds, baseline);
  sf::eval::FoldReport report = o.target == "audio" ? result.audio : o.target == "image" ? result.image : result.fused;
  for (const auto& [kind, r] : result.baselines)
    if (sf::fusion::to_string(kind) == o.target) report = r;
  report.config = config;
  const auto dir = out_dir(o);
  write_json(dir / "report.json", report.to_json());
  write_text(dir / "confusion.csv", report.confusion.to_csv(ds.class_names));
  std::cout << o.target << ": mean accuracy " << report.mean_accuracy << " (std " << report.std_accuracy << ")\n";
}

void run_holdout(const Options& o) {
  need(o.manifest, "--manifest", "holdout");
  need(o.fusion_model, "--fusion-model", "holdout");
  need(o.backbone_file, "--backbone-file", "holdout");
  const auto ds = load_dataset(o, o.manifest);
  const auto doc = sf::nn::read_json_file(o.fusion_model);
  const auto model = sf::fusion::FusionModel::from_json(doc);
  require_same_classes(string_list(doc, "class_names"), ds, "fusion model");
  sf::require(!model.head.layers.empty(), "fusion model has no trained head");
  auto training_sources = string_list(doc, "training_sources");
  if (!o.train_manifest.empty()) {
    for (const auto& r : sf::data::read_manifest(o.train_manifest).records)
      training_sources.push_back(sf::data::source_id(r.sample_id));
  }
  const auto backbone = load_backbone_file(o.backbone_file);
  const auto audio_rows = sf::data::audio_feature_dataset(ds, mfcc_config(o), o.threads);
  const auto image_rows = sf::data::image_feature_dataset(backbone, ds, o.threads);
  const std::vector<sf::eval::NamedPredictor> predictors = {
      {"audio", [&](std::size_t i) { return sf::nn::predict_class(model.audio_branch, audio_rows.features[i]); }},
      {"image", [&](std::size_t i) { return sf::nn::predict_class(model.image_branch, image_rows.features[i]); }},
      {"fusion",
       [&](std::size_t i) { return sf::fusion::predict_fused(model, audio_rows.features[i], image_rows.features[i]); }}};
  const auto unseen = ds.source_ids();
  const auto rows = sf::eval::holdout_evaluate(predictors, ds.labels, ds.num_classes(), unseen, training_sources);
  const auto dir = out_dir(o);
  write_text(dir / "holdout.csv", sf::eval::holdout_csv(rows));
  for (const auto& r : rows) {
    write_text(dir / ("holdout_confusion_" + r.name + ".csv"), r.confusion.to_csv(ds.class_names));
    std::cout << r.name << ' ' << r.correct << '/' << r.total << '\n';
  }
}

void run_predict(const Options& o) {
  need(o.fusion_model, "--fusion-model", "predict");
  need(o.backbone_file, "--backbone-file", "predict");
  need(o.audio, "--audio", "predict");
  need(o.image, "--image", "predict");
  const auto doc = sf::nn::read_json_file(o.fusion_model);
  const auto model = sf::fusion::FusionModel::from_json(doc);
  sf::require(!model.head.layers.empty(), "fusion model has no trained head");
  const auto backbone = load_backbone_file(o.backbone_file);
  const auto clip = sf::io::read_wav(o.audio);
  const auto mfcc = mfcc_config(o);
  sf::require(clip.sample_rate == mfcc.sample_rate, o.audio + ": sample rate " + std::to_string(clip.sample_rate) +
                                                         " Hz, expected " + std::to_string(mfcc.sample_rate));
  const auto audio_features = sf::dsp::MfccExtractor(mfcc).clip(clip);
  const auto image_features = backbone.features(sf::io::load_image(o.image, o.image_size), o.sample_id);
  const auto audio_p = sf::nn::predict_proba(model.audio_branch, audio_features);
  const auto image_p = sf::nn::predict_proba(model.image_branch, image_features);
  const auto fused_p = sf::nn::predict_proba(model.head, sf::fusion::fused_feature_vector(model, audio_features, image_features));
  auto names = string_list(doc, "class_names");
  if (names.empty())
    for (int c = 0; c < model.num_classes(); ++c) names.push_back(std::to_string(c));
  const json result = {{"class_names", names},
                       {"audio", audio_p},
                       {"image", image_p},
                       {"fusion", fused_p},
                       {"predicted", names.at(static_cast<std::size_t>(sf::nn::argmax(fused_p)))}};
  std::cout << result.dump(1) << '\n';
  write_json(out_dir(o) / "prediction.json", result);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio/image scene classification: features, topology search, fusion and evaluation"};
  app.name("scenefusion");
  app.fallthrough();
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "Flat key = value configuration file (# starts a comment)");
  Options o;
  add_options(app, o);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "Generate a synthetic paired dataset"},
      {"features", "Write per-clip MFCC features as CSV"},
      {"train-audio", "Cross-validate and train the audio MLP for --genome"},
      {"evolve-audio", "Evolve audio MLP topologies"},
      {"train-image", "Sweep image interpretation widths over backbone features"},
      {"train-fusion", "Sweep fusion widths on top of frozen audio and image models"},
      {"baselines", "Compare audio, image, fusion and classical models on shared folds"},
      {"evaluate", "Cross-validated report for one model (--target)"},
      {"holdout", "Score a trained fusion model on unseen sources"},
      {"predict", "Class probabilities for one image/audio pair"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  if (argc <= 1) {
    std::cerr << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const std::string resolved = resolved_config(app);
  const json config = config_json(resolved);
  try {
    if (command == "synth") run_synth(o);
    if (command == "features") run_features(o);
    if (command == "train-audio") run_train_audio(o, config);
    if (command == "evolve-audio") run_evolve_audio(o);
    if (command == "train-image") run_train_image(o);
    if (command == "train-fusion") run_train_fusion(o);
    if (command == "baselines") run_baselines(o, config);
    if (command == "evaluate") run_evaluate(o, config);
    if (command == "holdout") run_holdout(o);
    if (command == "predict") run_predict(o);
    write_text(out_dir(o) / "run_config.txt", "# scenefusion " + command + "\n" + resolved);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for the full option list.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
