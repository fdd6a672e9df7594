#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "scenefusion/audio/evolve.hpp"
#include "scenefusion/common/random.hpp"

namespace sf = scenefusion;
namespace audio = scenefusion::audio;
using audio::Genome;
using audio::GenomeBounds;

namespace {

// Overlapping Gaussian clusters: learnable, but not perfectly.
sf::Dataset cluster_data(std::size_t per_class, int dim, double spread, std::uint64_t seed) {
  sf::Rng rng(seed);
  sf::Dataset d;
  d.num_classes = 3;
  for (std::size_t i = 0; i < per_class * 3; ++i) {
    const int c = static_cast<int>(i % 3);
    std::vector<double> row(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) row[j] = rng.normal(j % 3 == c ? 1.0 : 0.0, spread);
    d.features.push_back(row);
    d.labels.push_back(c);
  }
  return d;
}

audio::EvoConfig small_evo(std::uint64_t seed) {
  audio::EvoConfig evo;
  evo.population = 6;
  evo.generations = 3;
  evo.runs = 2;
  evo.seed = seed;
  evo.bounds = {1, 3, 2, 12};
  return evo;
}

audio::FitnessConfig small_fitness() {
  audio::FitnessConfig f;
  f.train.epochs = 4;
  f.train.learning_rate = 0.05;
  f.final_folds = 0;
  return f;
}

}  // namespace

TEST(Genome, ParseAndPrint) {
  EXPECT_EQ(audio::parse_genome("977,365,703,41").hidden_widths, (std::vector<int>{977, 365, 703, 41}));
  EXPECT_EQ(audio::parse_genome("934-594-474").to_string(), "934-594-474");
  EXPECT_THROW(audio::parse_genome("12,x"), sf::InvalidArgument);
  EXPECT_THROW(audio::parse_genome(""), sf::InvalidArgument);
}

TEST(RandomGenome, DegenerateBounds) {
  EXPECT_EQ(audio::random_genome(GenomeBounds{1, 1, 17, 17}, 5).hidden_widths, std::vector<int>{17});
}

TEST(RandomGenome, RespectsBoundsAndSeed) {
  const GenomeBounds bounds{1, 5, 8, 2048};
  sf::Rng rng(1);
  std::set<std::size_t> lengths;
  for (int i = 0; i < 1000; ++i) {
    const auto g = audio::random_genome(bounds, rng);
    ASSERT_TRUE(bounds.contains(g)) << g.to_string();
    lengths.insert(g.size());
  }
  EXPECT_EQ(lengths.size(), 5u);
  EXPECT_EQ(audio::random_genome(bounds, 42), audio::random_genome(bounds, 42));
  EXPECT_THROW(audio::random_genome(GenomeBounds{3, 2, 8, 16}, 1), sf::InvalidArgument);
  EXPECT_THROW(audio::random_genome(GenomeBounds{1, 2, 16, 8}, 1), sf::InvalidArgument);
}

TEST(Mutate, ZeroRateIsIdentity) {
  audio::EvoConfig cfg;
  cfg.mutation_rate = 0.0;
  const Genome g{{100, 200, 300}};
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_EQ(audio::mutate(g, cfg, s), g);
}

TEST(Mutate, AlwaysWithinBounds) {
  const GenomeBounds bounds{1, 5, 8, 2048};
  sf::Rng rng(2);
  Genome g = audio::random_genome(bounds, rng);
  for (int i = 0; i < 1000; ++i) {
    g = audio::mutate(g, 1.0, bounds, rng);
    ASSERT_TRUE(bounds.contains(g)) << g.to_string();
  }
}

TEST(Mutate, RateOneMatchesHandReplay) {
  audio::EvoConfig cfg;
  cfg.mutation_rate = 1.0;
  cfg.bounds = {1, 5, 8, 2048};
  const Genome g{{977, 365, 703, 41}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    sf::Rng rng(seed);
    std::vector<int> w = g.hidden_widths;
    const double reach = 0.25 * (2048 - 8);
    for (int& v : w) {
      EXPECT_LT(rng.uniform(), 1.0);
      const double step = std::round(rng.uniform(-reach, reach));
      v = static_cast<int>(std::clamp(v + step, 8.0, 2048.0));
    }
    if (rng.uniform() < 0.1) {
      if (rng.uniform() < 0.5) {
        const auto pos = rng.uniform_int(0, static_cast<std::int64_t>(w.size()));
        w.insert(w.begin() + pos, static_cast<int>(rng.uniform_int(8, 2048)));
      } else {
        w.erase(w.begin() + rng.uniform_int(0, static_cast<std::int64_t>(w.size()) - 1));
      }
    }
    EXPECT_EQ(audio::mutate(g, cfg, seed).hidden_widths, w) << "seed " << seed;
  }
}

TEST(Crossover, IdenticalParentsReproduce) {
  const GenomeBounds bounds{1, 5, 8, 2048};
  const Genome g{{64, 32, 16}};
  for (std::uint64_t s = 0; s < 30; ++s) EXPECT_EQ(audio::crossover(g, g, bounds, s), g);
}

TEST(Crossover, EnumeratedCutsKeepSidesAndLengths) {
  const Genome a{{1, 2, 3, 4}};
  const Genome b{{10, 20}};
  std::set<std::size_t> lengths;
  for (std::size_t cut = 0; cut <= 4; ++cut) {
    const auto child = audio::crossover_at(a, b, cut);
    const std::size_t take_a = std::min(cut, a.size());
    for (std::size_t i = 0; i < child.size(); ++i) {
      if (i < take_a) {
        EXPECT_EQ(child.hidden_widths[i], a.hidden_widths[i]);
      } else {
        EXPECT_EQ(child.hidden_widths[i], b.hidden_widths[std::min(cut, b.size()) + (i - take_a)]);
      }
    }
    lengths.insert(child.size());
  }
  EXPECT_EQ(*lengths.begin(), 2u);
  EXPECT_EQ(*lengths.rbegin(), 4u);
  EXPECT_EQ(lengths, (std::set<std::size_t>{2, 3, 4}));
  EXPECT_EQ(audio::crossover_at(a, b, 0), b);
  EXPECT_EQ(audio::crossover_at(a, b, 4), a);
}

TEST(Crossover, ChildrenRespectLengthBounds) {
  const GenomeBounds bounds{2, 3, 8, 64};
  sf::Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto a = audio::random_genome(bounds, rng), b = audio::random_genome(bounds, rng);
    EXPECT_TRUE(bounds.contains(audio::crossover(a, b, bounds, rng)));
  }
}

TEST(AudioClassifier, ShapeAndConnections) {
  auto data = cluster_data(20, 104, 0.3, 4);
  data.num_classes = 2;
  for (int& l : data.labels) l = std::min(l, 1);
  sf::nn::TrainConfig cfg;
  cfg.epochs = 1;
  const auto m = audio::train_audio_classifier(data, Genome{{4}}, cfg);
  ASSERT_EQ(m.layers.size(), 2u);
  EXPECT_EQ(m.layers[0].spec.input_dim, 104);
  EXPECT_EQ(m.layers[0].spec.output_dim, 4);
  EXPECT_EQ(m.layers[1].spec.output_dim, 2);
  EXPECT_EQ(sf::nn::count_connections(m), sf::nn::count_connections(104, std::vector<int>{4}, 2));
}

TEST(AudioClassifier, SeparableFeaturesTrainToHighAccuracy) {
  const auto data = cluster_data(50, 12, 0.1, 5);
  sf::nn::TrainConfig cfg;
  cfg.epochs = 30;
  const auto m = audio::train_audio_classifier(data, Genome{{16, 8}}, cfg);
  EXPECT_GE(sf::nn::accuracy(m, data), 0.99);
}

TEST(Evolution, ZeroGenerationsReturnsBestInitialMember) {
  auto evo = small_evo(6);
  evo.generations = 0;
  evo.runs = 1;
  const auto data = cluster_data(20, 6, 1.0, 6);
  const auto r = audio::evolve_topology(data, evo, small_fitness());
  ASSERT_EQ(r.history.size(), 1u);
  ASSERT_EQ(r.evaluated.size(), 6u);
  double best = -1;
  for (const auto& g : r.evaluated) {
    best = std::max(best, audio::genome_fitness(data, g, small_fitness().train, 3, 0));
  }
  EXPECT_EQ(r.best.accuracy, best);
}

TEST(Evolution, ElitismKeepsBestFitnessMonotone) {
  const auto data = cluster_data(20, 6, 1.0, 7);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto r = audio::evolve_topology(data, small_evo(seed), small_fitness());
    ASSERT_EQ(r.history.size(), 2u * 4u);
    for (std::size_t i = 1; i < r.history.size(); ++i) {
      if (r.history[i].run != r.history[i - 1].run) continue;
      EXPECT_GE(r.history[i].best_accuracy, r.history[i - 1].best_accuracy);
    }
  }
}

TEST(Evolution, RecordsAreConsistent) {
  const auto data = cluster_data(20, 6, 1.0, 8);
  const auto evo = small_evo(9);
  const auto r = audio::evolve_topology(data, evo, small_fitness());
  for (const auto& g : r.evaluated) EXPECT_TRUE(evo.bounds.contains(g)) << g.to_string();
  for (const auto& w : r.run_winners) EXPECT_EQ(w.connections, sf::nn::count_connections(6, w.genome.hidden_widths, 3));
  for (const auto& h : r.history) EXPECT_EQ(h.connections, sf::nn::count_connections(6, h.best_genome.hidden_widths, 3));
  EXPECT_EQ(r.run_winners.size(), 2u);
  const auto best = std::max_element(r.run_winners.begin(), r.run_winners.end(),
                                     [](const auto& a, const auto& b) { return a.accuracy < b.accuracy; });
  EXPECT_EQ(best->accuracy, r.best.accuracy);
}

TEST(Evolution, ReproducibleAndThreadIndependent) {
  const auto data = cluster_data(20, 6, 1.0, 10);
  auto fit = small_fitness();
  const auto a = audio::evolve_topology(data, small_evo(11), fit);
  fit.threads = 3;
  const auto b = audio::evolve_topology(data, small_evo(11), fit);
  EXPECT_EQ(a.history_csv(), b.history_csv());
  EXPECT_EQ(a.summary_csv(), b.summary_csv());
  EXPECT_EQ(a.evaluated, b.evaluated);
}

TEST(Evolution, FinalFoldsRescoreWinner) {
  const auto data = cluster_data(20, 6, 1.0, 12);
  auto fit = small_fitness();
  fit.final_folds = 5;
  auto evo = small_evo(13);
  evo.runs = 1;
  const auto r = audio::evolve_topology(data, evo, fit);
  EXPECT_EQ(r.best_final_accuracy, audio::genome_fitness(data, r.best.genome, fit.train, 5, fit.fold_seed));
  EXPECT_EQ(r.summary_csv().substr(0, 17), "simulation,hidden");
}

TEST(Evolution, EmptyDatasetThrows) {
  sf::Dataset empty;
  empty.num_classes = 3;
  EXPECT_THROW(audio::evolve_topology(empty, small_evo(1), small_fitness()), sf::InvalidArgument);
}

TEST(Evolution, SearchImprovesOnGenerationZero) {
  // 3 classes x 200 overlapping samples: no genome in a random initial
  // population is already optimal, so the search should find a better one.
  const auto data = cluster_data(200, 12, 1.6, 14);
  auto fit = small_fitness();
  fit.train.epochs = 3;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    audio::EvoConfig evo;
    evo.runs = 1;
    evo.seed = seed;
    evo.bounds = {1, 3, 1, 16};
    const auto r = audio::evolve_topology(data, evo, fit);
    ASSERT_EQ(r.history.size(), 11u);
    EXPECT_GT(r.history.back().best_accuracy, r.history.front().best_accuracy) << "seed " << seed;
  }
}
