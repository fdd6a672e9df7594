#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "scenefusion/common/dataset.hpp"
#include "scenefusion/common/error.hpp"
#include "scenefusion/common/parallel.hpp"
#include "scenefusion/common/random.hpp"
#include "scenefusion/eval/harness.hpp"
#include "scenefusion/nn/network.hpp"
#include "scenefusion/nn/train.hpp"

namespace scenefusion::audio {

/// Hidden-layer widths of an MLP, input side first.
struct Genome {
  std::vector<int> hidden_widths;

  std::size_t size() const { return hidden_widths.size(); }
  friend bool operator==(const Genome&, const Genome&) = default;
  friend auto operator<=>(const Genome&, const Genome&) = default;

  std::string to_string(char sep = '-') const {
    std::string out;
    for (std::size_t i = 0; i < hidden_widths.size(); ++i) {
      if (i) out += sep;
      out += std::to_string(hidden_widths[i]);
    }
    return out;
  }
};

inline Genome parse_genome(const std::string& text) {
  Genome g;
  std::string cell;
  std::stringstream ss(text);
  while (std::getline(ss, cell, text.find(',') != std::string::npos ? ',' : '-')) {
    try {
      std::size_t used = 0;
      const int w = std::stoi(cell, &used);
      require(used == cell.size(), "");
      g.hidden_widths.push_back(w);
    } catch (const std::exception&) {
      throw InvalidArgument("genome: bad width '" + cell + "' in '" + text + "'");
    }
  }
  require(!g.hidden_widths.empty(), "genome: empty");
  return g;
}

struct GenomeBounds {
  int min_layers = 1;
  int max_layers = 5;
  int min_width = 8;
  int max_width = 2048;

  void validate() const {
    require(min_layers >= 1 && min_layers <= max_layers, "genome bounds: need 1 <= min_layers <= max_layers");
    require(min_width >= 1 && min_width <= max_width, "genome bounds: need 1 <= min_width <= max_width");
  }

  bool contains(const Genome& g) const {
    if (g.size() < static_cast<std::size_t>(min_layers) || g.size() > static_cast<std::size_t>(max_layers)) return false;
    return std::all_of(g.hidden_widths.begin(), g.hidden_widths.end(),
                       [&](int w) { return w >= min_width && w <= max_width; });
  }
};

struct EvoConfig {
  int population = 20;
  int generations = 10;
  int runs = 5;
  double mutation_rate = 0.3;
  double crossover_rate = 0.7;
  int elitism = 1;
  int tournament_size = 3;
  std::uint64_t seed = 0;
  GenomeBounds bounds;

  void validate() const {
    require(population >= 2, "evolution: population must be >= 2");
    require(generations >= 0, "evolution: generations must be >= 0");
    require(runs >= 1, "evolution: runs must be >= 1");
    require(elitism >= 1 && elitism <= population, "evolution: elitism must be in [1, population]");
    require(mutation_rate >= 0.0 && mutation_rate <= 1.0, "evolution: mutation_rate must be in [0, 1]");
    require(crossover_rate >= 0.0 && crossover_rate <= 1.0, "evolution: crossover_rate must be in [0, 1]");
    require(tournament_size >= 1, "evolution: tournament_size must be >= 1");
    bounds.validate();
  }
};

/// Length uniform in [min_layers, max_layers], then each width uniform in
/// [min_width, max_width].
inline Genome random_genome(const GenomeBounds& bounds, Rng& rng) {
  bounds.validate();
  Genome g;
  const auto len = rng.uniform_int(bounds.min_layers, bounds.max_layers);
  for (std::int64_t i = 0; i < len; ++i) {
    g.hidden_widths.push_back(static_cast<int>(rng.uniform_int(bounds.min_width, bounds.max_width)));
  }
  return g;
}

inline Genome random_genome(const GenomeBounds& bounds, std::uint64_t seed) {
  Rng rng(seed);
  return random_genome(bounds, rng);
}

/// Draw order, fixed so runs replay exactly:
///  1. per width: uniform() < rate; if hit, step = round(uniform(-q, q)) with
///     q = 0.25 * (max_width - min_width); width = clamp(width + step).
///  2. uniform() < 0.1 * rate; if hit, uniform() < 0.5 picks insert (else
///     remove) when both are legal. Insert draws a position in [0, len] then a
///     width; remove draws a position in [0, len - 1].
inline Genome mutate(const Genome& g, double mutation_rate, const GenomeBounds& bounds, Rng& rng) {
  Genome out = g;
  if (mutation_rate <= 0.0) return out;
  const double reach = 0.25 * (bounds.max_width - bounds.min_width);
  for (int& w : out.hidden_widths) {
    if (rng.uniform() < mutation_rate) {
      const double step = std::round(rng.uniform(-reach, reach));
      w = static_cast<int>(std::clamp<double>(w + step, bounds.min_width, bounds.max_width));
    }
  }
  if (rng.uniform() < 0.1 * mutation_rate) {
    const bool can_insert = out.size() < static_cast<std::size_t>(bounds.max_layers);
    const bool can_remove = out.size() > static_cast<std::size_t>(bounds.min_layers);
    bool insert = can_insert;
    if (can_insert && can_remove) insert = rng.uniform() < 0.5;
    if (insert && can_insert) {
      const auto pos = rng.uniform_int(0, static_cast<std::int64_t>(out.size()));
      const int width = static_cast<int>(rng.uniform_int(bounds.min_width, bounds.max_width));
      out.hidden_widths.insert(out.hidden_widths.begin() + pos, width);
    } else if (can_remove) {
      const auto pos = rng.uniform_int(0, static_cast<std::int64_t>(out.size()) - 1);
      out.hidden_widths.erase(out.hidden_widths.begin() + pos);
    }
  }
  return out;
}

inline Genome mutate(const Genome& g, const EvoConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return mutate(g, cfg.mutation_rate, cfg.bounds, rng);
}

/// One-point crossover: cut p uniform in [0, max(len a, len b)];
/// child = a[0, min(p, len a)) ++ b[min(p, len b), len b).
inline Genome crossover_at(const Genome& a, const Genome& b, std::size_t cut) {
  Genome child;
  const std::size_t take_a = std::min(cut, a.size());
  const std::size_t from_b = std::min(cut, b.size());
  child.hidden_widths.assign(a.hidden_widths.begin(), a.hidden_widths.begin() + static_cast<std::ptrdiff_t>(take_a));
  child.hidden_widths.insert(child.hidden_widths.end(), b.hidden_widths.begin() + static_cast<std::ptrdiff_t>(from_b),
                             b.hidden_widths.end());
  return child;
}

inline Genome crossover(const Genome& a, const Genome& b, const GenomeBounds& bounds, Rng& rng) {
  const auto cut = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(std::max(a.size(), b.size()))));
  Genome child = crossover_at(a, b, cut);
  if (child.size() > static_cast<std::size_t>(bounds.max_layers)) child.hidden_widths.resize(static_cast<std::size_t>(bounds.max_layers));
  while (child.size() < static_cast<std::size_t>(bounds.min_layers)) {
    child.hidden_widths.push_back(a.hidden_widths.empty() ? bounds.min_width : a.hidden_widths.back());
  }
  return child;
}

inline Genome crossover(const Genome& a, const Genome& b, const GenomeBounds& bounds, std::uint64_t seed) {
  Rng rng(seed);
  return crossover(a, b, bounds, rng);
}

struct FitnessConfig {
  nn::TrainConfig train;
  int folds = 3;        // during search
  int final_folds = 10;  // re-score of each run's winner; 0 skips it
  std::uint64_t fold_seed = 0;
  int threads = 1;
};

struct FitnessRecord {
  Genome genome;
  double accuracy = 0.0;
  std::int64_t connections = 0;
};

/// input -> hidden widths (ReLU) -> classes (softmax) MLP trained on
/// standardised features.
inline nn::NetworkModel train_audio_classifier(const Dataset& data, const Genome& genome, const nn::TrainConfig& cfg) {
  require(!data.empty(), "train_audio_classifier: empty dataset");
  data.validate();
  nn::NetworkModel model = nn::make_mlp(static_cast<int>(data.dim()), genome.hidden_widths, data.num_classes,
                                        derive_seed(cfg.seed, hash_string(genome.to_string())));
  model.input_norm = nn::fit_standardizer(data);
  return nn::train(std::move(model), data, cfg).model;
}

/// Mean k-fold accuracy of the genome's MLP.
inline double genome_fitness(const Dataset& data, const Genome& genome, const nn::TrainConfig& train_cfg, int folds,
                             std::uint64_t fold_seed) {
  const auto plan = eval::kfold_split(data.size(), folds, fold_seed);
  auto fit = [&](const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows) {
    const auto model = train_audio_classifier(data.subset(train_rows), genome, train_cfg);
    std::vector<int> preds;
    for (std::size_t r : test_rows) preds.push_back(nn::predict_class(model, data.features[r]));
    return preds;
  };
  return eval::evaluate(fit, data.labels, data.num_classes, plan).mean_accuracy;
}

struct GenerationStats {
  int run = 0;
  int generation = 0;
  double best_accuracy = 0.0;
  double mean_accuracy = 0.0;
  Genome best_genome;
  std::int64_t connections = 0;
};

struct EvolutionResult {
  FitnessRecord best;                  // best search fitness over all runs
  double best_final_accuracy = -1.0;   // final_folds re-score; -1 when skipped
  std::vector<FitnessRecord> run_winners;
  std::vector<double> run_winner_final_accuracy;
  std::vector<GenerationStats> history;
  std::vector<Genome> evaluated;  // every genome scored, in evaluation order

  std::string history_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "run,generation,best_accuracy,mean_accuracy,best_genome,connections\n";
    for (const auto& h : history) {
      out << h.run << ',' << h.generation << ',' << h.best_accuracy << ',' << h.mean_accuracy << ','
          << h.best_genome.to_string() << ',' << h.connections << '\n';
    }
    return out.str();
  }

  /// One row per run winner sorted by accuracy, like a results table.
  std::string summary_csv() const {
    std::vector<std::size_t> order(run_winners.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return score(a) > score(b);
    });
    std::ostringstream out;
    out.precision(17);
    out << "simulation,hidden_neurons,connections,search_accuracy,final_accuracy\n";
    for (std::size_t i : order) {
      out << i + 1 << ',' << run_winners[i].genome.to_string() << ',' << run_winners[i].connections << ','
          << run_winners[i].accuracy << ',' << run_winner_final_accuracy[i] << '\n';
    }
    return out.str();
  }

 private:
  double score(std::size_t i) const {
    return run_winner_final_accuracy[i] >= 0.0 ? run_winner_final_accuracy[i] : run_winners[i].accuracy;
  }
};

/// Generational GA over MLP topologies: tournament selection, one-point
/// crossover, clamped mutation and elitism. Per-run best fitness never
/// decreases because elites keep their scored fitness. Candidate RNGs derive
/// from (seed, run, generation, slot), and fitness training seeds from the
/// genome itself, so results do not depend on `threads`.
inline EvolutionResult evolve_topology(const Dataset& data, const EvoConfig& evo, const FitnessConfig& fit_cfg) {
  evo.validate();
  require(!data.empty(), "evolve_topology: empty dataset");
  data.validate();
  const int input_dim = static_cast<int>(data.dim());
  const int classes = data.num_classes;

  EvolutionResult result;
  result.best.accuracy = -1.0;

  for (int run = 0; run < evo.runs; ++run) {
    const std::uint64_t run_seed = derive_seed(evo.seed, static_cast<std::uint64_t>(run));
    std::map<Genome, double> cache;
    std::vector<FitnessRecord> pop(static_cast<std::size_t>(evo.population));

    auto score = [&](std::vector<FitnessRecord>& members, std::size_t first) {
      std::vector<std::size_t> todo;
      for (std::size_t i = first; i < members.size(); ++i) {
        result.evaluated.push_back(members[i].genome);
        if (!cache.contains(members[i].genome)) {
          cache.emplace(members[i].genome, -1.0);
          todo.push_back(i);
        }
      }
      std::vector<double> scores(todo.size());
      parallel_for(todo.size(), fit_cfg.threads, [&](std::size_t j) {
        scores[j] = genome_fitness(data, members[todo[j]].genome, fit_cfg.train, fit_cfg.folds, fit_cfg.fold_seed);
      });
      for (std::size_t j = 0; j < todo.size(); ++j) cache[members[todo[j]].genome] = scores[j];
      for (std::size_t i = first; i < members.size(); ++i) {
        members[i].accuracy = cache.at(members[i].genome);
        members[i].connections = nn::count_connections(input_dim, members[i].genome.hidden_widths, classes);
      }
    };

    auto record = [&](int generation) {
      GenerationStats s;
      s.run = run;
      s.generation = generation;
      const auto best = std::max_element(pop.begin(), pop.end(), [](const auto& a, const auto& b) { return a.accuracy < b.accuracy; });
      s.best_accuracy = best->accuracy;
      s.best_genome = best->genome;
      s.connections = best->connections;
      double sum = 0.0;
      for (const auto& m : pop) sum += m.accuracy;
      s.mean_accuracy = sum / static_cast<double>(pop.size());
      result.history.push_back(s);
    };

    for (std::size_t i = 0; i < pop.size(); ++i) {
      Rng rng(derive_seed(run_seed, i));
      pop[i].genome = random_genome(evo.bounds, rng);
    }
    score(pop, 0);
    record(0);

    for (int gen = 1; gen <= evo.generations; ++gen) {
      std::vector<std::size_t> ranked(pop.size());
      std::iota(ranked.begin(), ranked.end(), std::size_t{0});
      std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) { return pop[a].accuracy > pop[b].accuracy; });

      std::vector<FitnessRecord> next;
      next.reserve(pop.size());
      for (int e = 0; e < evo.elitism; ++e) next.push_back(pop[ranked[static_cast<std::size_t>(e)]]);
      const std::uint64_t gen_seed = derive_seed(run_seed, 0x9e00ULL + static_cast<std::uint64_t>(gen));
      for (std::size_t slot = next.size(); slot < pop.size(); ++slot) {
        Rng rng(derive_seed(gen_seed, slot));
        auto tournament = [&]() -> const FitnessRecord& {
          std::size_t pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pop.size()) - 1));
          for (int t = 1; t < evo.tournament_size; ++t) {
            const auto c = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pop.size()) - 1));
            if (pop[c].accuracy > pop[pick].accuracy) pick = c;
          }
          return pop[pick];
        };
        const FitnessRecord& a = tournament();
        Genome child = a.genome;
        if (rng.uniform() < evo.crossover_rate) {
          const FitnessRecord& b = tournament();
          child = crossover(a.genome, b.genome, evo.bounds, rng);
        }
        child = mutate(child, evo.mutation_rate, evo.bounds, rng);
        next.push_back({std::move(child), 0.0, 0});
      }
      score(next, static_cast<std::size_t>(evo.elitism));
      pop = std::move(next);
      record(gen);
    }

    const auto winner = *std::max_element(pop.begin(), pop.end(), [](const auto& a, const auto& b) { return a.accuracy < b.accuracy; });
    double final_acc = -1.0;
    if (fit_cfg.final_folds >= 2) {
      final_acc = genome_fitness(data, winner.genome, fit_cfg.train, fit_cfg.final_folds, fit_cfg.fold_seed);
    }
    result.run_winners.push_back(winner);
    result.run_winner_final_accuracy.push_back(final_acc);
    if (winner.accuracy > result.best.accuracy) {
      result.best = winner;
      result.best_final_accuracy = final_acc;
    }
  }
  return result;
}

}  // namespace scenefusion::audio
