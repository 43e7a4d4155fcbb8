#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "kanlab/csv.hpp"
#include "kanlab/kan.hpp"
#include "kanlab/metrics.hpp"
#include "kanlab/rng.hpp"

namespace kanlab {

struct IntRange {
  int lo = 1;
  int hi = 1;
  int size() const { return hi - lo + 1; }
  bool contains(int v) const { return v >= lo && v <= hi; }
  int clamp(int v) const { return std::min(std::max(v, lo), hi); }
};

/// Sweep ranges for the three KAN hyperparameters; defaults follow the
/// exhaustive-search setup (second-layer width 3..30, k 3..20, grid 3..30).
struct SearchSpace {
  IntRange width2{3, 30};
  IntRange k{3, 20};
  IntRange grid{3, 30};

  void validate() const {
    for (const auto& r : {width2, k, grid})
      if (r.lo < 1 || r.hi < r.lo)
        throw ConfigError("search space: intervals must be non-empty with lo >= 1");
  }
};

/// One candidate (width2, k, grid).
struct Genome {
  int width2 = 3;
  int k = 3;
  int grid = 3;

  auto tie() const { return std::tie(width2, k, grid); }
  bool operator<(const Genome& o) const { return tie() < o.tie(); }
  bool operator==(const Genome& o) const { return tie() == o.tie(); }
};

struct GaConfig {
  int population = 20;
  int generations = 20;
  double cxpb = 0.5;
  double mutpb = 0.2;
  int tournament_size = 3;
  std::uint64_t seed = 0;

  void validate() const {
    if (population < 2) throw ConfigError("ga: population must be >= 2");
    if (generations < 1) throw ConfigError("ga: generations must be >= 1");
    if (cxpb < 0 || cxpb > 1 || mutpb < 0 || mutpb > 1)
      throw ConfigError("ga: cxpb and mutpb must be in [0,1]");
    if (tournament_size < 1) throw ConfigError("ga: tournament_size must be >= 1");
  }
};

struct TrialRecord {
  Genome genome;
  std::vector<int> width;  // full layer vector for the trained network
  MetricsReport metrics;   // computed on the validation split
  double train_seconds = 0.0;
  std::string error;       // non-empty when training failed

  double fitness() const { return error.empty() ? metrics.f1.value_or(0.0) : 0.0; }
};

/// Training knobs shared by every trial in a sweep.
struct TrainDefaults {
  int epochs = 200;
  double learning_rate = 0.01;
  double threshold = 0.5;
};

/// The O(1) configurator: pyramid width [d, d/2, 1], k = 15, grid = 5.
inline KanConfig heuristic_config(int input_dim, TrainDefaults defaults = {},
                                  std::uint64_t seed = 0) {
  if (input_dim < 2)
    throw ConfigError("heuristic_config: invalid dimension, need input_dim >= 2");
  KanConfig cfg;
  cfg.width = {input_dim, std::max(1, input_dim / 2), 1};
  cfg.k = 15;
  cfg.grid = 5;
  cfg.epochs = defaults.epochs;
  cfg.learning_rate = defaults.learning_rate;
  cfg.classification_threshold = defaults.threshold;
  cfg.seed = seed;
  return cfg;
}

/// All genomes of the space in lexicographic (width2, k, grid) order.
inline std::vector<Genome> enumerate_grid(const SearchSpace& space) {
  space.validate();
  std::vector<Genome> out;
  out.reserve(static_cast<std::size_t>(space.width2.size()) * space.k.size() *
              space.grid.size());
  for (int w = space.width2.lo; w <= space.width2.hi; ++w)
    for (int k = space.k.lo; k <= space.k.hi; ++k)
      for (int g = space.grid.lo; g <= space.grid.hi; ++g)
        out.push_back({w, k, g});
  return out;
}

enum class EstimateMode { exact, paper_rounding };

struct TimeEstimate {
  double mean_s = 0.0;
  double total_s = 0.0;
  double total_h = 0.0;
};

/// Feasibility estimate for a sweep: mean of the extreme training times
/// multiplied by the trial count. paper_rounding first rounds the mean to the
/// nearest whole second, reproducing the published arithmetic.
inline TimeEstimate estimate_search_time(double shortest_s, double longest_s,
                                         long count,
                                         EstimateMode mode = EstimateMode::exact) {
  if (!(shortest_s > 0.0) || !(shortest_s <= longest_s))
    throw ConfigError("estimate_search_time: invalid times");
  if (count < 1) throw ConfigError("estimate_search_time: invalid count");
  TimeEstimate est;
  est.mean_s = 0.5 * (shortest_s + longest_s);
  if (mode == EstimateMode::paper_rounding)
    est.mean_s = static_cast<double>(std::llround(est.mean_s));
  est.total_s = est.mean_s * static_cast<double>(count);
  est.total_h = est.total_s / 3600.0;
  return est;
}

namespace detail {

/// Run fn(0..n-1) on up to `jobs` threads. Results must be written to
/// per-index slots; the schedule cannot affect outputs.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  const int workers = static_cast<int>(
      std::min<std::size_t>(n, static_cast<std::size_t>(jobs)));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

inline std::uint64_t genome_seed(std::uint64_t base, const Genome& g) {
  std::uint64_t s = derive_seed(base, seed_stream::trial);
  s = derive_seed(s, static_cast<std::uint64_t>(g.width2));
  s = derive_seed(s, static_cast<std::uint64_t>(g.k));
  return derive_seed(s, static_cast<std::uint64_t>(g.grid));
}

/// Train one candidate and score it on the validation split. Failures are
/// recorded, not thrown, so a sweep survives bad configs.
inline TrialRecord evaluate_genome(const Genome& genome, const SplitDataset& data,
                                   const TrainDefaults& defaults,
                                   std::uint64_t base_seed) {
  TrialRecord trial;
  trial.genome = genome;
  const auto start = std::chrono::steady_clock::now();
  try {
    KanConfig cfg;
    cfg.width = {static_cast<int>(data.train.dim()), genome.width2, 1};
    cfg.k = genome.k;
    cfg.grid = genome.grid;
    cfg.epochs = defaults.epochs;
    cfg.learning_rate = defaults.learning_rate;
    cfg.classification_threshold = defaults.threshold;
    cfg.seed = genome_seed(base_seed, genome);
    trial.width = cfg.width;

    KanModel model = kan_new(cfg);
    kan_train(model, data.train, data.valid);
    const auto probs = kan_predict_probs(model, data.valid);
    trial.metrics = compute_metrics(probs, data.valid.labels, defaults.threshold);
  } catch (const std::exception& e) {
    trial.error = e.what();
  }
  trial.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trial;
}

}  // namespace detail

/// Total ranking order: F1 desc, precision desc, then lexicographic genome.
inline void rank_trials(std::vector<TrialRecord>& trials) {
  std::sort(trials.begin(), trials.end(), [](const TrialRecord& a, const TrialRecord& b) {
    const double af = a.error.empty() ? a.metrics.f1.value_or(-1.0) : -1.0;
    const double bf = b.error.empty() ? b.metrics.f1.value_or(-1.0) : -1.0;
    if (af != bf) return af > bf;
    const double ap = a.error.empty() ? a.metrics.precision.value_or(-1.0) : -1.0;
    const double bp = b.error.empty() ? b.metrics.precision.value_or(-1.0) : -1.0;
    if (ap != bp) return ap > bp;
    return a.genome < b.genome;
  });
}

struct SearchOptions {
  std::uint64_t seed = 0;
  int jobs = 1;
  TrainDefaults defaults;
};

/// Exhaustive sweep (optionally truncated to the first `budget` genomes in
/// enumeration order). Returns trials ranked by rank_trials.
inline std::vector<TrialRecord> grid_search(const SearchSpace& space,
                                            const SplitDataset& data,
                                            std::optional<long> budget,
                                            const SearchOptions& opts = {}) {
  std::vector<Genome> genomes = enumerate_grid(space);
  if (budget) {
    if (*budget < 1) throw ConfigError("grid_search: budget must be >= 1");
    if (static_cast<std::size_t>(*budget) < genomes.size())
      genomes.resize(static_cast<std::size_t>(*budget));
  }
  std::vector<TrialRecord> trials(genomes.size());
  detail::parallel_for(genomes.size(), opts.jobs, [&](std::size_t i) {
    trials[i] = detail::evaluate_genome(genomes[i], data, opts.defaults, opts.seed);
  });
  rank_trials(trials);
  return trials;
}

struct GenerationStats {
  int generation = 0;
  double best = 0.0;
  double mean = 0.0;
  double worst = 0.0;
  Genome best_genome;
};

struct GaResult {
  TrialRecord best;
  std::vector<GenerationStats> history;  // per generation, elitism applied
  std::vector<TrialRecord> trials;       // every unique genome evaluated, ranked
};

/// Genetic search: tournament selection, uniform per-gene crossover (prob
/// cxpb), per-gene random-reset mutation (prob mutpb then 1/3 per gene),
/// generational replacement with elitism 1. Fitness is validation F1.
/// Per-genome training seeds depend only on (seed, genome), so repeated
/// evaluations hit a cache and grid/GA fitness values are comparable.
inline GaResult ga_search(const SearchSpace& space, const GaConfig& ga,
                          const SplitDataset& data, const SearchOptions& opts = {}) {
  space.validate();
  ga.validate();

  std::map<Genome, TrialRecord> cache;
  const auto evaluate_all = [&](const std::vector<Genome>& genomes) {
    std::vector<Genome> fresh;
    for (const auto& g : genomes)
      if (!cache.count(g) &&
          std::find(fresh.begin(), fresh.end(), g) == fresh.end())
        fresh.push_back(g);
    std::vector<TrialRecord> results(fresh.size());
    detail::parallel_for(fresh.size(), opts.jobs, [&](std::size_t i) {
      results[i] = detail::evaluate_genome(fresh[i], data, opts.defaults, opts.seed);
    });
    for (std::size_t i = 0; i < fresh.size(); ++i) cache[fresh[i]] = results[i];
  };
  const auto fitness = [&](const Genome& g) { return cache.at(g).fitness(); };

  Rng rng(derive_seed(ga.seed, seed_stream::ga_driver));
  const auto random_genome = [&] {
    Genome g;
    g.width2 = static_cast<int>(rng.uniform_int(space.width2.lo, space.width2.hi));
    g.k = static_cast<int>(rng.uniform_int(space.k.lo, space.k.hi));
    g.grid = static_cast<int>(rng.uniform_int(space.grid.lo, space.grid.hi));
    return g;
  };

  std::vector<Genome> pop(static_cast<std::size_t>(ga.population));
  for (auto& g : pop) g = random_genome();
  evaluate_all(pop);

  GaResult out;
  const auto record_stats = [&](int gen) {
    GenerationStats st;
    st.generation = gen;
    st.best = -1.0;
    st.worst = 2.0;
    double sum = 0.0;
    for (const auto& g : pop) {
      const double f = fitness(g);
      sum += f;
      if (f > st.best) {
        st.best = f;
        st.best_genome = g;
      }
      st.worst = std::min(st.worst, f);
    }
    st.mean = sum / static_cast<double>(pop.size());
    out.history.push_back(st);
  };
  record_stats(0);

  const auto tournament = [&] {
    std::size_t winner =
        static_cast<std::size_t>(rng.uniform_int(0, ga.population - 1));
    for (int i = 1; i < ga.tournament_size; ++i) {
      const auto pick =
          static_cast<std::size_t>(rng.uniform_int(0, ga.population - 1));
      if (fitness(pop[pick]) > fitness(pop[winner])) winner = pick;
    }
    return pop[winner];
  };
  const auto mutate = [&](Genome& g) {
    if (rng.uniform() >= ga.mutpb) return;
    if (rng.uniform() < 1.0 / 3.0)
      g.width2 = static_cast<int>(rng.uniform_int(space.width2.lo, space.width2.hi));
    if (rng.uniform() < 1.0 / 3.0)
      g.k = static_cast<int>(rng.uniform_int(space.k.lo, space.k.hi));
    if (rng.uniform() < 1.0 / 3.0)
      g.grid = static_cast<int>(rng.uniform_int(space.grid.lo, space.grid.hi));
  };
  const auto clamp = [&](Genome& g) {
    g.width2 = space.width2.clamp(g.width2);
    g.k = space.k.clamp(g.k);
    g.grid = space.grid.clamp(g.grid);
  };

  for (int gen = 1; gen <= ga.generations; ++gen) {
    // Elite of the current population, lowest index on ties.
    std::size_t elite = 0;
    for (std::size_t i = 1; i < pop.size(); ++i)
      if (fitness(pop[i]) > fitness(pop[elite])) elite = i;
    const Genome elite_genome = pop[elite];

    std::vector<Genome> offspring;
    offspring.reserve(pop.size());
    while (offspring.size() < pop.size()) {
      Genome c1 = tournament();
      Genome c2 = tournament();
      if (rng.uniform() < ga.cxpb) {
        if (rng.uniform() < 0.5) std::swap(c1.width2, c2.width2);
        if (rng.uniform() < 0.5) std::swap(c1.k, c2.k);
        if (rng.uniform() < 0.5) std::swap(c1.grid, c2.grid);
      }
      mutate(c1);
      mutate(c2);
      clamp(c1);
      clamp(c2);
      offspring.push_back(c1);
      if (offspring.size() < pop.size()) offspring.push_back(c2);
    }
    evaluate_all(offspring);

    std::size_t worst = 0;
    for (std::size_t i = 1; i < offspring.size(); ++i)
      if (fitness(offspring[i]) < fitness(offspring[worst])) worst = i;
    offspring[worst] = elite_genome;

    pop = std::move(offspring);
    record_stats(gen);
  }

  out.trials.reserve(cache.size());
  for (const auto& [genome, trial] : cache) out.trials.push_back(trial);
  rank_trials(out.trials);
  out.best = out.trials.front();
  return out;
}

// ---------------------------------------------------------------------------
// Trial log rendering: CSV columns follow the published table layout
// (Width, K, Grid, Precision, Recall, F1) with the remaining metrics after.

inline std::string trials_to_csv(const std::vector<TrialRecord>& trials) {
  std::string out = csv::write_row({"width", "k", "grid", "precision", "recall",
                                    "f1", "accuracy", "auc_roc", "tpr", "fpr",
                                    "tnr", "logloss", "train_seconds", "error"});
  const auto cell = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("undefined");
  };
  for (const auto& t : trials) {
    out += csv::write_row(
        {format_width(t.width), std::to_string(t.genome.k),
         std::to_string(t.genome.grid), cell(t.metrics.precision),
         cell(t.metrics.recall), cell(t.metrics.f1),
         t.error.empty() ? format_double(t.metrics.accuracy) : "undefined",
         cell(t.metrics.auc_roc), cell(t.metrics.tpr), cell(t.metrics.fpr),
         cell(t.metrics.tnr),
         t.error.empty() ? format_double(t.metrics.logloss) : "undefined",
         format_double(t.train_seconds), t.error});
  }
  return out;
}

inline nlohmann::json trial_to_json(const TrialRecord& t) {
  nlohmann::json j;
  j["width"] = t.width;
  j["width2"] = t.genome.width2;
  j["k"] = t.genome.k;
  j["grid"] = t.genome.grid;
  const auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v; else j[key] = nullptr;
  };
  put("precision", t.metrics.precision);
  put("recall", t.metrics.recall);
  put("f1", t.metrics.f1);
  j["accuracy"] = t.metrics.accuracy;
  put("auc_roc", t.metrics.auc_roc);
  put("tpr", t.metrics.tpr);
  put("fpr", t.metrics.fpr);
  put("tnr", t.metrics.tnr);
  j["logloss"] = t.metrics.logloss;
  j["train_seconds"] = t.train_seconds;
  j["error"] = t.error;
  return j;
}

inline std::string trials_to_json(const std::vector<TrialRecord>& trials) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trials) arr.push_back(trial_to_json(t));
  return arr.dump(2) + "\n";
}

inline std::string ga_history_csv(const std::vector<GenerationStats>& history) {
  std::string out = csv::write_row(
      {"generation", "best_f1", "mean_f1", "worst_f1", "best_width2", "best_k",
       "best_grid"});
  for (const auto& st : history)
    out += csv::write_row({std::to_string(st.generation), format_double(st.best),
                           format_double(st.mean), format_double(st.worst),
                           std::to_string(st.best_genome.width2),
                           std::to_string(st.best_genome.k),
                           std::to_string(st.best_genome.grid)});
  return out;
}

}  // namespace kanlab
