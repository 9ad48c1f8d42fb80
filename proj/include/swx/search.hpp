// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "swx/crossover.hpp"

namespace swx {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class CrossoverMethod { None, Stx, Cswx, Rcswx };

inline const char* to_string(CrossoverMethod m) {
  switch (m) {
    case CrossoverMethod::None: return "none";
    case CrossoverMethod::Stx: return "stx";
    case CrossoverMethod::Cswx: return "cswx";
    case CrossoverMethod::Rcswx: return "rcswx";
  }
  return "?";
}

inline CrossoverMethod crossover_method_by_name(const std::string& s) {
  if (s == "none") return CrossoverMethod::None;
  if (s == "stx") return CrossoverMethod::Stx;
  if (s == "cswx") return CrossoverMethod::Cswx;
  if (s == "rcswx") return CrossoverMethod::Rcswx;
  throw DomainError("unknown crossover method: " + s);
}

struct Individual {
  DerivationTree tree;
  double fitness = 0;
  int birth_iteration = 0;
};

using FitnessFn = std::function<double(const DerivationTree&)>;

struct SearchConfig {
  int population_size = 100;
  int total_evaluations = 1000;
  int tournament_size = 5;
  CrossoverMethod crossover_method = CrossoverMethod::Rcswx;
  double crossover_prob = 1.0;
  double mutation_prob = 1.0;
  double skewness = 0.0;
  ScoringMatrix scoring = ScoringMatrix::sm0();
  std::uint64_t seed = 0;
  GrammarConfig grammar;
  FitnessFn fitness;

  // history plumbing: diversity is estimated on a seeded subsample of the
  // population every `diversity_stride` iterations
  int diversity_sample = 16;
  int diversity_stride = 10;

  void check() const {
    if (population_size < 1) throw DomainError("population_size must be >= 1");
    if (total_evaluations < population_size)
      throw DomainError("total_evaluations must be >= population_size");
    if (tournament_size < 1 || tournament_size > population_size)
      throw DomainError("tournament_size must be in [1, population_size]");
    if (crossover_prob < 0 || crossover_prob > 1 || mutation_prob < 0 || mutation_prob > 1)
      throw DomainError("probabilities must lie in [0, 1]");
    if (!fitness) throw DomainError("search config needs a fitness function");
  }
};

struct IterationRecord {
  int iteration = 0;        // evaluation count so far
  int population_size = 0;
  double best_fitness = 0;  // incumbent best (nondecreasing)
  double mean_fitness = 0;
  double diversity = -1;  // -1 when not measured this iteration
  std::string operator_used;
  int parent_a = -1, parent_b = -1;  // birth iterations of the parents
};

struct SearchHistory {
  std::vector<IterationRecord> records;
  DerivationTree best_tree;
  double best_fitness = 0;
  int evaluations = 0;

  void write_csv(std::ostream& out, const std::string& header_comment = "") const {
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    out << "iteration,best_fitness,mean_fitness,diversity,operator\n";
    for (const auto& r : records) {
      out << r.iteration << ',' << r.best_fitness << ',' << r.mean_fitness << ',';
      if (r.diversity >= 0) out << r.diversity;
      out << ',' << r.operator_used << "\n";
    }
  }
};

// ---------------------------------------------------------------------------
// Fitness functions
// ---------------------------------------------------------------------------

// Synthetic landscape: negative recursive edit distance to a hidden target.
// Maximal (zero) exactly on the target's functional equivalence class.
inline FitnessFn target_distance_fitness(DerivationTree target, ScoringMatrix m) {
  return [target = std::move(target), m](const DerivationTree& t) {
    return -rcswx_distance(t, target, m);
  };
}

// Counts occurrences of a token-label n-gram in the serialisation; a rugged
// multi-optimum landscape for diversity studies.
inline FitnessFn motif_count_fitness(std::vector<std::string> motif) {
  if (motif.empty()) throw DomainError("motif must contain at least one token label");
  return [motif = std::move(motif)](const DerivationTree& t) {
    SerialisedSequence seq = serialise(t);
    std::vector<std::string> labels;
    labels.reserve(seq.size());
    for (const auto& tok : seq.tokens) labels.push_back(tok.label());
    int count = 0;
    for (std::size_t i = 0; i + motif.size() <= labels.size(); ++i) {
      bool hit = true;
      for (std::size_t k = 0; k < motif.size(); ++k)
        if (labels[i + k] != motif[k]) {
          hit = false;
          break;
        }
      if (hit) ++count;
    }
    return static_cast<double>(count);
  };
}

// ---------------------------------------------------------------------------
// Selection and the steady-state loop
// ---------------------------------------------------------------------------

// Best of k uniform draws without replacement.
template <typename Population>
const Individual& tournament_select(const Population& population, int k, Rng& rng) {
  if (k > static_cast<int>(population.size()))
    throw DomainError("tournament size exceeds population size");
  std::vector<std::size_t> idx(population.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Individual* best = nullptr;
  for (int drawn = 0; drawn < k; ++drawn) {
    std::size_t pos = static_cast<std::size_t>(drawn) +
                      rng.index(idx.size() - static_cast<std::size_t>(drawn));
    std::swap(idx[static_cast<std::size_t>(drawn)], idx[pos]);
    const Individual& cand = population[idx[static_cast<std::size_t>(drawn)]];
    if (!best || cand.fitness > best->fitness) best = &cand;
  }
  return *best;
}

namespace detail {

inline double subsample_diversity(const std::deque<Individual>& pop, int sample,
                                  const ScoringMatrix& m, Rng& rng) {
  std::vector<std::size_t> idx(pop.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(sample), pop.size());
  if (n < 2) return 0;
  double sum = 0;
  int pairs = 0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      sum += rcswx_distance(pop[idx[a]].tree, pop[idx[b]].tree, m);
      ++pairs;
    }
  return sum / pairs;
}

}  // namespace detail

// Steady-state evolution: each iteration generates one offspring, evaluates
// it, inserts it and removes the oldest individual (insertion order queue).
// Failed fitness evaluations mark the individual with the worst observed
// fitness and continue.
inline SearchHistory evolve(const SearchConfig& config) {
  config.check();
  Rng rng(config.seed);
  Rng diversity_rng = rng.split(0xd1);

  SearchHistory history;
  std::deque<Individual> population;

  double worst_seen = 0;
  auto evaluate = [&](const DerivationTree& t) {
    double f;
    try {
      f = config.fitness(t);
    } catch (const std::exception&) {
      f = worst_seen;  // failure: worst fitness, search continues
    }
    worst_seen = std::min(worst_seen, f);
    return f;
  };

  auto record = [&](const std::string& op, const Individual& newcomer, int pa = -1,
                    int pb = -1) {
    IterationRecord r;
    r.iteration = history.evaluations;
    r.population_size = static_cast<int>(population.size());
    r.parent_a = pa;
    r.parent_b = pb;
    if (history.records.empty() || newcomer.fitness > history.best_fitness) {
      history.best_fitness = newcomer.fitness;
      history.best_tree = newcomer.tree;
    }
    r.best_fitness = history.best_fitness;
    double sum = 0;
    for (const auto& ind : population) sum += ind.fitness;
    r.mean_fitness = sum / static_cast<double>(population.size());
    if (config.diversity_stride > 0 &&
        history.evaluations % config.diversity_stride == 0)
      r.diversity = detail::subsample_diversity(population, config.diversity_sample,
                                                config.scoring, diversity_rng);
    r.operator_used = op;
    history.records.push_back(std::move(r));
  };

  for (int k = 0; k < config.population_size; ++k) {
    Individual ind;
    ind.tree = sample_tree(config.grammar, rng);
    ind.fitness = evaluate(ind.tree);
    ind.birth_iteration = ++history.evaluations;
    population.push_back(ind);
    record("init", population.back());
  }

  while (history.evaluations < config.total_evaluations) {
    const Individual& p1 = tournament_select(population, config.tournament_size, rng);
    const Individual& p2 = tournament_select(population, config.tournament_size, rng);
    DerivationTree child = p1.tree;
    std::string op = "clone";
    if (config.crossover_method != CrossoverMethod::None &&
        rng.bernoulli(config.crossover_prob)) {
      switch (config.crossover_method) {
        case CrossoverMethod::Stx: {
          auto r = stx_crossover(p1.tree, p2.tree, rng);
          if (r) {
            child = *r;
            op = "stx";
          }
          break;
        }
        case CrossoverMethod::Cswx:
          child = cswx_crossover(p1.tree, p2.tree, config.scoring, config.skewness, rng);
          op = "cswx";
          break;
        case CrossoverMethod::Rcswx:
          child = rcswx_crossover(p1.tree, p2.tree, config.scoring, config.skewness, rng);
          op = "rcswx";
          break;
        default:
          break;
      }
    }
    if (rng.bernoulli(config.mutation_prob)) {
      child = mutate(child, config.grammar, rng);
      op += "+mut";
    }
    const int pa = p1.birth_iteration, pb = p2.birth_iteration;
    Individual ind;
    ind.tree = std::move(child);
    ind.fitness = evaluate(ind.tree);
    ind.birth_iteration = ++history.evaluations;
    population.push_back(std::move(ind));
    population.pop_front();  // steady state: the oldest goes
    record(op, population.back(), pa, pb);
  }
  return history;
}

}  // namespace swx
