// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "swx/search.hpp"

using namespace swx;

namespace {

SearchConfig small_config() {
  SearchConfig cfg;
  cfg.population_size = 20;
  cfg.total_evaluations = 120;
  cfg.tournament_size = 3;
  cfg.grammar.max_depth = 3;
  cfg.diversity_stride = 20;
  cfg.diversity_sample = 8;
  cfg.fitness = motif_count_fitness({"comp:relu"});
  return cfg;
}

}  // namespace

TEST_CASE("tournament selection extremes") {
  Rng rng(1);
  std::vector<Individual> pop;
  for (int k = 0; k < 30; ++k) pop.push_back({DerivationTree{}, static_cast<double>(k), k});
  SUBCASE("k equal to the population returns the global best") {
    for (int t = 0; t < 20; ++t)
      CHECK(tournament_select(pop, 30, rng).fitness == 29.0);
  }
  SUBCASE("k = 1 is a uniform draw") {
    std::vector<int> counts(30, 0);
    const int draws = 30000;
    for (int t = 0; t < draws; ++t)
      counts[static_cast<std::size_t>(tournament_select(pop, 1, rng).fitness)]++;
    double expected = draws / 30.0;
    double sigma = std::sqrt(draws * (1.0 / 30) * (29.0 / 30));
    for (int c : counts) CHECK(std::abs(c - expected) <= 4 * sigma);
  }
}

TEST_CASE("tournament selection pressure matches the combinatorial formula") {
  Rng rng(2);
  std::vector<Individual> pop;
  for (int k = 0; k < 100; ++k) pop.push_back({DerivationTree{}, static_cast<double>(k), k});
  const int draws = 100000;
  int best_hits = 0;
  int top5_hits = 0;
  for (int t = 0; t < draws; ++t) {
    double f = tournament_select(pop, 5, rng).fitness;
    if (f == 99.0) ++best_hits;
    if (f >= 95.0) ++top5_hits;
  }
  // P(best in 5 draws without replacement) = 1 - C(99,5)/C(100,5) = 5/100
  double p = 5.0 / 100;
  double sigma = std::sqrt(draws * p * (1 - p));
  CHECK(std::abs(best_hits - p * draws) <= 3 * sigma);
  // winner comes from the top five ranks iff the sample hits any of them:
  // 1 - C(95,5)/C(100,5)
  double p5 = 1.0 - (95.0 / 100) * (94.0 / 99) * (93.0 / 98) * (92.0 / 97) * (91.0 / 96);
  double sigma5 = std::sqrt(draws * p5 * (1 - p5));
  CHECK(std::abs(top5_hits - p5 * draws) <= 3 * sigma5);
}

TEST_CASE("target-distance fitness peaks on the target's functional class") {
  GrammarConfig g;
  g.max_depth = 3;
  Rng rng(3);
  DerivationTree target = sample_tree(g, rng);
  auto fit = target_distance_fitness(target, ScoringMatrix::sm0());
  CHECK(fit(target) == 0.0);

  int b2 = branch2_count(target);
  std::vector<bool> bits(static_cast<std::size_t>(b2), true);
  CHECK(fit(permute_branches(target, bits)) == 0.0);

  DerivationTree target2 = parse_tree("seq(comp(pos-enc),comp(linear,64))");
  auto fit2 = target_distance_fitness(target2, ScoringMatrix::sm0());
  CHECK(fit2(parse_tree("seq(comp(pos-enc),comp(linear,32))")) == -0.25);
  CHECK(fit2(parse_tree("seq(comp(pos-enc),comp(relu))")) == -0.5);
}

TEST_CASE("motif-count fitness counts serialised n-gram occurrences") {
  auto fit = motif_count_fitness({"comp:relu"});
  CHECK(fit(parse_tree("comp(identity)")) == 0.0);
  CHECK(fit(parse_tree("comp(relu)")) == 1.0);
  CHECK(fit(parse_tree("seq(comp(relu),seq(comp(relu),comp(relu)))")) == 3.0);

  auto gram = motif_count_fitness({"comp:relu", "comp:identity"});
  CHECK(gram(parse_tree("seq(comp(relu),comp(identity))")) == 1.0);
  CHECK(gram(parse_tree("seq(comp(identity),comp(relu))")) == 0.0);
}

TEST_CASE("steady state: constant population and monotone incumbent") {
  SearchConfig cfg = small_config();
  cfg.crossover_method = CrossoverMethod::None;  // mutation-only arm
  SearchHistory h = evolve(cfg);
  CHECK(h.evaluations == cfg.total_evaluations);
  REQUIRE(h.records.size() == static_cast<std::size_t>(cfg.total_evaluations));
  double best = -1e300;
  for (const auto& r : h.records) {
    CHECK(r.best_fitness >= best);
    best = r.best_fitness;
  }
  CHECK(h.best_fitness == best);
  CHECK(validate(h.best_tree).empty());
}

TEST_CASE("identical seeds give identical histories") {
  for (CrossoverMethod method : {CrossoverMethod::Rcswx, CrossoverMethod::Stx}) {
    SearchConfig cfg = small_config();
    cfg.crossover_method = method;
    cfg.seed = 99;
    SearchHistory h1 = evolve(cfg);
    SearchHistory h2 = evolve(cfg);
    REQUIRE(h1.records.size() == h2.records.size());
    for (std::size_t k = 0; k < h1.records.size(); ++k) {
      CHECK(h1.records[k].best_fitness == h2.records[k].best_fitness);
      CHECK(h1.records[k].mean_fitness == h2.records[k].mean_fitness);
      CHECK(h1.records[k].diversity == h2.records[k].diversity);
      CHECK(h1.records[k].operator_used == h2.records[k].operator_used);
    }
    CHECK(render_tree(h1.best_tree) == render_tree(h2.best_tree));
  }
}

TEST_CASE("fitness evaluation failure marks the individual and continues") {
  SearchConfig cfg = small_config();
  int calls = 0;
  cfg.fitness = [&calls](const DerivationTree& t) {
    ++calls;
    if (calls % 7 == 0) throw std::runtime_error("synthetic failure");
    return static_cast<double>(t.node_count());
  };
  SearchHistory h = evolve(cfg);
  CHECK(h.evaluations == cfg.total_evaluations);
}

TEST_CASE("crossover arms record their operator") {
  SearchConfig cfg = small_config();
  cfg.crossover_method = CrossoverMethod::Cswx;
  SearchHistory h = evolve(cfg);
  int cswx_ops = 0;
  for (const auto& r : h.records)
    if (r.operator_used.rfind("cswx", 0) == 0) ++cswx_ops;
  CHECK(cswx_ops ==
        cfg.total_evaluations - cfg.population_size);  // crossover_prob = 1.0
}

TEST_CASE("history CSV has the documented columns") {
  SearchConfig cfg = small_config();
  SearchHistory h = evolve(cfg);
  std::ostringstream out;
  h.write_csv(out, "test run");
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# test run");
  std::getline(in, line);
  CHECK(line == "iteration,best_fitness,mean_fitness,diversity,operator");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == cfg.total_evaluations);
}

TEST_CASE("config validation") {
  SearchConfig cfg = small_config();
  cfg.total_evaluations = 5;  // below population size
  CHECK_THROWS_AS(evolve(cfg), DomainError);
  SearchConfig cfg2 = small_config();
  cfg2.tournament_size = 500;
  CHECK_THROWS_AS(evolve(cfg2), DomainError);
  SearchConfig cfg3 = small_config();
  cfg3.fitness = nullptr;
  CHECK_THROWS_AS(evolve(cfg3), DomainError);
}

TEST_CASE("target search improves towards a hidden target") {
  GrammarConfig g;
  g.max_depth = 3;
  Rng trng(2026);
  DerivationTree target = sample_tree(g, trng);

  SearchConfig cfg;
  cfg.population_size = 30;
  cfg.total_evaluations = 300;
  cfg.tournament_size = 5;
  cfg.grammar.max_depth = 3;
  cfg.crossover_method = CrossoverMethod::Rcswx;
  cfg.diversity_stride = 0;  // skip diversity for speed
  cfg.fitness = target_distance_fitness(target, ScoringMatrix::sm0());
  cfg.seed = 5;
  SearchHistory h = evolve(cfg);
  CHECK(h.best_fitness > h.records.front().best_fitness - 1e-12);
  CHECK(h.best_fitness >= -20.0);
}
