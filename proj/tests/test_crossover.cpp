// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "swx/crossover.hpp"

using namespace swx;

namespace {
const ScoringMatrix kSm0 = ScoringMatrix::sm0();

EditPath path_between(const DerivationTree& a, const DerivationTree& b) {
  SerialisedSequence sa = serialise(a), sb = serialise(b);
  RecursiveAlignment r = align_recursive(sa, sb, kSm0);
  return rcswx_trace_back(sa, sb, r, kSm0);
}
}  // namespace

TEST_CASE("empty path yields an empty selection") {
  DerivationTree t = parse_tree("seq(comp(relu),comp(identity))");
  EditPath p = path_between(t, t);
  Rng rng(1);
  OperationSelection sel = select_operations(p, 0.0, rng);
  CHECK(sel.chosen.empty());
  CHECK(sel.realised_cost == 0.0);
}

TEST_CASE("selecting every operation reproduces the second parent") {
  GrammarConfig cfg;
  cfg.max_depth = 4;
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    DerivationTree a = sample_tree(cfg, rng);
    DerivationTree b = sample_tree(cfg, rng);
    EditPath p = path_between(a, b);
    OperationSelection all;
    for (const auto& op : p.ops) all.chosen.insert(op.id);
    DerivationTree child = generate_offspring(p, all);
    CHECK(functionally_equal(child, b));
  }
}

TEST_CASE("skew-normal density: zero skew reduces to the gaussian") {
  const double xi = 5, omega = 2.5;
  for (double x : {0.0, 2.0, 5.0, 8.0, 10.0}) {
    double z = (x - xi) / omega;
    double phi = std::exp(-0.5 * z * z) / (omega * std::sqrt(2 * 3.14159265358979323846));
    CHECK(skew_normal_density(x, xi, omega, 0.0) == doctest::Approx(phi));
  }
  // positive skew shifts mass towards the second parent
  CHECK(skew_normal_density(8.0, 5, 2.5, 3.0) > skew_normal_density(2.0, 5, 2.5, 3.0));
}

TEST_CASE("selection respects dependency groups over fuzzed draws") {
  GrammarConfig cfg;
  cfg.max_depth = 4;
  Rng rng(5);
  int draws = 0;
  while (draws < 10000) {
    DerivationTree a = sample_tree(cfg, rng);
    DerivationTree b = sample_tree(cfg, rng);
    EditPath p = path_between(a, b);
    for (int r = 0; r < 20 && draws < 10000; ++r) {
      OperationSelection sel = select_operations(p, 0.0, rng);
      ++draws;
      // independent rule evaluation
      REQUIRE(selection_valid(p.ops, sel.chosen));
      // independent structural simulation
      REQUIRE(swx_test::selection_structurally_valid(p, sel.chosen));
      double cost = 0;
      for (int id : sel.chosen) cost += p.ops[static_cast<std::size_t>(id)].value;
      CHECK(sel.realised_cost == doctest::Approx(cost));
      CHECK(sel.realised_cost >= 0);
      CHECK(sel.realised_cost <= p.total_cost + 1e-9);
    }
  }
}

TEST_CASE("rule-valid subsets and structurally valid subsets coincide") {
  GrammarConfig cfg;
  cfg.max_depth = 3;
  Rng rng(7);
  for (int k = 0; k < 200; ++k) {
    DerivationTree a = sample_tree(cfg, rng);
    DerivationTree b = sample_tree(cfg, rng);
    EditPath p = path_between(a, b);
    if (p.ops.size() > 10) continue;
    const std::uint32_t n = static_cast<std::uint32_t>(p.ops.size());
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
      std::set<int> s;
      for (std::uint32_t q = 0; q < n; ++q)
        if (bits & (1u << q)) s.insert(static_cast<int>(q));
      bool by_rules = selection_valid(p.ops, s);
      bool by_sim = swx_test::selection_structurally_valid(p, s);
      if (by_rules != by_sim) {
        CAPTURE(render_tree(a));
        CAPTURE(render_tree(b));
        CAPTURE(bits);
        REQUIRE(by_rules == by_sim);
      }
      if (by_rules) {
        OperationSelection sel;
        sel.chosen = s;
        DerivationTree child = generate_offspring(p, sel);
        CHECK(validate(child).empty());
      }
    }
  }
}

TEST_CASE("crossover of a tree with itself returns the tree") {
  GrammarConfig cfg;
  cfg.max_depth = 4;
  Rng rng(11);
  for (int k = 0; k < 50; ++k) {
    DerivationTree t = sample_tree(cfg, rng);
    DerivationTree child = rcswx_crossover(t, t, kSm0, 0.0, rng);
    CHECK(structurally_equal(child, t));
    DerivationTree child2 = cswx_crossover(t, t, kSm0, 0.0, rng);
    CHECK(structurally_equal(child2, t));
  }
}

TEST_CASE("empty selection keeps the first parent's architecture") {
  GrammarConfig cfg;
  cfg.max_depth = 4;
  Rng rng(12);
  for (int k = 0; k < 50; ++k) {
    DerivationTree a = sample_tree(cfg, rng);
    DerivationTree b = sample_tree(cfg, rng);
    EditPath p = path_between(a, b);
    OperationSelection none;
    DerivationTree child = generate_offspring(p, none);
    CHECK(functionally_equal(child, a));
  }
}

TEST_CASE("crossover determinism under a fixed seed") {
  GrammarConfig cfg;
  cfg.max_depth = 5;
  Rng sampler(13);
  DerivationTree a = sample_tree(cfg, sampler);
  DerivationTree b = sample_tree(cfg, sampler);
  for (std::uint64_t seed : {0ULL, 7ULL, 99ULL}) {
    Rng r1(seed), r2(seed);
    CHECK(render_tree(rcswx_crossover(a, b, kSm0, 0.0, r1)) ==
          render_tree(rcswx_crossover(a, b, kSm0, 0.0, r2)));
    Rng r3(seed), r4(seed);
    CHECK(render_tree(cswx_crossover(a, b, kSm0, 0.25, r3)) ==
          render_tree(cswx_crossover(a, b, kSm0, 0.25, r4)));
  }
}

TEST_CASE("a thousand crossovers all produce valid offspring") {
  GrammarConfig cfg;
  cfg.max_depth = 5;
  Rng rng(17);
  for (int k = 0; k < 1000; ++k) {
    DerivationTree a = sample_tree(cfg, rng);
    DerivationTree b = sample_tree(cfg, rng);
    DerivationTree child = rng.bernoulli(0.5) ? rcswx_crossover(a, b, kSm0, 0.0, rng)
                                              : cswx_crossover(a, b, kSm0, 0.0, rng);
    auto v = validate(child);
    if (!v.empty()) {
      CAPTURE(render_tree(a));
      CAPTURE(render_tree(b));
      CAPTURE(render_tree(child));
      REQUIRE(v.empty());
    }
  }
}

TEST_CASE("offspring lie on a shortest path between the parents") {
  GrammarConfig cfg;
  cfg.max_depth = 4;
  Rng rng(19);
  for (int k = 0; k < 500; ++k) {
    DerivationTree a = sample_tree(cfg, rng);
    DerivationTree b = sample_tree(cfg, rng);
    double d = rcswx_distance(a, b, kSm0);
    DerivationTree child = rcswx_crossover(a, b, kSm0, 0.0, rng);
    double da = rcswx_distance(child, a, kSm0);
    double db = rcswx_distance(child, b, kSm0);
    if (da + db > d + 1e-9) {
      CAPTURE(render_tree(a));
      CAPTURE(render_tree(b));
      CAPTURE(render_tree(child));
      REQUIRE(da + db <= d + 1e-9);
    }
  }
}

TEST_CASE("unalignable parents raise an advisory error") {
  ScoringMatrix hostile;
  hostile.indel_default = kInf;
  DerivationTree a = parse_tree("comp(relu)");
  DerivationTree b = parse_tree("route(im2col,3,1,comp(relu),col2im,3,1)");
  Rng rng(1);
  CHECK_THROWS_AS(cswx_crossover(a, b, hostile, 0.0, rng), UnalignableError);
}

TEST_CASE("subtree crossover swaps at a shared module kind") {
  Rng rng(23);
  SUBCASE("single-computation trees swap terminals") {
    DerivationTree a = parse_tree("comp(relu)");
    DerivationTree b = parse_tree("comp(linear,64)");
    auto child = stx_crossover(a, b, rng);
    REQUIRE(child.has_value());
    CHECK(render_tree(*child) == "comp(linear,64)");
  }
  SUBCASE("restricted kind set yields failure when disjoint") {
    DerivationTree a = parse_tree("comp(relu)");
    DerivationTree b = parse_tree("route(im2col,3,1,comp(relu),col2im,3,1)");
    auto child = stx_crossover(a, b, rng, {ModuleKind::Routing});
    CHECK(!child.has_value());
  }
  SUBCASE("fuzzed offspring always validate") {
    GrammarConfig cfg;
    cfg.max_depth = 5;
    for (int k = 0; k < 1000; ++k) {
      DerivationTree a = sample_tree(cfg, rng);
      DerivationTree b = sample_tree(cfg, rng);
      auto child = stx_crossover(a, b, rng);
      REQUIRE(child.has_value());
      auto v = validate(*child);
      if (!v.empty()) {
        CAPTURE(render_tree(*child));
        REQUIRE(v.empty());
      }
    }
  }
}

TEST_CASE("large paths fall back to sampled selections that stay valid") {
  GrammarConfig cfg;
  cfg.max_depth = 7;
  Rng rng(29);
  int seen_large = 0;
  for (int k = 0; k < 200 && seen_large < 10; ++k) {
    DerivationTree a = sample_tree(cfg, rng);
    DerivationTree b = sample_tree(cfg, rng);
    EditPath p = path_between(a, b);
    if (p.ops.size() <= 16) continue;
    ++seen_large;
    OperationSelection sel = select_operations(p, 0.0, rng);
    CHECK(selection_valid(p.ops, sel.chosen));
    DerivationTree child = generate_offspring(p, sel);
    CHECK(validate(child).empty());
  }
  CHECK(seen_large >= 5);
}
