// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"

using namespace swx;

TEST_CASE("parse smallest tree") {
  DerivationTree t = parse_tree("comp(identity)");
  CHECK(t.root.kind == ModuleKind::Computation);
  CHECK(t.root.children.size() == 1);
  CHECK(t.root.children[0].term.op_name == "identity");
  CHECK(render_tree(t) == "comp(identity)");
}

TEST_CASE("parse sequential with hyperparameters") {
  DerivationTree t = parse_tree("seq(comp(linear,64), comp(relu))");
  CHECK(t.root.kind == ModuleKind::Sequential);
  CHECK(t.root.children[0].children[0].term.op_name == "linear");
  CHECK(t.root.children[0].children[0].term.hyperparams == std::vector<int>{64});
  CHECK(render_tree(t) == "seq(comp(linear,64),comp(relu))");
}

TEST_CASE("parse skip-connection branching") {
  DerivationTree t = parse_tree("branch2(clone,2; comp(linear,64); comp(identity); add,2)");
  CHECK(t.root.kind == ModuleKind::Branching);
  CHECK(t.root.branch_factor == 2);
  REQUIRE(t.root.children.size() == 4);
  CHECK(t.root.children[0].term.category == TerminalCategory::BranchingOp);
  CHECK(t.root.children[3].term.category == TerminalCategory::AggregationOp);
  CHECK(t.root.children[1].children[0].term.op_name == "linear");
}

TEST_CASE("parse errors carry position and reason") {
  CHECK_THROWS_AS(parse_tree("comp(conv)"), ParseError);            // unknown op
  CHECK_THROWS_AS(parse_tree("comp(linear)"), ParseError);          // arity
  CHECK_THROWS_AS(parse_tree("seq(comp(relu))"), ParseError);       // missing child
  CHECK_THROWS_AS(parse_tree("branch2(clone,2;comp(relu);add,2)"), ParseError);
  CHECK_THROWS_AS(parse_tree("comp(relu) trailing"), ParseError);
}

TEST_CASE("render/parse round-trip on the corpus") {
  auto trees = read_trees_file(swx_test::fixture("corpus.trees"));
  REQUIRE(trees.size() >= 8);
  for (const auto& t : trees) {
    std::string canonical = render_tree(t);
    DerivationTree again = parse_tree(canonical);
    CHECK(render_tree(again) == canonical);
  }
}

TEST_CASE("validate rejects arity and category violations") {
  DerivationTree t = parse_tree("branch2(clone,2;comp(relu);comp(identity);add,2)");
  SUBCASE("valid as parsed") { CHECK(validate(t).empty()); }
  SUBCASE("branching(2) with three children") {
    t.root.children.pop_back();
    CHECK(!validate(t).empty());
  }
  SUBCASE("computation with a branching-op child") {
    DerivationTree c = parse_tree("comp(relu)");
    c.root.children[0].term.category = TerminalCategory::BranchingOp;
    c.root.children[0].term.op_name = "clone";
    c.root.children[0].term.hyperparams = {2};
    CHECK(!validate(c).empty());
  }
  SUBCASE("duplicate node ids") {
    t.root.children[1].node_id = t.root.node_id;
    CHECK(!validate(t).empty());
  }
}

TEST_CASE("sampling respects depth and is deterministic") {
  GrammarConfig cfg;
  SUBCASE("max depth 1 forces computation") {
    cfg.max_depth = 1;
    Rng rng(7);
    for (int k = 0; k < 50; ++k) {
      DerivationTree t = sample_tree(cfg, rng);
      CHECK(t.root.kind == ModuleKind::Computation);
    }
  }
  SUBCASE("same seed, same tree") {
    cfg.max_depth = 6;
    Rng a(42), b(42);
    for (int k = 0; k < 20; ++k)
      CHECK(render_tree(sample_tree(cfg, a)) == render_tree(sample_tree(cfg, b)));
  }
  SUBCASE("depth bound holds") {
    cfg.max_depth = 4;
    Rng rng(3);
    std::function<int(const TreeNode&)> module_depth = [&](const TreeNode& n) -> int {
      if (n.terminal) return 0;
      int d = 0;
      for (const auto& c : n.children) d = std::max(d, module_depth(c));
      return d + 1;
    };
    for (int k = 0; k < 200; ++k) CHECK(module_depth(sample_tree(cfg, rng).root) <= 4);
  }
}

TEST_CASE("sampled trees always validate") {
  GrammarConfig cfg;
  cfg.max_depth = 5;
  Rng rng(11);
  for (int k = 0; k < 10000; ++k) {
    DerivationTree t = sample_tree(cfg, rng);
    auto v = validate(t);
    if (!v.empty()) {
      CAPTURE(render_tree(t));
      REQUIRE(v.empty());
    }
  }
}

TEST_CASE("root expansion frequencies match the configured weights") {
  GrammarConfig cfg;
  cfg.max_depth = 6;
  Rng rng(2024);
  const int n = 10000;
  int counts[kExpansionCount] = {0};
  for (int k = 0; k < n; ++k) {
    DerivationTree t = sample_tree(cfg, rng);
    Expansion e;
    if (t.root.kind == ModuleKind::Sequential) e = Expansion::Sequential;
    else if (t.root.kind == ModuleKind::Routing) e = Expansion::Routing;
    else if (t.root.kind == ModuleKind::Computation) e = Expansion::Computation;
    else
      e = t.root.branch_factor == 2   ? Expansion::Branching2
          : t.root.branch_factor == 4 ? Expansion::Branching4
                                      : Expansion::Branching8;
    counts[static_cast<int>(e)]++;
  }
  for (int i = 0; i < kExpansionCount; ++i) {
    double p = cfg.weights[i];
    double sigma = std::sqrt(p * (1 - p) * n);
    CHECK(std::abs(counts[i] - p * n) <= 3 * sigma + 1);
  }
}

TEST_CASE("mutation produces valid trees and is deterministic") {
  GrammarConfig cfg;
  cfg.max_depth = 5;
  Rng rng(5);
  SUBCASE("fuzz validity") {
    for (int k = 0; k < 10000; ++k) {
      DerivationTree t = sample_tree(cfg, rng);
      DerivationTree m = mutate(t, cfg, rng);
      auto v = validate(m);
      if (!v.empty()) {
        CAPTURE(render_tree(t));
        CAPTURE(render_tree(m));
        REQUIRE(v.empty());
      }
    }
  }
  SUBCASE("identical seed gives identical mutant") {
    DerivationTree t = sample_tree(cfg, rng);
    Rng a(99), b(99);
    CHECK(render_tree(mutate(t, cfg, a)) == render_tree(mutate(t, cfg, b)));
  }
  SUBCASE("depth-1 tree mutates its only terminal site") {
    GrammarConfig shallow;
    shallow.max_depth = 1;
    Rng r(1);
    DerivationTree t = sample_tree(shallow, r);
    DerivationTree m = mutate(t, shallow, r);
    CHECK(m.root.kind == ModuleKind::Computation);
    CHECK(validate(m).empty());
  }
}

TEST_CASE("canonical form and functional equality") {
  DerivationTree a = parse_tree("branch2(clone,2;comp(linear,64);comp(identity);add,2)");
  DerivationTree b = parse_tree("branch2(clone,2;comp(identity);comp(linear,64);add,2)");
  CHECK(!structurally_equal(a, b));
  CHECK(functionally_equal(a, b));

  DerivationTree c = parse_tree("seq(seq(comp(relu),comp(identity)),comp(pos-enc))");
  DerivationTree d = parse_tree("seq(comp(relu),seq(comp(identity),comp(pos-enc)))");
  CHECK(functionally_equal(c, d));
  CHECK(!functionally_equal(a, c));
}

TEST_CASE("grammar config validation") {
  GrammarConfig cfg;
  cfg.weights[0] += 0.5;
  CHECK_THROWS_AS(cfg.validate_config(), DomainError);
  GrammarConfig bad_depth;
  bad_depth.max_depth = 0;
  CHECK_THROWS_AS(bad_depth.validate_config(), DomainError);
}
