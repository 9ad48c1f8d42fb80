// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "helpers.hpp"

using namespace swx;

namespace {

Token branch_token(int factor, const std::string& bop, std::vector<int> bh,
                   const std::string& aop, std::vector<int> ah) {
  Token t;
  t.kind = TokenKind::Node;
  t.node_class = factor == 2 ? NodeClass::Branching2 : NodeClass::BranchingK;
  t.branch_count = factor;
  t.first = {TerminalCategory::BranchingOp, bop, std::move(bh)};
  t.last = {TerminalCategory::AggregationOp, aop, std::move(ah)};
  return t;
}

Token comp_token(const std::string& op, std::vector<int> h = {}) {
  Token t;
  t.kind = TokenKind::Node;
  t.node_class = NodeClass::Computation;
  t.first = {TerminalCategory::ComputationOp, op, std::move(h)};
  t.last = t.first;
  return t;
}

}  // namespace

TEST_CASE("substitution tiers under the default matrix") {
  ScoringMatrix m = ScoringMatrix::sm0();
  Token b4 = branch_token(4, "group", {1, 4}, "cat", {1, 4});
  CHECK(substitution_cost(b4, branch_token(4, "group", {1, 4}, "cat", {1, 4}), m) == 0.0);
  CHECK(substitution_cost(b4, branch_token(8, "group", {1, 8}, "cat", {1, 8}), m) == 0.25);
  CHECK(substitution_cost(b4, branch_token(4, "clone", {4}, "add", {4}), m) == 0.5);
  CHECK(substitution_cost(b4, comp_token("identity"), m) == kInf);
}

TEST_CASE("sm1 and sm2 collapse the hyperparameter tier") {
  Token b4 = branch_token(4, "group", {1, 4}, "cat", {1, 4});
  Token b8 = branch_token(8, "group", {1, 8}, "cat", {1, 8});
  for (ScoringMatrix m : {ScoringMatrix::sm1(), ScoringMatrix::sm2()}) {
    CHECK(substitution_cost(b4, b4, m) == 0.0);
    CHECK(substitution_cost(b4, b8, m) == 0.5);
    CHECK(substitution_cost(b4, branch_token(4, "clone", {4}, "add", {4}), m) == 0.5);
    CHECK(substitution_cost(b4, comp_token("relu"), m) == kInf);
  }
}

TEST_CASE("sm3 prices branching by branch-count difference") {
  ScoringMatrix m = ScoringMatrix::sm3();
  Token b4 = branch_token(4, "group", {1, 4}, "cat", {1, 4});
  Token b8 = branch_token(8, "clone", {8}, "add", {8});
  CHECK(substitution_cost(b4, b8, m) == 4.0);
  CHECK(substitution_cost(b8, b4, m) == 4.0);
  // non-branching nodes fall back to the default tiers
  CHECK(substitution_cost(comp_token("linear", {64}), comp_token("linear", {32}), m) == 0.25);
  CHECK(substitution_cost(comp_token("linear", {64}), comp_token("relu"), m) == 0.5);
}

TEST_CASE("indel costs") {
  Token sep;
  sep.kind = TokenKind::Separator;
  sep.role = SepRole::Closer;
  CHECK(indel_cost(sep, ScoringMatrix::sm0()) == 0.0);
  CHECK(indel_cost(comp_token("relu"), ScoringMatrix::sm0()) == 1.0);
  CHECK(indel_cost(branch_token(4, "clone", {4}, "add", {4}), ScoringMatrix::sm3()) == 4.0);
  CHECK(indel_cost(branch_token(2, "clone", {2}, "add", {2}), ScoringMatrix::sm3()) == 2.0);
  CHECK(indel_cost(branch_token(4, "clone", {4}, "add", {4}), ScoringMatrix::sm0()) == 1.0);
}

TEST_CASE("substitution is zero on identical tokens and symmetric for all presets") {
  GrammarConfig cfg;
  cfg.max_depth = 5;
  Rng rng(31);
  std::vector<ScoringMatrix> presets = {ScoringMatrix::sm0(), ScoringMatrix::sm1(),
                                        ScoringMatrix::sm2(), ScoringMatrix::sm3()};
  for (int k = 0; k < 300; ++k) {
    SerialisedSequence a = serialise(sample_tree(cfg, rng));
    SerialisedSequence b = serialise(sample_tree(cfg, rng));
    for (const auto& m : presets) {
      for (const auto& ta : a.tokens) {
        if (!ta.is_node()) continue;
        CHECK(substitution_cost(ta, ta, m) == 0.0);
        for (const auto& tb : b.tokens) {
          if (!tb.is_node()) continue;
          CHECK(substitution_cost(ta, tb, m) == substitution_cost(tb, ta, m));
          if (ta.node_class != tb.node_class)
            CHECK(substitution_cost(ta, tb, m) == kInf);
        }
      }
    }
  }
}

TEST_CASE("branching(2) never substitutes with wider branching") {
  Token b2 = branch_token(2, "clone", {2}, "add", {2});
  Token b4 = branch_token(4, "clone", {4}, "add", {4});
  for (ScoringMatrix m : {ScoringMatrix::sm0(), ScoringMatrix::sm1(), ScoringMatrix::sm2(),
                          ScoringMatrix::sm3()})
    CHECK(substitution_cost(b2, b4, m) == kInf);
}

TEST_CASE("custom matrix loads from key=value file") {
  std::string path = "scoring_test_config.txt";
  {
    std::ofstream f(path);
    f << "# custom scoring\nc1 = 0.1\nc2 = 0.3\nindel_default = 2\nbranching_weighted = true\n";
  }
  ScoringMatrix m = ScoringMatrix::from_file(path);
  CHECK(m.preset == ScoringPreset::Custom);
  CHECK(m.c1 == 0.1);
  CHECK(m.c2 == 0.3);
  CHECK(m.indel_default == 2.0);
  CHECK(m.branching_weighted);
  CHECK(indel_cost(comp_token("relu"), m) == 2.0);
  std::remove(path.c_str());

  {
    std::ofstream f(path);
    f << "c1 = 0.9\nc2 = 0.1\n";
  }
  CHECK_THROWS_AS(ScoringMatrix::from_file(path), DomainError);
  std::remove(path.c_str());
}
