// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "swx/crossover.hpp"

using namespace swx;

namespace {
const ScoringMatrix kSm0 = ScoringMatrix::sm0();
}

TEST_CASE("identity alignment is zero with a diagonal path") {
  DerivationTree t = swx_test::load_fixture_tree("corpus.trees");
  GrammarConfig cfg;
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    DerivationTree s = sample_tree(cfg, rng);
    SerialisedSequence seq = serialise(s);
    AlignmentMatrix m = align(seq, seq, kSm0);
    CHECK(m.final_distance() == 0.0);
    int i = m.rows - 1, j = m.cols - 1;
    while (i != 0 || j != 0) {
      REQUIRE(m.dir(i, j) == Dir::Sub);
      --i;
      --j;
    }
  }
  (void)t;
}

TEST_CASE("two-token sequences: same class, different op costs 0.5") {
  SerialisedSequence a = serialise(parse_tree("comp(relu)"));
  SerialisedSequence b = serialise(parse_tree("comp(identity)"));
  AlignmentMatrix m = align(a, b, kSm0);
  CHECK(m.final_distance() == 0.5);
}

TEST_CASE("transposing the inputs transposes the matrix and keeps the distance") {
  GrammarConfig cfg;
  cfg.max_depth = 5;
  Rng rng(77);
  for (int k = 0; k < 50; ++k) {
    SerialisedSequence a = serialise(sample_tree(cfg, rng));
    SerialisedSequence b = serialise(sample_tree(cfg, rng));
    AlignmentMatrix ab = align(a, b, kSm0);
    AlignmentMatrix ba = align(b, a, kSm0);
    CHECK(ab.final_distance() == ba.final_distance());
    for (int i = 0; i < ab.rows; ++i)
      for (int j = 0; j < ab.cols; ++j) CHECK(ab.at(i, j) == ba.at(j, i));
  }
}

TEST_CASE("aligning against the bare start sequence costs the pure indels") {
  SerialisedSequence a = serialise(parse_tree("seq(comp(relu),comp(identity))"));
  SerialisedSequence start_only;
  Token st;
  st.kind = TokenKind::Start;
  start_only.tokens.push_back(st);
  AlignmentMatrix m = align(a, start_only, kSm0);
  CHECK(m.final_distance() == 2.0);

  SerialisedSequence b = serialise(
      parse_tree("branch2(clone,2;comp(relu);comp(identity);add,2)"));
  AlignmentMatrix m2 = align(start_only, b, kSm0);
  CHECK(m2.final_distance() == 3.0);  // opener + two nodes; separators are free
}

TEST_CASE("appending an identical suffix never increases the distance") {
  GrammarConfig cfg;
  cfg.max_depth = 4;
  Rng rng(101);
  for (int k = 0; k < 100; ++k) {
    DerivationTree a = sample_tree(cfg, rng);
    DerivationTree b = sample_tree(cfg, rng);
    DerivationTree suffix = sample_tree(cfg, rng);
    double base = cswx_distance(a, b, kSm0);
    DerivationTree a2, b2;
    a2.root.kind = ModuleKind::Sequential;
    a2.root.children = {a.root, suffix.root};
    a2.renumber();
    b2.root.kind = ModuleKind::Sequential;
    b2.root.children = {b.root, suffix.root};
    b2.renumber();
    CHECK(cswx_distance(a2, b2, kSm0) <= base + 1e-12);
  }
}

TEST_CASE("final distance is invariant to the back-pointer tie-break") {
  GrammarConfig cfg;
  cfg.max_depth = 4;
  Rng rng(13);
  auto orders = TieBreak::all_orders();
  for (int k = 0; k < 200; ++k) {
    SerialisedSequence a = serialise(sample_tree(cfg, rng));
    SerialisedSequence b = serialise(sample_tree(cfg, rng));
    double ref = align(a, b, kSm0, orders[0]).final_distance();
    for (std::size_t o = 1; o < orders.size(); ++o)
      CHECK(align(a, b, kSm0, orders[o]).final_distance() == ref);
  }
}

TEST_CASE("valid_path rules on separators and node classes") {
  SerialisedSequence a =
      serialise(parse_tree("branch2(clone,2;comp(relu);comp(identity);add,2)"));
  SerialisedSequence b =
      serialise(parse_tree("branch2(clone,2;comp(pos-enc);comp(linear,64);cat,1,2)"));
  AlignmentMatrix m = align(a, b, kSm0);
  // openers substituted into each other; both closers may substitute
  CHECK(m.final_distance() == doctest::Approx(1.5));  // opener 0.5 + two comps
  CHECK(valid_path(m, 5, 5, Dir::Sub));  // closer x closer on the stored path

  // a branching node never substitutes a computation node
  SerialisedSequence c = serialise(parse_tree("comp(identity)"));
  AlignmentMatrix m2 = align(a, c, kSm0);
  CHECK(!valid_path(m2, 1, 1, Dir::Sub));

  // adding a closer whose opener was substituted along the path is rejected:
  // on the m (branch2 x branch2) matrix the openers substituted at (1,1), so
  // deleting the divider at (3, 1) would orphan it
  bool divider_delete_ok = valid_path(m, 3, 1, Dir::Add);
  CHECK(!divider_delete_ok);
}

TEST_CASE("matrix invariants: monotone chains that reach the origin") {
  GrammarConfig cfg;
  cfg.max_depth = 4;
  Rng rng(271);
  for (int k = 0; k < 40; ++k) {
    SerialisedSequence a = serialise(sample_tree(cfg, rng));
    SerialisedSequence b = serialise(sample_tree(cfg, rng));
    AlignmentMatrix m = align(a, b, kSm0);
    CHECK(m.at(0, 0) == 0.0);
    for (int i = 0; i < m.rows; ++i)
      for (int j = 0; j < m.cols; ++j) {
        if (!std::isfinite(m.at(i, j))) continue;
        // walk the stored chain to the origin; costs never increase backwards
        int ci = i, cj = j;
        double cost = m.at(ci, cj);
        int guard = m.rows + m.cols + 1;
        while ((ci != 0 || cj != 0) && guard-- > 0) {
          Dir d = m.dir(ci, cj);
          REQUIRE(d != Dir::None);
          if (d == Dir::Sub) {
            --ci;
            --cj;
          } else if (d == Dir::Add) {
            --ci;
          } else {
            --cj;
          }
          REQUIRE(std::isfinite(m.at(ci, cj)));
          REQUIRE(m.at(ci, cj) <= cost + 1e-12);
          cost = m.at(ci, cj);
        }
        REQUIRE((ci == 0 && cj == 0));
      }
  }
}

TEST_CASE("trace_back on identical sequences yields no operations") {
  SerialisedSequence a = serialise(
      parse_tree("seq(route(im2col,3,1,comp(relu),col2im,3,1),comp(identity))"));
  AlignmentMatrix m = align(a, a, kSm0);
  EditPath p = trace_back(a, a, m, kSm0);
  CHECK(p.ops.empty());
  CHECK(p.total_cost == 0.0);
}

TEST_CASE("every operation lies on the traced path") {
  GrammarConfig cfg;
  cfg.max_depth = 5;
  Rng rng(999);
  for (int k = 0; k < 100; ++k) {
    SerialisedSequence a = serialise(sample_tree(cfg, rng));
    SerialisedSequence b = serialise(sample_tree(cfg, rng));
    AlignmentMatrix m = align(a, b, kSm0);
    EditPath p = trace_back(a, b, m, kSm0);
    double sum = 0;
    for (const auto& op : p.ops) {
      REQUIRE(op.step >= 0);
      REQUIRE(op.step < static_cast<int>(p.steps.size()));
      const Step& st = p.steps[static_cast<std::size_t>(op.step)];
      if (op.i >= 0) CHECK(st.i1 == op.i);
      if (op.j >= 0) CHECK(st.i2 == op.j);
      sum += op.value;
    }
    CHECK(sum == doctest::Approx(m.final_distance()));
  }
}

TEST_CASE("worked example: the five-operation edit path") {
  DerivationTree p1 = swx_test::load_fixture_tree("worked_parent1.tree");
  DerivationTree p2 = swx_test::load_fixture_tree("worked_parent2.tree");
  SerialisedSequence a = serialise(p1);
  SerialisedSequence b = serialise(p2);
  AlignmentMatrix m = align(a, b, kSm0);
  CHECK(m.final_distance() == doctest::Approx(4.0));

  EditPath path = trace_back(a, b, m, kSm0);
  REQUIRE(path.ops.size() == 5);

  // 1. removal of the leftmost computation node
  CHECK(path.ops[0].op_type == OpType::RemoveNode);
  CHECK(a[static_cast<std::size_t>(path.ops[0].i)].first.op_name == "identity");
  // 2. addition of a routing enclosure
  CHECK(path.ops[1].op_type == OpType::AddEnclosure);
  CHECK(b[static_cast<std::size_t>(path.ops[1].j)].node_class == NodeClass::Routing);
  // 3. positional encoding becomes a relu
  CHECK(path.ops[2].op_type == OpType::Substitute);
  CHECK(a[static_cast<std::size_t>(path.ops[2].i)].first.op_name == "pos-enc");
  CHECK(b[static_cast<std::size_t>(path.ops[2].j)].first.op_name == "relu");
  // 4. addition of a branching(4) enclosure
  CHECK(path.ops[3].op_type == OpType::AddEnclosure);
  CHECK(b[static_cast<std::size_t>(path.ops[3].j)].node_class == NodeClass::BranchingK);
  CHECK(b[static_cast<std::size_t>(path.ops[3].j)].branch_count == 4);
  // 5. positional encoding becomes a linear layer
  CHECK(path.ops[4].op_type == OpType::Substitute);
  CHECK(a[static_cast<std::size_t>(path.ops[4].i)].first.op_name == "pos-enc");
  CHECK(b[static_cast<std::size_t>(path.ops[4].j)].first.op_name == "linear");

  // cumulative prefixes produce the four intermediate architectures
  const std::vector<std::string> expected = {
      "seq(comp(softmax,1),seq(comp(pos-enc),comp(pos-enc)))",
      "seq(comp(softmax,1),seq(route(im2col,3,1,comp(pos-enc),col2im,3,1),comp(pos-enc)))",
      "seq(comp(softmax,1),seq(route(im2col,3,1,comp(relu),col2im,3,1),comp(pos-enc)))",
      "seq(comp(softmax,1),seq(route(im2col,3,1,comp(relu),col2im,3,1),"
      "branch4(clone,4;comp(pos-enc);add,4)))",
  };
  std::set<int> chosen;
  for (std::size_t k = 0; k < 4; ++k) {
    chosen.insert(static_cast<int>(k));
    OperationSelection sel;
    sel.chosen = chosen;
    DerivationTree mid = generate_offspring(path, sel);
    CHECK(render_tree(mid) == expected[k]);
  }
  chosen.insert(4);
  OperationSelection all;
  all.chosen = chosen;
  DerivationTree full = generate_offspring(path, all);
  CHECK(functionally_equal(full, p2));
}

TEST_CASE("dependency groups forbid emptying a kept enclosure") {
  SerialisedSequence a =
      serialise(parse_tree("branch2(clone,2;comp(relu);comp(identity);add,2)"));
  SerialisedSequence b = serialise(parse_tree("comp(relu)"));
  AlignmentMatrix m = align(a, b, kSm0);
  EditPath p = trace_back(a, b, m, kSm0);
  // removal of the enclosure plus removal of the second branch's node
  REQUIRE(p.ops.size() == 2);
  const EditOperation* enclosure = nullptr;
  const EditOperation* node = nullptr;
  for (const auto& op : p.ops) {
    if (op.op_type == OpType::RemoveEnclosure) enclosure = &op;
    if (op.op_type == OpType::RemoveNode) node = &op;
  }
  REQUIRE(enclosure != nullptr);
  REQUIRE(node != nullptr);

  CHECK(selection_valid(p.ops, {}));
  CHECK(selection_valid(p.ops, {enclosure->id}));
  CHECK(selection_valid(p.ops, {enclosure->id, node->id}));
  // deleting the branch contents while keeping the enclosure empties a branch
  CHECK(!selection_valid(p.ops, {node->id}));
}

TEST_CASE("dependency groups make a pure insertion self-disabled") {
  SerialisedSequence a = serialise(parse_tree("comp(relu)"));
  SerialisedSequence b =
      serialise(parse_tree("branch2(clone,2;comp(relu);comp(identity);add,2)"));
  AlignmentMatrix m = align(a, b, kSm0);
  EditPath p = trace_back(a, b, m, kSm0);
  REQUIRE(p.ops.size() == 2);
  const EditOperation* enclosure = nullptr;
  const EditOperation* node = nullptr;
  for (const auto& op : p.ops) {
    if (op.op_type == OpType::AddEnclosure) enclosure = &op;
    if (op.op_type == OpType::AddNode) node = &op;
  }
  REQUIRE(enclosure != nullptr);
  REQUIRE(node != nullptr);

  // the enclosure wraps the kept relu in one branch, but its second branch
  // is pure insertion: the enclosure alone would leave that branch empty
  CHECK(!selection_valid(p.ops, {enclosure->id}));
  CHECK(selection_valid(p.ops, {enclosure->id, node->id}));
  CHECK(selection_valid(p.ops, {node->id}));
  CHECK(selection_valid(p.ops, {}));
}

TEST_CASE("unalignable inputs are reported") {
  ScoringMatrix hostile;  // constructed directly: infinite indels
  hostile.indel_default = kInf;
  SerialisedSequence a = serialise(parse_tree("comp(relu)"));
  SerialisedSequence b = serialise(parse_tree("route(im2col,3,1,comp(relu),col2im,3,1)"));
  AlignmentMatrix m = align(a, b, hostile);
  CHECK(!std::isfinite(m.final_distance()));
  CHECK_THROWS_AS(trace_back(a, b, m, hostile), UnalignableError);
  CHECK_THROWS_AS(cswx_distance(parse_tree("comp(relu)"),
                                parse_tree("route(im2col,3,1,comp(relu),col2im,3,1)"),
                                hostile),
                  UnalignableError);
}

TEST_CASE("cswx distance on trees: identity, symmetry, triangle") {
  GrammarConfig cfg;
  cfg.max_depth = 4;
  Rng rng(555);
  for (int k = 0; k < 150; ++k) {
    DerivationTree a = sample_tree(cfg, rng);
    DerivationTree b = sample_tree(cfg, rng);
    DerivationTree c = sample_tree(cfg, rng);
    CHECK(cswx_distance(a, a, kSm0) == 0.0);
    double ab = cswx_distance(a, b, kSm0);
    CHECK(ab == cswx_distance(b, a, kSm0));
    CHECK(ab >= 0);
    CHECK(cswx_distance(a, c, kSm0) <= ab + cswx_distance(b, c, kSm0) + 1e-9);
  }
}

TEST_CASE("replaying every traced operation rebuilds the second tree") {
  GrammarConfig cfg;
  cfg.max_depth = 5;
  Rng rng(31337);
  for (int k = 0; k < 1000; ++k) {
    DerivationTree a = sample_tree(cfg, rng);
    DerivationTree b = sample_tree(cfg, rng);
    SerialisedSequence sa = serialise(a);
    SerialisedSequence sb = serialise(b);
    AlignmentMatrix m = align(sa, sb, kSm0);
    EditPath p = trace_back(sa, sb, m, kSm0);
    std::set<int> all;
    for (const auto& op : p.ops) all.insert(op.id);
    OperationSelection sel;
    sel.chosen = all;
    DerivationTree rebuilt = generate_offspring(p, sel);
    CHECK(validate(rebuilt).empty());
    if (!functionally_equal(rebuilt, b)) {
      CAPTURE(render_tree(a));
      CAPTURE(render_tree(b));
      CAPTURE(render_tree(rebuilt));
      REQUIRE(functionally_equal(rebuilt, b));
    }
  }
}
