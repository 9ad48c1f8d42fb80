// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include "swx/rcswx.hpp"
#include "swx/rng.hpp"

namespace swx {

// ---------------------------------------------------------------------------
// Operation selection
// ---------------------------------------------------------------------------

struct OperationSelection {
  std::set<int> chosen;
  double realised_cost = 0;
  double skewness = 0;
  std::uint64_t rng_seed = 0;

  bool contains(int id) const { return chosen.count(id) != 0; }
};

// An operation is admissible in a selection unless one of its dependency
// groups has every disabler chosen and no enabler chosen.
inline bool selection_valid(const std::vector<EditOperation>& ops, const std::set<int>& chosen) {
  for (int id : chosen) {
    const EditOperation& op = ops[static_cast<std::size_t>(id)];
    for (const ConstraintGroup& g : op.groups) {
      bool all_disablers = true;
      for (int d : g.disablers)
        if (!chosen.count(d)) {
          all_disablers = false;
          break;
        }
      if (!all_disablers) continue;
      bool any_enabler = false;
      for (int e : g.enablers)
        if (chosen.count(e)) {
          any_enabler = true;
          break;
        }
      if (!any_enabler) return false;
    }
  }
  return true;
}

// Skew-normal density with location xi, scale omega, shape alpha.
inline double skew_normal_density(double x, double xi, double omega, double alpha) {
  const double z = (x - xi) / omega;
  const double phi = std::exp(-0.5 * z * z) / (omega * 2.5066282746310005024);
  const double cdf = 0.5 * (1.0 + std::erf(alpha * z / 1.4142135623730950488));
  return 2.0 * phi * cdf;
}

namespace detail {

inline double subset_cost(const std::vector<EditOperation>& ops, const std::set<int>& s) {
  double c = 0;
  for (int id : s) c += ops[static_cast<std::size_t>(id)].value;
  return c;
}

// Sequential inclusion followed by constraint repair; used above the exact
// enumeration limit.
inline std::set<int> sample_valid_subset(const std::vector<EditOperation>& ops, Rng& rng) {
  std::set<int> s;
  for (const auto& op : ops)
    if (rng.bernoulli(0.5)) s.insert(op.id);
  for (int guard = 0; guard < 16 * static_cast<int>(ops.size()) + 16; ++guard) {
    if (selection_valid(ops, s)) return s;
    // locate one violated group and repair it
    bool repaired = false;
    for (int id : s) {
      const EditOperation& op = ops[static_cast<std::size_t>(id)];
      for (const ConstraintGroup& g : op.groups) {
        bool all_dis = true;
        for (int d : g.disablers)
          if (!s.count(d)) {
            all_dis = false;
            break;
          }
        bool any_ena = false;
        for (int e : g.enablers)
          if (s.count(e)) {
            any_ena = true;
            break;
          }
        if (!all_dis || any_ena) continue;
        std::vector<std::pair<int, bool>> fixes;  // (op, insert?)
        fixes.push_back({id, false});
        for (int d : g.disablers)
          if (d != id) fixes.push_back({d, false});
        for (int e : g.enablers) fixes.push_back({e, true});
        auto [fid, ins] = fixes[rng.index(fixes.size())];
        if (ins)
          s.insert(fid);
        else
          s.erase(fid);
        repaired = true;
        break;
      }
      if (repaired) break;
    }
    if (!repaired) return s;
  }
  return {};  // empty selection is always valid
}

}  // namespace detail

// Draws a valid subset of the path's operations with probability proportional
// to a truncated skew-normal density evaluated at the subset's summed cost.
// Location and scale are totalCost/2 and totalCost/4. Subsets are enumerated
// exactly up to 16 operations; larger paths fall back to a reweighted pool of
// repaired random subsets.
inline OperationSelection select_operations(const EditPath& path, double skewness, Rng& rng) {
  OperationSelection sel;
  sel.skewness = skewness;
  const auto& ops = path.ops;
  if (ops.empty()) return sel;

  const double total = path.total_cost;
  const double xi = total / 2.0;
  const double omega = total / 4.0;

  std::vector<std::set<int>> pool;
  if (ops.size() <= 16) {
    const std::uint32_t n = static_cast<std::uint32_t>(ops.size());
    for (std::uint64_t bits = 0; bits < (1ULL << n); ++bits) {
      std::set<int> s;
      for (std::uint32_t k = 0; k < n; ++k)
        if (bits & (1ULL << k)) s.insert(static_cast<int>(k));
      if (selection_valid(ops, s)) pool.push_back(std::move(s));
    }
  } else {
    pool.reserve(4096);
    for (int k = 0; k < 4096; ++k) pool.push_back(detail::sample_valid_subset(ops, rng));
  }

  std::vector<double> weights;
  weights.reserve(pool.size());
  double sum = 0;
  for (const auto& s : pool) {
    double w = skew_normal_density(detail::subset_cost(ops, s), xi, omega, skewness);
    weights.push_back(w);
    sum += w;
  }
  std::size_t pick = 0;
  if (sum > 0) {
    double u = rng.uniform() * sum;
    double acc = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      acc += weights[k];
      if (u < acc) {
        pick = k;
        break;
      }
      pick = k;
    }
  } else {
    pick = rng.index(pool.size());
  }
  sel.chosen = pool[pick];
  sel.realised_cost = detail::subset_cost(ops, sel.chosen);
  return sel;
}

// ---------------------------------------------------------------------------
// Offspring generation
// ---------------------------------------------------------------------------

// Replays the traced path, applying the chosen operations: unselected steps
// keep the first parent's tokens, selected ones splice in the second's.
inline SerialisedSequence replay_selection(const EditPath& path, const std::set<int>& chosen) {
  SerialisedSequence out;
  Token start;
  start.kind = TokenKind::Start;
  out.tokens.push_back(start);
  for (std::size_t p = 0; p < path.steps.size(); ++p) {
    const Step& st = path.steps[p];
    const int op = path.step_op[p];
    const bool sel = op >= 0 && chosen.count(op) != 0;
    switch (st.dir) {
      case Dir::Sub:
        out.tokens.push_back(sel ? path.seq2[static_cast<std::size_t>(st.i2)]
                                 : path.seq1[static_cast<std::size_t>(st.i1)]);
        break;
      case Dir::Add:
        if (!sel) out.tokens.push_back(path.seq1[static_cast<std::size_t>(st.i1)]);
        break;
      case Dir::Rem:
        if (sel) out.tokens.push_back(path.seq2[static_cast<std::size_t>(st.i2)]);
        break;
      default:
        break;
    }
  }
  return out;
}

inline DerivationTree generate_offspring(const EditPath& path, const OperationSelection& sel) {
  SerialisedSequence seq = replay_selection(path, sel.chosen);
  DerivationTree tree;
  try {
    tree = deserialise(seq);
  } catch (const DomainError& e) {
    throw std::logic_error(std::string("offspring replay produced a malformed sequence "
                                       "(selection should have prevented this): ") +
                           e.what());
  }
  auto violations = validate(tree);
  if (!violations.empty())
    throw std::logic_error("offspring replay produced an invalid tree: " +
                           violations.front().message);
  return tree;
}

// ---------------------------------------------------------------------------
// Crossover operators
// ---------------------------------------------------------------------------

inline DerivationTree cswx_crossover(const DerivationTree& t1, const DerivationTree& t2,
                                     const ScoringMatrix& m, double skewness, Rng& rng) {
  SerialisedSequence a = serialise(t1);
  SerialisedSequence b = serialise(t2);
  AlignmentMatrix mat = align(a, b, m);
  if (!std::isfinite(mat.final_distance()))
    throw UnalignableError(
        "parents are unalignable; review the scoring matrix (cross-type costs)");
  EditPath path = trace_back(a, b, mat, m);
  if (path.ops.empty()) return t1;  // nothing to hybridise
  OperationSelection sel = select_operations(path, skewness, rng);
  return generate_offspring(path, sel);
}

inline DerivationTree rcswx_crossover(const DerivationTree& t1, const DerivationTree& t2,
                                      const ScoringMatrix& m, double skewness, Rng& rng) {
  SerialisedSequence a = serialise(t1);
  SerialisedSequence b = serialise(t2);
  RecursiveAlignment r = align_recursive(a, b, m);
  if (!std::isfinite(r.final_distance()))
    throw UnalignableError(
        "parents are unalignable; review the scoring matrix (cross-type costs)");
  EditPath path = rcswx_trace_back(a, b, r, m);
  if (path.ops.empty()) return t1;  // nothing to hybridise
  OperationSelection sel = select_operations(path, skewness, rng);
  return generate_offspring(path, sel);
}

// ---------------------------------------------------------------------------
// Subtree crossover baseline
// ---------------------------------------------------------------------------

namespace detail {

inline void collect_modules_of_kind(TreeNode& n, ModuleKind kind,
                                    std::vector<TreeNode*>& out) {
  if (n.terminal) return;
  if (n.kind == kind) out.push_back(&n);
  for (auto& c : n.children) collect_modules_of_kind(c, kind, out);
}

inline void collect_kinds(const TreeNode& n, std::set<ModuleKind>& out) {
  if (n.terminal) return;
  out.insert(n.kind);
  for (const auto& c : n.children) collect_kinds(c, out);
}

}  // namespace detail

// Swaps a subtree of t1 rooted at a module kind common to both parents with a
// subtree of the same kind from t2. Returns nothing when no common kind
// exists among the eligible ones.
inline std::optional<DerivationTree> stx_crossover(
    const DerivationTree& t1, const DerivationTree& t2, Rng& rng,
    const std::set<ModuleKind>& eligible = {ModuleKind::Sequential, ModuleKind::Branching,
                                            ModuleKind::Routing, ModuleKind::Computation}) {
  std::set<ModuleKind> k1, k2;
  detail::collect_kinds(t1.root, k1);
  detail::collect_kinds(t2.root, k2);
  std::vector<ModuleKind> common;
  for (ModuleKind k : k1)
    if (k2.count(k) && eligible.count(k)) common.push_back(k);
  if (common.empty()) return std::nullopt;

  ModuleKind kind = common[rng.index(common.size())];
  DerivationTree out = t1;
  DerivationTree donor = t2;
  std::vector<TreeNode*> sites1, sites2;
  detail::collect_modules_of_kind(out.root, kind, sites1);
  detail::collect_modules_of_kind(donor.root, kind, sites2);
  TreeNode* target = sites1[rng.index(sites1.size())];
  TreeNode* source = sites2[rng.index(sites2.size())];
  *target = *source;
  out.renumber();
  return out;
}

}  // namespace swx
