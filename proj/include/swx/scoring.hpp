// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <string>

#include "swx/serialise.hpp"

namespace swx {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ScoringPreset { SM0, SM1, SM2, SM3, Custom };

inline const char* to_string(ScoringPreset p) {
  switch (p) {
    case ScoringPreset::SM0: return "sm0";
    case ScoringPreset::SM1: return "sm1";
    case ScoringPreset::SM2: return "sm2";
    case ScoringPreset::SM3: return "sm3";
    case ScoringPreset::Custom: return "custom";
  }
  return "?";
}

// Substitution and indel cost configuration.
//
// Substitution tiers for same-class node tokens:
//   identical (first/last children equal incl. hyperparams)  -> 0
//   same first/last child ops, differing hyperparams         -> c1
//   same class only                                          -> c2
//   different class                                          -> infinity
// SM3 additionally prices branching substitutions by |delta branch count|
// and branching indels by branch count (branching_weighted).
//
// A user-supplied hook can replace the tier rule entirely; the sampling-
// probability cost of the literature is expressible that way once PCFG
// weights are chosen, but no tested preset uses it.
struct ScoringMatrix {
  ScoringPreset preset = ScoringPreset::SM0;
  double c1 = 0.25;
  double c2 = 0.5;
  double indel_default = 1.0;
  double indel_separator = 0.0;
  bool branching_weighted = false;  // SM3 behaviour
  bool coarse_children = false;     // SM1/SM2: any child difference costs c2

  double (*custom_substitution)(const Token&, const Token&) = nullptr;

  static ScoringMatrix sm0() { return ScoringMatrix{}; }
  static ScoringMatrix sm1() {
    ScoringMatrix m;
    m.preset = ScoringPreset::SM1;
    m.c1 = 0.5;
    m.c2 = 0.5;
    m.coarse_children = true;
    return m;
  }
  static ScoringMatrix sm2() {
    ScoringMatrix m;
    m.preset = ScoringPreset::SM2;
    m.c1 = 0.5;
    m.c2 = 0.5;
    m.coarse_children = true;
    return m;
  }
  static ScoringMatrix sm3() {
    ScoringMatrix m;
    m.preset = ScoringPreset::SM3;
    m.branching_weighted = true;
    return m;
  }

  static ScoringMatrix preset_by_name(const std::string& name) {
    if (name == "sm0") return sm0();
    if (name == "sm1") return sm1();
    if (name == "sm2") return sm2();
    if (name == "sm3") return sm3();
    throw DomainError("unknown scoring preset: " + name);
  }

  // Custom matrix from a key=value file. Keys: c1, c2, indel_default,
  // branching_weighted. Lines starting with '#' are comments.
  static ScoringMatrix from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DomainError("cannot open scoring config: " + path);
    ScoringMatrix m;
    m.preset = ScoringPreset::Custom;
    std::string line;
    while (std::getline(f, line)) {
      std::size_t first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw DomainError("scoring config: expected key=value, got: " + line);
      auto trim = [](std::string s) {
        std::size_t a = s.find_first_not_of(" \t\r");
        std::size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      if (key == "c1") m.c1 = std::stod(val);
      else if (key == "c2") m.c2 = std::stod(val);
      else if (key == "indel_default") m.indel_default = std::stod(val);
      else if (key == "branching_weighted") m.branching_weighted = (val == "1" || val == "true");
      else throw DomainError("scoring config: unknown key '" + key + "'");
    }
    m.check();
    return m;
  }

  void check() const {
    if (c1 < 0 || c2 < c1)
      throw DomainError("scoring matrix requires 0 <= c1 <= c2");
    if (!std::isfinite(c1) || !std::isfinite(c2) || !std::isfinite(indel_default))
      throw DomainError("scoring matrix costs must be finite");
    // node indels must cost something: edit operations are the positive-cost
    // steps, and a free deletion would fall off the operation list
    if (indel_default <= 0)
      throw DomainError("scoring matrix requires indel_default > 0");
  }
};

// Cost of substituting node token `a` by node token `b`. Separator pairs are
// priced by the aligner (zero when the path admits them); start*start is the
// fixed origin cell.
inline double substitution_cost(const Token& a, const Token& b, const ScoringMatrix& m) {
  if (a.is_start() || b.is_start()) return a.is_start() && b.is_start() ? 0.0 : kInf;
  if (a.is_separator() || b.is_separator())
    return a.is_separator() && b.is_separator() ? 0.0 : kInf;
  if (m.custom_substitution) return m.custom_substitution(a, b);
  if (a.node_class != b.node_class) return kInf;

  if (m.branching_weighted &&
      (a.node_class == NodeClass::Branching2 || a.node_class == NodeClass::BranchingK)) {
    return std::abs(a.branch_count - b.branch_count);
  }

  const bool ops_match = a.first.op_name == b.first.op_name &&
                         a.last.op_name == b.last.op_name;
  const bool exact = ops_match && a.first.hyperparams == b.first.hyperparams &&
                     a.last.hyperparams == b.last.hyperparams;
  if (exact) return 0.0;
  if (m.coarse_children) return m.c2;
  return ops_match ? m.c1 : m.c2;
}

// Cost of adding or removing a single token.
inline double indel_cost(const Token& t, const ScoringMatrix& m) {
  if (t.is_separator()) return m.indel_separator;
  if (m.branching_weighted && t.is_node() &&
      (t.node_class == NodeClass::Branching2 || t.node_class == NodeClass::BranchingK))
    return t.branch_count;
  return m.indel_default;
}

}  // namespace swx
