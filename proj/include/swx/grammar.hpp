// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "swx/rng.hpp"

namespace swx {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class DomainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DomainError {
public:
  ParseError(const std::string& msg, int line, int column)
      : DomainError(msg + " at line " + std::to_string(line) + ", column " +
                    std::to_string(column)),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

private:
  int line_, column_;
};

// ---------------------------------------------------------------------------
// Terminals and modules
// ---------------------------------------------------------------------------

enum class TerminalCategory {
  BranchingOp,
  AggregationOp,
  PreRoutingOp,
  PostRoutingOp,
  ComputationOp,
};

inline const char* to_string(TerminalCategory c) {
  switch (c) {
    case TerminalCategory::BranchingOp: return "branching-op";
    case TerminalCategory::AggregationOp: return "aggregation-op";
    case TerminalCategory::PreRoutingOp: return "pre-routing-op";
    case TerminalCategory::PostRoutingOp: return "post-routing-op";
    case TerminalCategory::ComputationOp: return "computation-op";
  }
  return "?";
}

// A grammar terminal: operation name plus its integer hyperparameters.
struct TerminalKind {
  TerminalCategory category = TerminalCategory::ComputationOp;
  std::string op_name;
  std::vector<int> hyperparams;

  bool operator==(const TerminalKind& o) const {
    return category == o.category && op_name == o.op_name && hyperparams == o.hyperparams;
  }
  bool operator!=(const TerminalKind& o) const { return !(*this == o); }

  std::string label() const {
    std::string s = op_name;
    for (int h : hyperparams) {
      s += ':';
      s += std::to_string(h);
    }
    return s;
  }
};

enum class ModuleKind { Sequential, Branching, Routing, Computation };

inline const char* to_string(ModuleKind k) {
  switch (k) {
    case ModuleKind::Sequential: return "sequential";
    case ModuleKind::Branching: return "branching";
    case ModuleKind::Routing: return "routing";
    case ModuleKind::Computation: return "computation";
  }
  return "?";
}

// One node of a derivation tree. Value type: children are held by value so
// trees copy and compare structurally.
struct TreeNode {
  bool terminal = false;
  TerminalKind term;            // when terminal
  ModuleKind kind = ModuleKind::Computation;  // when internal
  int branch_factor = 0;        // Branching only: 2, 4 or 8
  int node_id = -1;             // unique within a tree after renumbering
  std::vector<TreeNode> children;

  bool is_module() const { return !terminal; }
};

struct DerivationTree {
  TreeNode root;
  std::string tree_id;  // optional label carried through corpus files

  int node_count() const {
    int n = 0;
    count(root, n);
    return n;
  }

  int depth() const { return depth_of(root); }

  // Assign pre-order ids; call after any structural edit.
  void renumber() {
    int next = 0;
    renumber(root, next);
  }

private:
  static void count(const TreeNode& n, int& acc) {
    ++acc;
    for (const auto& c : n.children) count(c, acc);
  }
  static int depth_of(const TreeNode& n) {
    int d = 0;
    for (const auto& c : n.children) d = std::max(d, depth_of(c));
    return d + 1;
  }
  static void renumber(TreeNode& n, int& next) {
    n.node_id = next++;
    for (auto& c : n.children) renumber(c, next);
  }
};

// ---------------------------------------------------------------------------
// Terminal registry
// ---------------------------------------------------------------------------

// Registry entry: operation name, category, hyperparameter arity and the
// value set per hyperparameter slot used by the sampler.
struct RegistryEntry {
  std::string op_name;
  TerminalCategory category;
  std::vector<std::vector<int>> value_sets;  // one set per hyperparameter

  std::size_t arity() const { return value_sets.size(); }
};

class TerminalRegistry {
public:
  TerminalRegistry() = default;

  void add(RegistryEntry e) { entries_.push_back(std::move(e)); }

  const RegistryEntry* find(std::string_view op) const {
    for (const auto& e : entries_)
      if (e.op_name == op) return &e;
    return nullptr;
  }

  std::vector<const RegistryEntry*> by_category(TerminalCategory c) const {
    std::vector<const RegistryEntry*> out;
    for (const auto& e : entries_)
      if (e.category == c) out.push_back(&e);
    return out;
  }

  const std::vector<RegistryEntry>& entries() const { return entries_; }

  // Desk-scale terminal inventory; wide enough for skip connections,
  // grouped branching, routing and the usual computations.
  static TerminalRegistry standard() {
    TerminalRegistry r;
    r.add({"clone", TerminalCategory::BranchingOp, {{2, 4, 8}}});
    r.add({"group", TerminalCategory::BranchingOp, {{1, 2}, {2, 4, 8}}});
    r.add({"add", TerminalCategory::AggregationOp, {{2, 4, 8}}});
    r.add({"cat", TerminalCategory::AggregationOp, {{1, 2}, {2, 4, 8}}});
    r.add({"im2col", TerminalCategory::PreRoutingOp, {{1, 3, 5}, {1, 2}}});
    r.add({"col2im", TerminalCategory::PostRoutingOp, {{1, 3, 5}, {1, 2}}});
    r.add({"linear", TerminalCategory::ComputationOp, {{16, 32, 64, 128}}});
    r.add({"relu", TerminalCategory::ComputationOp, {}});
    r.add({"identity", TerminalCategory::ComputationOp, {}});
    r.add({"pos-enc", TerminalCategory::ComputationOp, {}});
    r.add({"softmax", TerminalCategory::ComputationOp, {{1}}});
    return r;
  }

private:
  std::vector<RegistryEntry> entries_;
};

// ---------------------------------------------------------------------------
// Grammar configuration
// ---------------------------------------------------------------------------

// Expansions of a module nonterminal. Branching factors are separate
// expansions because their child layouts differ.
enum class Expansion : int {
  Sequential = 0,
  Branching2,
  Branching4,
  Branching8,
  Routing,
  Computation,
};
inline constexpr int kExpansionCount = 6;

inline const char* to_string(Expansion e) {
  switch (e) {
    case Expansion::Sequential: return "sequential";
    case Expansion::Branching2: return "branching2";
    case Expansion::Branching4: return "branching4";
    case Expansion::Branching8: return "branching8";
    case Expansion::Routing: return "routing";
    case Expansion::Computation: return "computation";
  }
  return "?";
}

struct GrammarConfig {
  double weights[kExpansionCount] = {0.25, 0.10, 0.05, 0.05, 0.15, 0.40};
  int max_depth = 6;
  TerminalRegistry registry = TerminalRegistry::standard();

  void validate_config() const {
    double sum = 0;
    for (double w : weights) {
      if (w < 0) throw DomainError("grammar config: negative expansion weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw DomainError("grammar config: expansion weights must sum to 1");
    if (max_depth < 1) throw DomainError("grammar config: max_depth must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  int node_id;
  std::string message;
};

namespace detail {

inline void validate_node(const TreeNode& n, const TerminalRegistry& reg,
                          std::vector<Violation>& out) {
  auto fail = [&](std::string msg) { out.push_back({n.node_id, std::move(msg)}); };

  if (n.terminal) {
    if (!n.children.empty()) fail("terminal node has children");
    const RegistryEntry* e = reg.find(n.term.op_name);
    if (!e) {
      fail("unknown operation name '" + n.term.op_name + "'");
    } else {
      if (e->category != n.term.category)
        fail("operation '" + n.term.op_name + "' has category " +
             to_string(e->category) + ", node claims " + to_string(n.term.category));
      if (e->arity() != n.term.hyperparams.size())
        fail("operation '" + n.term.op_name + "' expects " +
             std::to_string(e->arity()) + " hyperparameters, got " +
             std::to_string(n.term.hyperparams.size()));
    }
    return;
  }

  auto term_child = [&](std::size_t i, TerminalCategory want) {
    if (i >= n.children.size()) return;
    const TreeNode& c = n.children[i];
    if (!c.terminal)
      fail(std::string("child ") + std::to_string(i) + " must be a terminal");
    else if (c.term.category != want)
      fail(std::string("child ") + std::to_string(i) + " must be a " +
           to_string(want) + ", got " + to_string(c.term.category));
  };
  auto module_child = [&](std::size_t i) {
    if (i >= n.children.size()) return;
    if (n.children[i].terminal)
      fail(std::string("child ") + std::to_string(i) + " must be a module");
  };

  switch (n.kind) {
    case ModuleKind::Sequential:
      if (n.children.size() != 2)
        fail("sequential module must have exactly 2 children");
      module_child(0);
      module_child(1);
      break;
    case ModuleKind::Branching:
      if (n.branch_factor != 2 && n.branch_factor != 4 && n.branch_factor != 8)
        fail("branching factor must be 2, 4 or 8");
      if (n.branch_factor == 2) {
        if (n.children.size() != 4)
          fail("branching(2) must have exactly 4 children");
        term_child(0, TerminalCategory::BranchingOp);
        module_child(1);
        module_child(2);
        term_child(3, TerminalCategory::AggregationOp);
      } else {
        if (n.children.size() != 3)
          fail("branching(4/8) must have exactly 3 children");
        term_child(0, TerminalCategory::BranchingOp);
        module_child(1);
        term_child(2, TerminalCategory::AggregationOp);
      }
      break;
    case ModuleKind::Routing:
      if (n.children.size() != 3) fail("routing module must have exactly 3 children");
      term_child(0, TerminalCategory::PreRoutingOp);
      module_child(1);
      term_child(2, TerminalCategory::PostRoutingOp);
      break;
    case ModuleKind::Computation:
      if (n.children.size() != 1)
        fail("computation module must have exactly 1 child");
      term_child(0, TerminalCategory::ComputationOp);
      break;
  }
  for (const auto& c : n.children) validate_node(c, reg, out);
}

inline void check_unique_ids(const TreeNode& n, std::vector<int>& seen,
                             std::vector<Violation>& out) {
  if (std::find(seen.begin(), seen.end(), n.node_id) != seen.end())
    out.push_back({n.node_id, "duplicate node id"});
  seen.push_back(n.node_id);
  for (const auto& c : n.children) check_unique_ids(c, seen, out);
}

}  // namespace detail

inline std::vector<Violation> validate(const DerivationTree& t,
                                       const TerminalRegistry& reg = TerminalRegistry::standard()) {
  std::vector<Violation> out;
  detail::validate_node(t.root, reg, out);
  std::vector<int> seen;
  detail::check_unique_ids(t.root, seen, out);
  return out;
}

inline bool is_valid(const DerivationTree& t,
                     const TerminalRegistry& reg = TerminalRegistry::standard()) {
  return validate(t, reg).empty();
}

inline void require_valid(const DerivationTree& t,
                          const TerminalRegistry& reg = TerminalRegistry::standard()) {
  auto v = validate(t, reg);
  if (!v.empty())
    throw DomainError("invalid derivation tree: " + v.front().message);
}

// ---------------------------------------------------------------------------
// Rendering (canonical text form)
// ---------------------------------------------------------------------------

namespace detail {

inline void render_terminal(const TreeNode& n, std::string& out) {
  out += n.term.op_name;
  for (int h : n.term.hyperparams) {
    out += ',';
    out += std::to_string(h);
  }
}

inline void render_node(const TreeNode& n, std::string& out) {
  if (n.terminal) {
    render_terminal(n, out);
    return;
  }
  switch (n.kind) {
    case ModuleKind::Computation:
      out += "comp(";
      render_terminal(n.children[0], out);
      out += ')';
      break;
    case ModuleKind::Sequential:
      out += "seq(";
      render_node(n.children[0], out);
      out += ',';
      render_node(n.children[1], out);
      out += ')';
      break;
    case ModuleKind::Routing:
      out += "route(";
      render_terminal(n.children[0], out);
      out += ',';
      render_node(n.children[1], out);
      out += ',';
      render_terminal(n.children[2], out);
      out += ')';
      break;
    case ModuleKind::Branching:
      if (n.branch_factor == 2) {
        out += "branch2(";
        render_terminal(n.children[0], out);
        out += ';';
        render_node(n.children[1], out);
        out += ';';
        render_node(n.children[2], out);
        out += ';';
        render_terminal(n.children[3], out);
        out += ')';
      } else {
        out += "branch";
        out += std::to_string(n.branch_factor);
        out += '(';
        render_terminal(n.children[0], out);
        out += ';';
        render_node(n.children[1], out);
        out += ';';
        render_terminal(n.children[2], out);
        out += ')';
      }
      break;
  }
}

}  // namespace detail

// Canonical text: no whitespace, children in stored order.
inline std::string render_tree(const DerivationTree& t) {
  std::string out;
  detail::render_node(t.root, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

class TreeParser {
public:
  TreeParser(std::string_view text, const TerminalRegistry& reg)
      : text_(text), reg_(reg) {}

  TreeNode parse() {
    TreeNode n = parse_module();
    skip_ws();
    if (pos_ != text_.size()) err("trailing input after tree");
    return n;
  }

private:
  std::string_view text_;
  const TerminalRegistry& reg_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;

  [[noreturn]] void err(const std::string& msg) const {
    throw ParseError(msg, line_, col_);
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                                   text_[pos_] == '\n' || text_[pos_] == '\r'))
      advance();
  }

  char peek() {
    skip_ws();
    if (pos_ >= text_.size()) err("unexpected end of input");
    return text_[pos_];
  }

  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }

  void expect(char c) {
    if (peek() != c) err(std::string("expected '") + c + "'");
    advance();
  }

  std::string parse_name() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '-' || text_[pos_] == '_'))
      advance();
    if (pos_ == start) err("expected a name");
    return std::string(text_.substr(start, pos_ - start));
  }

  int parse_int() {
    skip_ws();
    std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) advance();
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
      advance();
    if (pos_ == start) err("expected an integer");
    return std::stoi(std::string(text_.substr(start, pos_ - start)));
  }

  bool next_is_int() {
    skip_ws();
    if (pos_ >= text_.size()) return false;
    char c = text_[pos_];
    return std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+';
  }

  // name ["," int]* with category check against the registry.
  TreeNode parse_terminal(TerminalCategory want) {
    std::string name = parse_name();
    const RegistryEntry* e = reg_.find(name);
    if (!e) err("unknown operation name '" + name + "'");
    if (e->category != want)
      err("operation '" + name + "' is a " + to_string(e->category) + ", expected " +
          to_string(want));
    TreeNode n;
    n.terminal = true;
    n.term.category = want;
    n.term.op_name = name;
    while (!at_end() && peek() == ',' && comma_precedes_int()) {
      expect(',');
      n.term.hyperparams.push_back(parse_int());
    }
    if (n.term.hyperparams.size() != e->arity())
      err("operation '" + name + "' expects " + std::to_string(e->arity()) +
          " hyperparameters, got " + std::to_string(n.term.hyperparams.size()));
    return n;
  }

  // Distinguishes "im2col,3,1,comp(..." — a comma followed by an int belongs
  // to the terminal, a comma followed by a name starts the next element.
  bool comma_precedes_int() {
    std::size_t save_pos = pos_;
    int save_line = line_, save_col = col_;
    advance();  // consume ','
    bool is_int = next_is_int();
    pos_ = save_pos;
    line_ = save_line;
    col_ = save_col;
    return is_int;
  }

  TreeNode parse_module() {
    std::string head = parse_name();
    TreeNode n;
    if (head == "comp") {
      n.kind = ModuleKind::Computation;
      expect('(');
      n.children.push_back(parse_terminal(TerminalCategory::ComputationOp));
      expect(')');
    } else if (head == "seq") {
      n.kind = ModuleKind::Sequential;
      expect('(');
      n.children.push_back(parse_module());
      expect(',');
      n.children.push_back(parse_module());
      expect(')');
    } else if (head == "route") {
      n.kind = ModuleKind::Routing;
      expect('(');
      n.children.push_back(parse_terminal(TerminalCategory::PreRoutingOp));
      expect(',');
      n.children.push_back(parse_module());
      expect(',');
      n.children.push_back(parse_terminal(TerminalCategory::PostRoutingOp));
      expect(')');
    } else if (head == "branch2") {
      n.kind = ModuleKind::Branching;
      n.branch_factor = 2;
      expect('(');
      n.children.push_back(parse_terminal(TerminalCategory::BranchingOp));
      expect(';');
      n.children.push_back(parse_module());
      expect(';');
      n.children.push_back(parse_module());
      expect(';');
      n.children.push_back(parse_terminal(TerminalCategory::AggregationOp));
      expect(')');
    } else if (head == "branch4" || head == "branch8") {
      n.kind = ModuleKind::Branching;
      n.branch_factor = head == "branch4" ? 4 : 8;
      expect('(');
      n.children.push_back(parse_terminal(TerminalCategory::BranchingOp));
      expect(';');
      n.children.push_back(parse_module());
      expect(';');
      n.children.push_back(parse_terminal(TerminalCategory::AggregationOp));
      expect(')');
    } else {
      err("unknown module head '" + head + "'");
    }
    return n;
  }
};

}  // namespace detail

inline DerivationTree parse_tree(std::string_view text,
                                 const TerminalRegistry& reg = TerminalRegistry::standard()) {
  detail::TreeParser p(text, reg);
  DerivationTree t;
  t.root = p.parse();
  t.renumber();
  auto v = validate(t, reg);
  if (!v.empty()) throw ParseError("invalid tree: " + v.front().message, 1, 1);
  return t;
}

// ---------------------------------------------------------------------------
// Sampling and mutation
// ---------------------------------------------------------------------------

namespace detail {

inline TreeNode sample_terminal(const RegistryEntry& e, Rng& rng) {
  TreeNode n;
  n.terminal = true;
  n.term.category = e.category;
  n.term.op_name = e.op_name;
  for (const auto& vs : e.value_sets) n.term.hyperparams.push_back(rng.pick(vs));
  return n;
}

// Branch/aggregation terminals keep their factor slot consistent with the
// enclosing branching node.
inline TreeNode sample_branch_terminal(const TerminalRegistry& reg,
                                       TerminalCategory cat, int factor, Rng& rng) {
  auto options = reg.by_category(cat);
  const RegistryEntry* e = options[rng.index(options.size())];
  TreeNode n = sample_terminal(*e, rng);
  if (!n.term.hyperparams.empty()) n.term.hyperparams.back() = factor;
  return n;
}

inline Expansion sample_expansion(const GrammarConfig& cfg, Rng& rng) {
  double u = rng.uniform();
  double acc = 0;
  for (int i = 0; i < kExpansionCount; ++i) {
    acc += cfg.weights[i];
    if (u < acc) return static_cast<Expansion>(i);
  }
  return Expansion::Computation;
}

inline TreeNode sample_module(const GrammarConfig& cfg, Rng& rng, int depth) {
  Expansion e = depth >= cfg.max_depth ? Expansion::Computation
                                       : sample_expansion(cfg, rng);
  TreeNode n;
  switch (e) {
    case Expansion::Computation: {
      n.kind = ModuleKind::Computation;
      auto options = cfg.registry.by_category(TerminalCategory::ComputationOp);
      n.children.push_back(sample_terminal(*options[rng.index(options.size())], rng));
      break;
    }
    case Expansion::Sequential:
      n.kind = ModuleKind::Sequential;
      n.children.push_back(sample_module(cfg, rng, depth + 1));
      n.children.push_back(sample_module(cfg, rng, depth + 1));
      break;
    case Expansion::Routing: {
      n.kind = ModuleKind::Routing;
      auto pre = cfg.registry.by_category(TerminalCategory::PreRoutingOp);
      auto post = cfg.registry.by_category(TerminalCategory::PostRoutingOp);
      n.children.push_back(sample_terminal(*pre[rng.index(pre.size())], rng));
      n.children.push_back(sample_module(cfg, rng, depth + 1));
      n.children.push_back(sample_terminal(*post[rng.index(post.size())], rng));
      break;
    }
    case Expansion::Branching2:
    case Expansion::Branching4:
    case Expansion::Branching8: {
      n.kind = ModuleKind::Branching;
      n.branch_factor = e == Expansion::Branching2 ? 2 : e == Expansion::Branching4 ? 4 : 8;
      n.children.push_back(sample_branch_terminal(
          cfg.registry, TerminalCategory::BranchingOp, n.branch_factor, rng));
      n.children.push_back(sample_module(cfg, rng, depth + 1));
      if (n.branch_factor == 2)
        n.children.push_back(sample_module(cfg, rng, depth + 1));
      n.children.push_back(sample_branch_terminal(
          cfg.registry, TerminalCategory::AggregationOp, n.branch_factor, rng));
      break;
    }
  }
  return n;
}

inline void collect_module_pointers(TreeNode& n, int depth,
                                    std::vector<std::pair<TreeNode*, int>>& out) {
  if (n.terminal) return;
  out.push_back({&n, depth});
  for (auto& c : n.children) collect_module_pointers(c, depth + 1, out);
}

inline void collect_terminal_pointers(TreeNode& n, int enclosing_factor,
                                      std::vector<std::pair<TreeNode*, int>>& out) {
  if (n.terminal) {
    out.push_back({&n, enclosing_factor});
    return;
  }
  int f = n.kind == ModuleKind::Branching ? n.branch_factor : 0;
  for (auto& c : n.children) collect_terminal_pointers(c, f, out);
}

}  // namespace detail

inline DerivationTree sample_tree(const GrammarConfig& cfg, Rng& rng) {
  cfg.validate_config();
  DerivationTree t;
  t.root = detail::sample_module(cfg, rng, 1);
  t.renumber();
  return t;
}

// One local edit: resample a uniformly chosen subtree (depth capped at the
// original config) or replace a single terminal within its category.
inline DerivationTree mutate(const DerivationTree& tree, const GrammarConfig& cfg, Rng& rng) {
  DerivationTree out = tree;
  if (rng.bernoulli(0.5)) {
    std::vector<std::pair<TreeNode*, int>> sites;
    detail::collect_module_pointers(out.root, 1, sites);
    auto [node, depth] = sites[rng.index(sites.size())];
    GrammarConfig local = cfg;
    local.max_depth = std::max(1, cfg.max_depth - depth + 1);
    *node = detail::sample_module(local, rng, 1);
  } else {
    std::vector<std::pair<TreeNode*, int>> terms;
    detail::collect_terminal_pointers(out.root, 0, terms);
    auto [node, factor] = terms[rng.index(terms.size())];
    TerminalCategory cat = node->term.category;
    if (factor > 0 && (cat == TerminalCategory::BranchingOp ||
                       cat == TerminalCategory::AggregationOp)) {
      *node = detail::sample_branch_terminal(cfg.registry, cat, factor, rng);
    } else {
      auto options = cfg.registry.by_category(cat);
      *node = detail::sample_terminal(*options[rng.index(options.size())], rng);
    }
  }
  out.renumber();
  return out;
}

// ---------------------------------------------------------------------------
// Canonical form and functional equality
// ---------------------------------------------------------------------------

namespace detail {

// Flatten sequential chains into an ordered module list.
inline void flatten_chain(const TreeNode& n, std::vector<const TreeNode*>& out) {
  if (!n.terminal && n.kind == ModuleKind::Sequential) {
    flatten_chain(n.children[0], out);
    flatten_chain(n.children[1], out);
  } else {
    out.push_back(&n);
  }
}

inline TreeNode canonical_node(const TreeNode& n);

inline TreeNode renest_right(std::vector<TreeNode> mods) {
  TreeNode acc = std::move(mods.back());
  for (std::size_t i = mods.size() - 1; i-- > 0;) {
    TreeNode s;
    s.kind = ModuleKind::Sequential;
    s.children.push_back(std::move(mods[i]));
    s.children.push_back(std::move(acc));
    acc = std::move(s);
  }
  return acc;
}

inline TreeNode canonical_module_list(const TreeNode& n) {
  std::vector<const TreeNode*> chain;
  flatten_chain(n, chain);
  std::vector<TreeNode> mods;
  mods.reserve(chain.size());
  for (const TreeNode* m : chain) mods.push_back(canonical_node(*m));
  return renest_right(std::move(mods));
}

inline TreeNode canonical_node(const TreeNode& n) {
  if (n.terminal) return n;
  TreeNode out = n;
  switch (n.kind) {
    case ModuleKind::Sequential:
      return canonical_module_list(n);
    case ModuleKind::Computation:
      break;
    case ModuleKind::Routing:
      out.children[1] = canonical_module_list(n.children[1]);
      break;
    case ModuleKind::Branching:
      out.children[1] = canonical_module_list(n.children[1]);
      if (n.branch_factor == 2) {
        out.children[2] = canonical_module_list(n.children[2]);
        DerivationTree a, b;
        a.root = out.children[1];
        b.root = out.children[2];
        if (render_tree(b) < render_tree(a)) std::swap(out.children[1], out.children[2]);
      }
      break;
  }
  return out;
}

}  // namespace detail

// Canonical form: sequential chains re-nested right-associatively and the two
// branches of every Branching(2) ordered deterministically. Two trees denote
// the same functional architecture iff their canonical forms are identical.
inline DerivationTree canonical_form(const DerivationTree& t) {
  DerivationTree out;
  out.root = detail::canonical_node(t.root);
  out.tree_id = t.tree_id;
  out.renumber();
  return out;
}

inline bool structurally_equal(const DerivationTree& a, const DerivationTree& b) {
  return render_tree(a) == render_tree(b);
}

inline bool functionally_equal(const DerivationTree& a, const DerivationTree& b) {
  return render_tree(canonical_form(a)) == render_tree(canonical_form(b));
}

// ---------------------------------------------------------------------------
// Corpus files: one tree per line, '#' comments
// ---------------------------------------------------------------------------

inline std::vector<DerivationTree> read_trees(std::istream& in,
                                              const TerminalRegistry& reg = TerminalRegistry::standard()) {
  std::vector<DerivationTree> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      DerivationTree t = parse_tree(line, reg);
      t.tree_id = "line" + std::to_string(lineno);
      out.push_back(std::move(t));
    } catch (const ParseError& e) {
      throw ParseError(std::string(e.what()) + " (corpus line " +
                           std::to_string(lineno) + ")", lineno, 1);
    }
  }
  return out;
}

inline std::vector<DerivationTree> read_trees_file(const std::string& path,
                                                   const TerminalRegistry& reg = TerminalRegistry::standard()) {
  std::ifstream f(path);
  if (!f) throw DomainError("cannot open tree file: " + path);
  return read_trees(f, reg);
}

inline void write_trees(std::ostream& out, const std::vector<DerivationTree>& trees,
                        const std::string& header_comment = "") {
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  for (const auto& t : trees) out << render_tree(t) << "\n";
}

}  // namespace swx
