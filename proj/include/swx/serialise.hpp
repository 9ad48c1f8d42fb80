// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "swx/grammar.hpp"

namespace swx {

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

enum class TokenKind { Start, Node, Separator };

// Node class for substitution purposes. Branching(2) is a distinct class from
// Branching(4/8): it holds four children and the two are not interchangeable.
enum class NodeClass { Computation, Branching2, BranchingK, Routing };

inline const char* to_string(NodeClass c) {
  switch (c) {
    case NodeClass::Computation: return "computation";
    case NodeClass::Branching2: return "branching2";
    case NodeClass::BranchingK: return "branching";
    case NodeClass::Routing: return "routing";
  }
  return "?";
}

enum class SepRole { BranchDivider, Closer };

struct Token {
  TokenKind kind = TokenKind::Node;

  // Node payload. `first` and `last` carry the first/last terminal children
  // of the originating module: the computation op itself, the branch and
  // aggregation ops of a branching node, or the pre/post ops of a routing.
  NodeClass node_class = NodeClass::Computation;
  TerminalKind first;
  TerminalKind last;
  int branch_count = 0;  // branching nodes only
  int node_id = -1;      // originating tree node

  // Separator payload.
  int opener_index = -1;  // index of the branching/routing token this belongs to
  SepRole role = SepRole::Closer;

  bool is_start() const { return kind == TokenKind::Start; }
  bool is_node() const { return kind == TokenKind::Node; }
  bool is_separator() const { return kind == TokenKind::Separator; }
  bool is_opener() const {
    return kind == TokenKind::Node && node_class != NodeClass::Computation;
  }

  // Token identity: used for exact-match tests and zero-cost substitutions.
  bool same_identity(const Token& o) const {
    if (kind != o.kind) return false;
    if (kind == TokenKind::Start) return true;
    if (kind == TokenKind::Separator) return role == o.role;
    return node_class == o.node_class && branch_count == o.branch_count &&
           first == o.first && last == o.last;
  }

  std::string label() const {
    switch (kind) {
      case TokenKind::Start: return "<start>";
      case TokenKind::Separator:
        return role == SepRole::BranchDivider ? "<div>" : "<end>";
      case TokenKind::Node:
        if (node_class == NodeClass::Computation) return "comp:" + first.label();
        return std::string(to_string(node_class)) +
               (node_class != NodeClass::Routing ? std::to_string(branch_count) : "") +
               ":" + first.label() + "/" + last.label();
    }
    return "?";
  }
};

struct SerialisedSequence {
  std::vector<Token> tokens;
  std::string source_tree_id;

  std::size_t size() const { return tokens.size(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }
};

// ---------------------------------------------------------------------------
// Serialise
// ---------------------------------------------------------------------------

namespace detail {

inline void serialise_node(const TreeNode& n, std::vector<Token>& out) {
  if (n.terminal) return;  // terminals are folded into their module token
  switch (n.kind) {
    case ModuleKind::Sequential:
      // implied by structure: omitted
      serialise_node(n.children[0], out);
      serialise_node(n.children[1], out);
      break;
    case ModuleKind::Computation: {
      Token t;
      t.kind = TokenKind::Node;
      t.node_class = NodeClass::Computation;
      t.first = n.children[0].term;
      t.last = t.first;
      t.node_id = n.node_id;
      out.push_back(std::move(t));
      break;
    }
    case ModuleKind::Routing: {
      Token t;
      t.kind = TokenKind::Node;
      t.node_class = NodeClass::Routing;
      t.first = n.children[0].term;
      t.last = n.children[2].term;
      t.node_id = n.node_id;
      int opener = static_cast<int>(out.size());
      out.push_back(std::move(t));
      serialise_node(n.children[1], out);
      Token sep;
      sep.kind = TokenKind::Separator;
      sep.role = SepRole::Closer;
      sep.opener_index = opener;
      out.push_back(sep);
      break;
    }
    case ModuleKind::Branching: {
      Token t;
      t.kind = TokenKind::Node;
      t.node_class = n.branch_factor == 2 ? NodeClass::Branching2 : NodeClass::BranchingK;
      t.branch_count = n.branch_factor;
      t.first = n.children[0].term;
      t.last = n.children.back().term;
      t.node_id = n.node_id;
      int opener = static_cast<int>(out.size());
      out.push_back(std::move(t));
      serialise_node(n.children[1], out);
      if (n.branch_factor == 2) {
        Token div;
        div.kind = TokenKind::Separator;
        div.role = SepRole::BranchDivider;
        div.opener_index = opener;
        out.push_back(div);
        serialise_node(n.children[2], out);
      }
      Token close;
      close.kind = TokenKind::Separator;
      close.role = SepRole::Closer;
      close.opener_index = opener;
      out.push_back(close);
      break;
    }
  }
}

}  // namespace detail

inline SerialisedSequence serialise(const DerivationTree& tree) {
  SerialisedSequence seq;
  seq.source_tree_id = tree.tree_id;
  Token start;
  start.kind = TokenKind::Start;
  seq.tokens.push_back(start);
  detail::serialise_node(tree.root, seq.tokens);
  return seq;
}

// ---------------------------------------------------------------------------
// Deserialise
// ---------------------------------------------------------------------------

namespace detail {

// Recomputes opener links by bracket matching and checks well-nestedness.
// Sequences assembled by offspring generation pass through here.
inline void relink_separators(std::vector<Token>& toks) {
  std::vector<int> stack;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    Token& t = toks[i];
    if (t.is_opener()) {
      stack.push_back(static_cast<int>(i));
    } else if (t.is_separator()) {
      if (stack.empty())
        throw DomainError("separator at token " + std::to_string(i) + " has no opener");
      t.opener_index = stack.back();
      const Token& opener = toks[stack.back()];
      if (t.role == SepRole::BranchDivider) {
        if (opener.node_class != NodeClass::Branching2)
          throw DomainError("branch divider under a non-branching(2) opener");
      } else {
        stack.pop_back();
      }
    }
  }
  if (!stack.empty()) throw DomainError("unclosed branching/routing span");
}

struct TokenCursor {
  const std::vector<Token>& toks;
  std::size_t pos;

  bool done() const { return pos >= toks.size(); }
  const Token& cur() const { return toks[pos]; }
};

inline TreeNode deserialise_module_list(TokenCursor& c, int stop_opener, SepRole stop_role);

inline TreeNode terminal_node(const TerminalKind& t) {
  TreeNode n;
  n.terminal = true;
  n.term = t;
  return n;
}

inline TreeNode deserialise_one(TokenCursor& c) {
  const Token& t = c.cur();
  ++c.pos;
  TreeNode n;
  switch (t.node_class) {
    case NodeClass::Computation:
      n.kind = ModuleKind::Computation;
      n.children.push_back(terminal_node(t.first));
      return n;
    case NodeClass::Routing: {
      n.kind = ModuleKind::Routing;
      n.children.push_back(terminal_node(t.first));
      n.children.push_back(deserialise_module_list(c, static_cast<int>(c.pos) - 1, SepRole::Closer));
      n.children.push_back(terminal_node(t.last));
      return n;
    }
    case NodeClass::Branching2: {
      n.kind = ModuleKind::Branching;
      n.branch_factor = 2;
      int opener = static_cast<int>(c.pos) - 1;
      n.children.push_back(terminal_node(t.first));
      n.children.push_back(deserialise_module_list(c, opener, SepRole::BranchDivider));
      n.children.push_back(deserialise_module_list(c, opener, SepRole::Closer));
      n.children.push_back(terminal_node(t.last));
      return n;
    }
    case NodeClass::BranchingK: {
      n.kind = ModuleKind::Branching;
      n.branch_factor = t.branch_count;
      int opener = static_cast<int>(c.pos) - 1;
      n.children.push_back(terminal_node(t.first));
      n.children.push_back(deserialise_module_list(c, opener, SepRole::Closer));
      n.children.push_back(terminal_node(t.last));
      return n;
    }
  }
  throw DomainError("unreachable token class");
}

// Reads modules until the separator (stop_opener, stop_role); stop_opener -1
// reads to the end of the sequence. Multiple modules re-nest right-
// associatively; nesting order does not change the architecture.
inline TreeNode deserialise_module_list(TokenCursor& c, int stop_opener, SepRole stop_role) {
  std::vector<TreeNode> mods;
  for (;;) {
    if (c.done()) {
      if (stop_opener >= 0) throw DomainError("unterminated branching/routing span");
      break;
    }
    const Token& t = c.cur();
    if (t.is_separator()) {
      if (t.opener_index != stop_opener || t.role != stop_role)
        throw DomainError("mismatched separator");
      ++c.pos;
      break;
    }
    if (t.is_start()) throw DomainError("start token inside sequence");
    mods.push_back(deserialise_one(c));
  }
  if (mods.empty()) throw DomainError("empty module list in serialised sequence");
  return renest_right(std::move(mods));
}

}  // namespace detail

inline DerivationTree deserialise(const SerialisedSequence& seq) {
  if (seq.tokens.empty() || !seq.tokens[0].is_start())
    throw DomainError("serialised sequence must begin with the start token");
  std::vector<Token> toks = seq.tokens;
  detail::relink_separators(toks);
  detail::TokenCursor c{toks, 1};
  DerivationTree t;
  t.root = detail::deserialise_module_list(c, -1, SepRole::Closer);
  t.tree_id = seq.source_tree_id;
  t.renumber();
  return t;
}

// Debug dump: one token per line, "idx<TAB>variant<TAB>payload".
inline void dump_tokens(std::ostream& out, const SerialisedSequence& seq) {
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    const Token& t = seq.tokens[i];
    const char* variant = t.is_start() ? "start" : t.is_node() ? "node" : "separator";
    std::string payload;
    if (t.is_separator()) {
      payload = (t.role == SepRole::BranchDivider ? "divider" : "closer");
      payload += " opener=" + std::to_string(t.opener_index);
    } else if (t.is_node()) {
      payload = t.label();
    } else {
      payload = "-";
    }
    out << i << '\t' << variant << '\t' << payload << '\n';
  }
}

}  // namespace swx
