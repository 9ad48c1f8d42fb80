// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <functional>
#include <vector>

#include "swx/crossover.hpp"

namespace swx {

class SizeRefusalError : public DomainError {
public:
  using DomainError::DomainError;
};

class OracleTimeoutError : public DomainError {
public:
  using DomainError::DomainError;
};

// ---------------------------------------------------------------------------
// Exhaustive constrained edit search
// ---------------------------------------------------------------------------
// Independent verifier for the dynamic program: enumerates every monotone
// edit script between the two sequences, checking grammar validity on the
// explicit script prefix rather than on stored back-pointers.

namespace oracle_detail {

struct ScriptStep {
  Dir dir;
  int i1, i2;
};

inline bool prefix_sep_sub_valid(const std::vector<ScriptStep>& prefix, const Token& a,
                                 const Token& b) {
  if (a.role != b.role) return false;
  for (const ScriptStep& s : prefix) {
    const bool h1 = s.i1 == a.opener_index;
    const bool h2 = s.i2 == b.opener_index;
    if (h1 && h2) return s.dir == Dir::Sub;
    if (h1 || h2) return false;
  }
  return false;
}

inline bool prefix_sep_indel_valid(const std::vector<ScriptStep>& prefix, const Token& sep,
                                   bool own_is_seq1, const SerialisedSequence& other) {
  // locate the step that consumed the opener
  int opener_at = -1;
  for (int p = static_cast<int>(prefix.size()) - 1; p >= 0; --p) {
    const int own = own_is_seq1 ? prefix[static_cast<std::size_t>(p)].i1
                                : prefix[static_cast<std::size_t>(p)].i2;
    if (own == sep.opener_index) {
      opener_at = p;
      break;
    }
  }
  if (opener_at < 0) return false;
  if (prefix[static_cast<std::size_t>(opener_at)].dir != (own_is_seq1 ? Dir::Add : Dir::Rem))
    return false;
  // bracket balance of the other sequence's structure consumed inside
  int depth = 0;
  for (std::size_t p = static_cast<std::size_t>(opener_at) + 1; p < prefix.size(); ++p) {
    const int o = own_is_seq1 ? prefix[p].i2 : prefix[p].i1;
    if (o < 0) continue;
    auto d = detail::bracket_delta(other[static_cast<std::size_t>(o)], other);
    depth -= d.closes;
    if (depth < 0) return false;
    depth += d.opens;
  }
  return depth == 0;
}

struct Search {
  const SerialisedSequence& s1;
  const SerialisedSequence& s2;
  const ScoringMatrix& m;
  double best = kInf;
  std::vector<ScriptStep> prefix;

  void run(int i, int j, double cost) {
    if (cost >= best) return;
    const int n1 = static_cast<int>(s1.size()) - 1;
    const int n2 = static_cast<int>(s2.size()) - 1;
    if (i == n1 && j == n2) {
      best = cost;
      return;
    }
    if (i < n1 && j < n2) {
      const Token& a = s1[static_cast<std::size_t>(i + 1)];
      const Token& b = s2[static_cast<std::size_t>(j + 1)];
      bool ok;
      if (a.is_separator() != b.is_separator())
        ok = false;
      else if (!a.is_separator())
        ok = a.node_class == b.node_class;
      else
        ok = prefix_sep_sub_valid(prefix, a, b);
      if (ok) {
        double c = substitution_cost(a, b, m);
        if (std::isfinite(c)) {
          prefix.push_back({Dir::Sub, i + 1, j + 1});
          run(i + 1, j + 1, cost + c);
          prefix.pop_back();
        }
      }
    }
    if (i < n1) {
      const Token& a = s1[static_cast<std::size_t>(i + 1)];
      if (!a.is_separator() || prefix_sep_indel_valid(prefix, a, true, s2)) {
        prefix.push_back({Dir::Add, i + 1, -1});
        run(i + 1, j, cost + indel_cost(a, m));
        prefix.pop_back();
      }
    }
    if (j < n2) {
      const Token& b = s2[static_cast<std::size_t>(j + 1)];
      if (!b.is_separator() || prefix_sep_indel_valid(prefix, b, false, s1)) {
        prefix.push_back({Dir::Rem, -1, j + 1});
        run(i, j + 1, cost + indel_cost(b, m));
        prefix.pop_back();
      }
    }
  }
};

}  // namespace oracle_detail

// Minimal cost over all grammar-valid edit scripts; refuses long inputs.
inline double exhaustive_edit_distance(const SerialisedSequence& s1,
                                       const SerialisedSequence& s2,
                                       const ScoringMatrix& m) {
  const std::size_t content = (s1.size() - 1) + (s2.size() - 1);
  if (content > 14)
    throw SizeRefusalError("exhaustive edit search refuses more than 14 total tokens");
  oracle_detail::Search search{s1, s2, m, kInf, {}};
  search.run(0, 0, 0.0);
  return search.best;
}

// ---------------------------------------------------------------------------
// Brute-force permutation distance
// ---------------------------------------------------------------------------

namespace oracle_detail {

inline void apply_branch_swaps(TreeNode& n, const std::vector<bool>& bits, int& counter) {
  int my_index = -1;
  if (!n.terminal && n.kind == ModuleKind::Branching && n.branch_factor == 2)
    my_index = counter++;
  for (auto& c : n.children) apply_branch_swaps(c, bits, counter);
  if (my_index >= 0 && bits[static_cast<std::size_t>(my_index)])
    std::swap(n.children[1], n.children[2]);
}

inline int count_branch2(const TreeNode& n) {
  int c = (!n.terminal && n.kind == ModuleKind::Branching && n.branch_factor == 2) ? 1 : 0;
  for (const auto& ch : n.children) c += count_branch2(ch);
  return c;
}

}  // namespace oracle_detail

// Applies a branch-order permutation to every Branching(2) node selected by
// the mask bits (pre-order numbering).
inline DerivationTree permute_branches(const DerivationTree& t, const std::vector<bool>& bits) {
  DerivationTree out = t;
  int counter = 0;
  oracle_detail::apply_branch_swaps(out.root, bits, counter);
  out.renumber();
  return out;
}

inline int branch2_count(const DerivationTree& t) {
  return oracle_detail::count_branch2(t.root);
}

// Minimum of the plain CSWX distance over every combination of branch swaps
// in either parent.
inline double brute_force_permutation_distance(const DerivationTree& t1,
                                               const DerivationTree& t2,
                                               const ScoringMatrix& m,
                                               std::uint64_t* cell_visits = nullptr) {
  const int b1 = branch2_count(t1);
  const int b2 = branch2_count(t2);
  if (b1 + b2 > 10)
    throw SizeRefusalError("brute-force permutation search refuses more than 10 spans");
  double best = kInf;
  if (cell_visits) *cell_visits = 0;
  for (std::uint32_t mask = 0; mask < (1u << (b1 + b2)); ++mask) {
    std::vector<bool> bits1(static_cast<std::size_t>(b1)), bits2(static_cast<std::size_t>(b2));
    for (int k = 0; k < b1; ++k) bits1[static_cast<std::size_t>(k)] = mask & (1u << k);
    for (int k = 0; k < b2; ++k)
      bits2[static_cast<std::size_t>(k)] = mask & (1u << (b1 + k));
    DerivationTree p1 = permute_branches(t1, bits1);
    DerivationTree p2 = permute_branches(t2, bits2);
    SerialisedSequence a = serialise(p1);
    SerialisedSequence b = serialise(p2);
    AlignmentMatrix mat = align(a, b, m);
    if (cell_visits) *cell_visits += mat.cell_visits;
    best = std::min(best, mat.final_distance());
  }
  return best;
}

// ---------------------------------------------------------------------------
// Small graphs and exact GED (the SEPX reference)
// ---------------------------------------------------------------------------

// Derivation trees reduced to their structural adjacency: one node per
// retained module (computation, branching, routing) labelled with the same
// identity the serialiser folds into tokens. Sequential chaining becomes an
// ordered path of siblings; the two branch forests of a Branching(2) node
// are an unordered pair.
struct SmallGraph {
  struct Node {
    Token label;
    std::vector<int> children_a;  // single child forest, or first branch
    std::vector<int> children_b;  // second branch of a Branching(2)
    bool unordered_pair = false;
  };
  std::vector<Node> nodes;
  std::vector<int> roots;

  int node_count() const { return static_cast<int>(nodes.size()); }

  int subtree_size(int id) const {
    int n = 1;
    const Node& nd = nodes[static_cast<std::size_t>(id)];
    for (int c : nd.children_a) n += subtree_size(c);
    for (int c : nd.children_b) n += subtree_size(c);
    return n;
  }
  int forest_size(const std::vector<int>& f) const {
    int n = 0;
    for (int id : f) n += subtree_size(id);
    return n;
  }
};

namespace oracle_detail {

inline Token module_label(const TreeNode& n) {
  Token t;
  t.kind = TokenKind::Node;
  t.node_id = n.node_id;
  switch (n.kind) {
    case ModuleKind::Computation:
      t.node_class = NodeClass::Computation;
      t.first = n.children[0].term;
      t.last = t.first;
      break;
    case ModuleKind::Routing:
      t.node_class = NodeClass::Routing;
      t.first = n.children[0].term;
      t.last = n.children[2].term;
      break;
    case ModuleKind::Branching:
      t.node_class = n.branch_factor == 2 ? NodeClass::Branching2 : NodeClass::BranchingK;
      t.branch_count = n.branch_factor;
      t.first = n.children[0].term;
      t.last = n.children.back().term;
      break;
    case ModuleKind::Sequential:
      break;
  }
  return t;
}

inline std::vector<int> build_graph_forest(const TreeNode& n, SmallGraph& g) {
  if (n.terminal) return {};
  if (n.kind == ModuleKind::Sequential) {
    std::vector<int> out = build_graph_forest(n.children[0], g);
    std::vector<int> tail = build_graph_forest(n.children[1], g);
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
  }
  SmallGraph::Node node;
  node.label = module_label(n);
  if (n.kind == ModuleKind::Routing) {
    node.children_a = build_graph_forest(n.children[1], g);
  } else if (n.kind == ModuleKind::Branching) {
    node.children_a = build_graph_forest(n.children[1], g);
    if (n.branch_factor == 2) {
      node.children_b = build_graph_forest(n.children[2], g);
      node.unordered_pair = true;
    }
  }
  int id = static_cast<int>(g.nodes.size());
  g.nodes.push_back(std::move(node));
  return {id};
}

}  // namespace oracle_detail

inline SmallGraph graph_from_tree(const DerivationTree& t, int max_nodes = 14) {
  SmallGraph g;
  g.roots = oracle_detail::build_graph_forest(t.root, g);
  if (g.node_count() > max_nodes)
    throw SizeRefusalError("small-graph oracle refuses more than " +
                           std::to_string(max_nodes) + " nodes");
  return g;
}

enum class GraphOpKind { Substitute, Delete, Insert };

struct GraphEditOp {
  GraphOpKind kind;
  int n1 = -1;  // node in the first graph
  int n2 = -1;  // node in the second graph
  double cost = 0;
};

struct GraphEditPath {
  std::vector<GraphEditOp> ops;
  double total_cost = 0;
};

namespace oracle_detail {

// Forest items: nonnegative values are graph node ids; negative values are
// bracket markers for the interval of a deleted or inserted span node in the
// merged edit script. A shared stack enforces the aligner's validity rules:
// intervals of deleted and inserted spans must nest rather than cross, and
// nothing may straddle a Branching(2) segment boundary.
enum class MarkerKind { Open = 0, Divider = 1, Close = 2 };

inline int marker_item(int node, MarkerKind kind) {
  return -(node * 3 + static_cast<int>(kind) + 1);
}
inline bool is_marker(int item) { return item < 0; }
inline int marker_node(int item) { return (-item - 1) / 3; }
inline MarkerKind marker_kind(int item) {
  return static_cast<MarkerKind>((-item - 1) % 3);
}

struct GedSearch {
  const SmallGraph& g1;
  const SmallGraph& g2;
  const ScoringMatrix& m;
  std::chrono::steady_clock::time_point deadline;
  double best = kInf;
  std::vector<GraphEditOp> current, best_ops;
  std::vector<std::pair<int, int>> open_spans;  // (side, node id)
  long long expansions = 0;

  using Cont = std::function<void(double)>;

  void check_deadline() {
    if (++expansions % 4096 == 0 && std::chrono::steady_clock::now() > deadline)
      throw OracleTimeoutError("graph edit distance search timed out");
  }

  static bool is_span_node(const SmallGraph& g, int id) {
    return g.nodes[static_cast<std::size_t>(id)].label.is_opener();
  }

  // children of a deleted/inserted span flow into the surrounding forest,
  // bracketed by the span's interval markers
  static std::vector<int> splice_items(const SmallGraph& g, int id, bool flip) {
    const auto& nd = g.nodes[static_cast<std::size_t>(id)];
    std::vector<int> out;
    const bool span = is_span_node(g, id);
    if (span) out.push_back(marker_item(id, MarkerKind::Open));
    const auto& first = flip ? nd.children_b : nd.children_a;
    const auto& second = flip ? nd.children_a : nd.children_b;
    out.insert(out.end(), first.begin(), first.end());
    if (nd.unordered_pair) out.push_back(marker_item(id, MarkerKind::Divider));
    out.insert(out.end(), second.begin(), second.end());
    if (span) out.push_back(marker_item(id, MarkerKind::Close));
    return out;
  }

  int forest_nodes(const SmallGraph& g, const std::vector<int>& f) const {
    int n = 0;
    for (int it : f)
      if (!is_marker(it)) n += g.subtree_size(it);
    return n;
  }

  // Lower bound: every surplus node costs at least one indel.
  double lower_bound(const std::vector<int>& f1, const std::vector<int>& f2) const {
    return std::abs(forest_nodes(g1, f1) - forest_nodes(g2, f2)) * 1.0;
  }

  double delete_all(const std::vector<int>& f, bool record) {
    double c = 0;
    for (int it : f) {
      if (is_marker(it)) continue;
      const auto& nd = g1.nodes[static_cast<std::size_t>(it)];
      c += indel_cost(nd.label, m);
      if (record) current.push_back({GraphOpKind::Delete, it, -1, indel_cost(nd.label, m)});
      c += delete_all(nd.children_a, record);
      c += delete_all(nd.children_b, record);
    }
    return c;
  }
  double insert_all(const std::vector<int>& f, bool record) {
    double c = 0;
    for (int it : f) {
      if (is_marker(it)) continue;
      const auto& nd = g2.nodes[static_cast<std::size_t>(it)];
      c += indel_cost(nd.label, m);
      if (record) current.push_back({GraphOpKind::Insert, -1, it, indel_cost(nd.label, m)});
      c += insert_all(nd.children_a, record);
      c += insert_all(nd.children_b, record);
    }
    return c;
  }

  void finish(double cost) {
    if (cost < best) {
      best = cost;
      best_ops = current;
    }
  }

  bool marker_step(int side, int item) {
    const int node = marker_node(item);
    switch (marker_kind(item)) {
      case MarkerKind::Open:
        open_spans.push_back({side, node});
        return true;
      case MarkerKind::Divider:
        return !open_spans.empty() && open_spans.back() == std::make_pair(side, node);
      case MarkerKind::Close:
        if (open_spans.empty() || open_spans.back() != std::make_pair(side, node))
          return false;
        open_spans.pop_back();
        return true;
    }
    return false;
  }
  void marker_undo(int side, int item) {
    const int node = marker_node(item);
    if (marker_kind(item) == MarkerKind::Open)
      open_spans.pop_back();
    else if (marker_kind(item) == MarkerKind::Close)
      open_spans.push_back({side, node});
  }

  // One side exhausted: the other side's items are consumed in list order.
  // Marker legality is still enforced (and undone afterwards); an illegal
  // marker means no completion exists on this branch.
  void tail_consume(int side, const std::vector<int>& f, double cost, const Cont& next) {
    std::vector<int> applied;
    std::size_t mark = current.size();
    double c = 0;
    bool ok = true;
    for (int it : f) {
      if (is_marker(it)) {
        if (!marker_step(side, it)) {
          ok = false;
          break;
        }
        applied.push_back(it);
        continue;
      }
      if (side == 1) {
        const auto& nd = g1.nodes[static_cast<std::size_t>(it)];
        double ic = indel_cost(nd.label, m);
        current.push_back({GraphOpKind::Delete, it, -1, ic});
        c += ic + delete_all(nd.children_a, true) + delete_all(nd.children_b, true);
      } else {
        const auto& nd = g2.nodes[static_cast<std::size_t>(it)];
        double ic = indel_cost(nd.label, m);
        current.push_back({GraphOpKind::Insert, -1, it, ic});
        c += ic + insert_all(nd.children_a, true) + insert_all(nd.children_b, true);
      }
    }
    if (ok) next(cost + c);
    for (auto r = applied.rbegin(); r != applied.rend(); ++r) marker_undo(side, *r);
    current.resize(mark);
  }

  // Aligns two ordered forests exhaustively, feeding each complete
  // sub-alignment cost into the continuation. Matched roots align their
  // child forests before the remaining siblings; Branching(2) pairs try both
  // branch orders; deleting or inserting a span splices its children between
  // the span's interval markers.
  void align_nested(std::vector<int> f1, std::vector<int> f2, double cost, const Cont& next) {
    check_deadline();
    if (cost + lower_bound(f1, f2) >= best) return;

    if (f1.empty() && f2.empty()) {
      next(cost);
      return;
    }
    if (f1.empty()) {
      tail_consume(2, f2, cost, next);
      return;
    }
    if (f2.empty()) {
      tail_consume(1, f1, cost, next);
      return;
    }

    // interval markers may be consumed now or deferred behind the other
    // side's steps; both orders are explored
    if (is_marker(f1.front())) {
      int item = f1.front();
      if (marker_step(1, item)) {
        align_nested({f1.begin() + 1, f1.end()}, f2, cost, next);
        marker_undo(1, item);
      }
      if (is_marker(f2.front())) {
        int item2 = f2.front();
        if (marker_step(2, item2)) {
          align_nested(f1, {f2.begin() + 1, f2.end()}, cost, next);
          marker_undo(2, item2);
        }
        return;  // both fronts are markers: no node steps available
      }
    } else if (is_marker(f2.front())) {
      int item = f2.front();
      if (marker_step(2, item)) {
        align_nested(f1, {f2.begin() + 1, f2.end()}, cost, next);
        marker_undo(2, item);
      }
    }

    // node fronts (a marker on a front suppresses that side's node steps)
    const bool head1 = !is_marker(f1.front());
    const bool head2 = !is_marker(f2.front());
    if (!head1 && !head2) return;

    std::vector<int> rest1, rest2;
    if (head1) rest1.assign(f1.begin() + 1, f1.end());
    if (head2) rest2.assign(f2.begin() + 1, f2.end());

    if (head1 && head2) {
      const int r1 = f1.front();
      const int r2 = f2.front();
      const auto& n1 = g1.nodes[static_cast<std::size_t>(r1)];
      const auto& n2 = g2.nodes[static_cast<std::size_t>(r2)];
      double sub = substitution_cost(n1.label, n2.label, m);
      if (std::isfinite(sub)) {
        current.push_back({GraphOpKind::Substitute, r1, r2, sub});
        if (n1.unordered_pair && n2.unordered_pair) {
          for (int flip = 0; flip < 2; ++flip) {
            const auto& ca = flip ? n2.children_b : n2.children_a;
            const auto& cb = flip ? n2.children_a : n2.children_b;
            align_nested(n1.children_a, ca, cost + sub, [&](double c1) {
              align_nested(n1.children_b, cb, c1, [&](double c2) {
                align_nested(rest1, rest2, c2, next);
              });
            });
          }
        } else {
          align_nested(n1.children_a, n2.children_a, cost + sub, [&](double c1) {
            align_nested(n1.children_b, n2.children_b, c1, [&](double c2) {
              align_nested(rest1, rest2, c2, next);
            });
          });
        }
        current.pop_back();
      }
    }

    if (head1) {
      const int r1 = f1.front();
      const auto& n1 = g1.nodes[static_cast<std::size_t>(r1)];
      double c = indel_cost(n1.label, m);
      current.push_back({GraphOpKind::Delete, r1, -1, c});
      for (int flip = 0; flip < (n1.unordered_pair ? 2 : 1); ++flip) {
        std::vector<int> spliced = splice_items(g1, r1, flip != 0);
        spliced.insert(spliced.end(), rest1.begin(), rest1.end());
        align_nested(spliced, f2, cost + c, next);
      }
      current.pop_back();
    }
    if (head2) {
      const int r2 = f2.front();
      const auto& n2 = g2.nodes[static_cast<std::size_t>(r2)];
      double c = indel_cost(n2.label, m);
      current.push_back({GraphOpKind::Insert, -1, r2, c});
      for (int flip = 0; flip < (n2.unordered_pair ? 2 : 1); ++flip) {
        std::vector<int> spliced = splice_items(g2, r2, flip != 0);
        spliced.insert(spliced.end(), rest2.begin(), rest2.end());
        align_nested(f1, spliced, cost + c, next);
      }
      current.pop_back();
    }
  }
};

}  // namespace oracle_detail

// Exact minimal graph-edit script via exhaustive branch-and-bound over node
// mappings. Deliberately exponential: this is the SEPX cost model the fast
// aligners are verified against.
inline GraphEditPath ged_sepx_path(const SmallGraph& g1, const SmallGraph& g2,
                                   const ScoringMatrix& m,
                                   std::chrono::milliseconds timeout =
                                       std::chrono::milliseconds(120000)) {
  if (g1.node_count() > 12 || g2.node_count() > 12)
    throw SizeRefusalError("exact GED refuses graphs above 12 nodes");
  oracle_detail::GedSearch search{g1, g2, m, std::chrono::steady_clock::now() + timeout,
                                  kInf, {}, {}, {}, 0};
  search.align_nested(g1.roots, g2.roots, 0.0, [&](double c) { search.finish(c); });
  GraphEditPath path;
  path.total_cost = search.best;
  path.ops = search.best_ops;
  // zero-cost substitutions are matches, not operations
  path.ops.erase(std::remove_if(path.ops.begin(), path.ops.end(),
                                [](const GraphEditOp& o) { return o.cost == 0; }),
                 path.ops.end());
  return path;
}

// Applies a uniform random subset of ceil(d*/2) operations from the minimal
// edit script to the first graph. Offspring are graphs; insertion points
// follow the matched parent of the inserted node when one exists.
inline SmallGraph sepx_crossover(const SmallGraph& g1, const SmallGraph& g2,
                                 const ScoringMatrix& m, Rng& rng) {
  GraphEditPath path = ged_sepx_path(g1, g2, m);
  const std::size_t d = path.ops.size();
  std::vector<int> order(d);
  for (std::size_t k = 0; k < d; ++k) order[static_cast<std::size_t>(k)] = static_cast<int>(k);
  rng.shuffle(order);
  const std::size_t take = (d + 1) / 2;
  std::set<int> chosen(order.begin(), order.begin() + static_cast<long>(take));

  // mapping from the substitution ops (including zero-cost matches is not
  // needed; unmatched g2 roots attach at the root forest)
  std::vector<int> relabel_to(g1.nodes.size(), -1);
  std::vector<bool> removed(g1.nodes.size(), false);
  std::vector<int> inserted;  // g2 node ids
  for (std::size_t k = 0; k < path.ops.size(); ++k) {
    if (!chosen.count(static_cast<int>(k))) continue;
    const GraphEditOp& op = path.ops[k];
    switch (op.kind) {
      case GraphOpKind::Substitute:
        relabel_to[static_cast<std::size_t>(op.n1)] = op.n2;
        break;
      case GraphOpKind::Delete:
        removed[static_cast<std::size_t>(op.n1)] = true;
        break;
      case GraphOpKind::Insert:
        inserted.push_back(op.n2);
        break;
    }
  }

  SmallGraph out;
  // rebuild g1 with deletions spliced and substitutions relabelled
  struct Builder {
    const SmallGraph& g1;
    const SmallGraph& g2;
    const std::vector<int>& relabel_to;
    const std::vector<bool>& removed;
    SmallGraph& out;

    std::vector<int> forest(const std::vector<int>& f) {
      std::vector<int> ids;
      for (int id : f) {
        const auto& nd = g1.nodes[static_cast<std::size_t>(id)];
        if (removed[static_cast<std::size_t>(id)]) {
          auto a = forest(nd.children_a);
          auto b = forest(nd.children_b);
          ids.insert(ids.end(), a.begin(), a.end());
          ids.insert(ids.end(), b.begin(), b.end());
          continue;
        }
        SmallGraph::Node copy;
        copy.label = relabel_to[static_cast<std::size_t>(id)] >= 0
                         ? g2.nodes[static_cast<std::size_t>(
                                        relabel_to[static_cast<std::size_t>(id)])].label
                         : nd.label;
        copy.unordered_pair = nd.unordered_pair;
        copy.children_a = forest(nd.children_a);
        copy.children_b = forest(nd.children_b);
        int nid = static_cast<int>(out.nodes.size());
        out.nodes.push_back(std::move(copy));
        ids.push_back(nid);
      }
      return ids;
    }
  } builder{g1, g2, relabel_to, removed, out};
  out.roots = builder.forest(g1.roots);

  for (int id : inserted) {
    SmallGraph::Node copy;
    copy.label = g2.nodes[static_cast<std::size_t>(id)].label;
    int nid = static_cast<int>(out.nodes.size());
    out.nodes.push_back(std::move(copy));
    out.roots.push_back(nid);
  }
  return out;
}

}  // namespace swx
