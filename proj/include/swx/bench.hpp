// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <ostream>
#include <string>
#include <vector>

#include "swx/analysis.hpp"

namespace swx {

// ---------------------------------------------------------------------------
// Size-targeted sampling
// ---------------------------------------------------------------------------

struct BudgetSamplerOptions {
  bool allow_branching = true;
  bool allow_routing = true;
  // Architectures are layer chains with shallow structure; deeply nested
  // spans put the aligner in its exponential regime, which the scaling
  // benchmark probes deliberately rather than by accident.
  int max_span_depth = 3;
};

namespace detail {

// Builds a module whose serialisation (start token excluded) has exactly
// `budget` tokens. Computation = 1, routing = inner + 2, branching(2) =
// both branches + 3, branching(4/8) = inner + 2.
inline TreeNode budget_module(int budget, const GrammarConfig& cfg, Rng& rng,
                              const BudgetSamplerOptions& opt, int span_depth = 0) {
  auto comp = [&]() {
    TreeNode n;
    n.kind = ModuleKind::Computation;
    auto options = cfg.registry.by_category(TerminalCategory::ComputationOp);
    n.children.push_back(sample_terminal(*options[rng.index(options.size())], rng));
    return n;
  };
  if (budget <= 1) return comp();

  const bool spans_ok = span_depth < opt.max_span_depth;
  struct Choice {
    char tag;
    double w;
  };
  std::vector<Choice> choices;
  if (budget >= 2) choices.push_back({'s', 0.5});
  if (spans_ok && opt.allow_routing && budget >= 3) choices.push_back({'r', 0.2});
  if (spans_ok && opt.allow_branching && budget >= 3) choices.push_back({'k', 0.1});
  if (spans_ok && opt.allow_branching && budget >= 5) choices.push_back({'2', 0.2});
  double total = 0;
  for (const auto& c : choices) total += c.w;
  double u = rng.uniform() * total;
  char tag = choices.back().tag;
  for (const auto& c : choices) {
    if (u < c.w) {
      tag = c.tag;
      break;
    }
    u -= c.w;
  }

  TreeNode n;
  switch (tag) {
    case 's': {
      n.kind = ModuleKind::Sequential;
      int left = static_cast<int>(rng.uniform_int(1, budget - 1));
      n.children.push_back(budget_module(left, cfg, rng, opt, span_depth));
      n.children.push_back(budget_module(budget - left, cfg, rng, opt, span_depth));
      break;
    }
    case 'r': {
      n.kind = ModuleKind::Routing;
      auto pre = cfg.registry.by_category(TerminalCategory::PreRoutingOp);
      auto post = cfg.registry.by_category(TerminalCategory::PostRoutingOp);
      n.children.push_back(sample_terminal(*pre[rng.index(pre.size())], rng));
      n.children.push_back(budget_module(budget - 2, cfg, rng, opt, span_depth + 1));
      n.children.push_back(sample_terminal(*post[rng.index(post.size())], rng));
      break;
    }
    case 'k': {
      n.kind = ModuleKind::Branching;
      n.branch_factor = rng.bernoulli(0.5) ? 4 : 8;
      n.children.push_back(sample_branch_terminal(cfg.registry, TerminalCategory::BranchingOp,
                                                  n.branch_factor, rng));
      n.children.push_back(budget_module(budget - 2, cfg, rng, opt, span_depth + 1));
      n.children.push_back(sample_branch_terminal(
          cfg.registry, TerminalCategory::AggregationOp, n.branch_factor, rng));
      break;
    }
    case '2': {
      n.kind = ModuleKind::Branching;
      n.branch_factor = 2;
      int rem = budget - 3;
      int left = static_cast<int>(rng.uniform_int(1, rem - 1));
      n.children.push_back(
          sample_branch_terminal(cfg.registry, TerminalCategory::BranchingOp, 2, rng));
      n.children.push_back(budget_module(left, cfg, rng, opt, span_depth + 1));
      n.children.push_back(budget_module(rem - left, cfg, rng, opt, span_depth + 1));
      n.children.push_back(
          sample_branch_terminal(cfg.registry, TerminalCategory::AggregationOp, 2, rng));
      break;
    }
  }
  return n;
}

}  // namespace detail

// Samples a tree whose serialised sequence is exactly `tokens` long, start
// token excluded.
inline DerivationTree sample_tree_with_token_budget(int tokens, const GrammarConfig& cfg,
                                                    Rng& rng,
                                                    const BudgetSamplerOptions& opt = {}) {
  if (tokens < 1) throw DomainError("token budget must be >= 1");
  DerivationTree t;
  t.root = detail::budget_module(tokens, cfg, rng, opt);
  t.renumber();
  return t;
}

// Samples a tree with exactly `nodes` retained module nodes (tokens minus
// separators): the graph-size scale of the exact-GED oracle. Token budgets
// above the node count admit separator-bearing structure; rejection keeps
// only exact node counts.
inline DerivationTree sample_tree_with_graph_nodes(int nodes, const GrammarConfig& cfg,
                                                   Rng& rng,
                                                   const BudgetSamplerOptions& opt = {}) {
  for (int attempt = 0; attempt < 512; ++attempt) {
    int budget = nodes + static_cast<int>(rng.uniform_int(0, nodes));
    DerivationTree t = sample_tree_with_token_budget(budget, cfg, rng, opt);
    SerialisedSequence s = serialise(t);
    int count = 0;
    for (const auto& tok : s.tokens)
      if (tok.is_node()) ++count;
    if (count == nodes) return t;
  }
  // chains always hit the target exactly
  BudgetSamplerOptions plain;
  plain.allow_branching = false;
  plain.allow_routing = false;
  return sample_tree_with_token_budget(nodes, cfg, rng, plain);
}

// ---------------------------------------------------------------------------
// Scaling benchmark
// ---------------------------------------------------------------------------

struct BenchRecord {
  std::string method;
  int size = 0;    // requested token count (start excluded)
  int sample = 0;  // sample index within the size
  int tokens1 = 0, tokens2 = 0;
  int graph_nodes1 = 0, graph_nodes2 = 0;  // sepx only
  double seconds = 0;
  std::uint64_t cell_visits = 0;    // entries computed (real work)
  std::uint64_t variant_visits = 0; // permutation variants summed over cells
  std::uint64_t variant_peak = 0;
  double visit_bound = 0;  // rcswx: sum over cells of 2^(open Branching(2) spans)
  bool censored = false;   // timed out
};

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records,
                            const std::string& header_comment = "") {
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "method,size,sample,tokens1,tokens2,seconds,cell_visits,variant_visits,"
         "variant_peak,visit_bound,censored\n";
  for (const auto& r : records) {
    out << r.method << ',' << r.size << ',' << r.sample << ',' << r.tokens1 << ','
        << r.tokens2 << ',' << r.seconds << ',' << r.cell_visits << ','
        << r.variant_visits << ',' << r.variant_peak << ',' << r.visit_bound << ','
        << (r.censored ? 1 : 0) << "\n";
  }
}

struct BenchOptions {
  std::vector<int> sizes;
  int samples_per_size = 5;
  std::vector<std::string> methods = {"cswx", "rcswx"};
  std::uint64_t seed = 0;
  bool branch_free = false;     // branch-free pairs isolate the quadratic core
  int sepx_node_cap = 12;       // sepx pairs are regenerated at this node count
  std::chrono::milliseconds sepx_timeout{120000};
  double min_measure_seconds = 0.01;  // fast methods repeat to this floor
};

namespace detail {

template <typename Fn>
double measure_seconds(Fn&& fn, double min_seconds) {
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  fn();
  double once = std::chrono::duration<double>(clock::now() - t0).count();
  if (once >= min_seconds) return once;
  int reps = static_cast<int>(min_seconds / std::max(once, 1e-9)) + 1;
  t0 = clock::now();
  for (int k = 0; k < reps; ++k) fn();
  double total = std::chrono::duration<double>(clock::now() - t0).count();
  return total / (reps);
}

}  // namespace detail

// Times each method on freshly sampled pairs of matched serialised size.
// Sampling is seed-deterministic; wall times are not. Serialisation happens
// outside the timed section. Per-pair timeouts are recorded as censored.
inline std::vector<BenchRecord> scaling_benchmark(const BenchOptions& opt,
                                                  const GrammarConfig& cfg = GrammarConfig{}) {
  std::vector<BenchRecord> out;
  Rng root(opt.seed);
  BudgetSamplerOptions sampler_opt;
  // branch-free pairs are span-free chains: they isolate the quadratic core,
  // where cell visits equal |s1| x |s2| exactly
  sampler_opt.allow_branching = !opt.branch_free;
  sampler_opt.allow_routing = !opt.branch_free;

  const bool want_cswx =
      std::find(opt.methods.begin(), opt.methods.end(), "cswx") != opt.methods.end();
  const bool want_rcswx =
      std::find(opt.methods.begin(), opt.methods.end(), "rcswx") != opt.methods.end();
  const bool want_sepx =
      std::find(opt.methods.begin(), opt.methods.end(), "sepx") != opt.methods.end();

  const ScoringMatrix m = ScoringMatrix::sm0();
  for (int size : opt.sizes) {
    if (size < 2) throw DomainError("benchmark sizes must be >= 2 tokens");
    for (int s = 0; s < opt.samples_per_size; ++s) {
      Rng rng = root.split(static_cast<std::uint64_t>(size) * 1000 +
                           static_cast<std::uint64_t>(s));
      DerivationTree t1 = sample_tree_with_token_budget(size, cfg, rng, sampler_opt);
      DerivationTree t2 = sample_tree_with_token_budget(size, cfg, rng, sampler_opt);
      SerialisedSequence a = serialise(t1);
      SerialisedSequence b = serialise(t2);

      if (want_cswx) {
        BenchRecord r;
        r.method = "cswx";
        r.size = size;
        r.sample = s;
        r.tokens1 = static_cast<int>(a.size()) - 1;
        r.tokens2 = static_cast<int>(b.size()) - 1;
        AlignmentMatrix mat;
        r.seconds = detail::measure_seconds([&] { mat = align(a, b, m); },
                                            opt.min_measure_seconds);
        r.cell_visits = mat.cell_visits;
        out.push_back(std::move(r));
      }
      if (want_rcswx) {
        BenchRecord r;
        r.method = "rcswx";
        r.size = size;
        r.sample = s;
        r.tokens1 = static_cast<int>(a.size()) - 1;
        r.tokens2 = static_cast<int>(b.size()) - 1;
        RecursiveAlignment rec;
        r.seconds = detail::measure_seconds([&] { rec = align_recursive(a, b, m); },
                                            opt.min_measure_seconds);
        r.cell_visits = rec.entry_visits;
        r.variant_visits = rec.swap_variant_total();
        r.variant_peak = rec.peak_variants;
        r.visit_bound = rec.cell_visit_bound();
        out.push_back(std::move(r));
      }
      if (want_sepx) {
        // regenerate at graph-node scale: exact GED is the measured subject
        const int node_target = std::min(size, opt.sepx_node_cap);
        Rng gr = root.split(0x5e9 + static_cast<std::uint64_t>(size) * 1000 +
                            static_cast<std::uint64_t>(s));
        DerivationTree g1t = sample_tree_with_graph_nodes(node_target, cfg, gr, sampler_opt);
        DerivationTree g2t = sample_tree_with_graph_nodes(node_target, cfg, gr, sampler_opt);
        SmallGraph g1 = graph_from_tree(g1t, node_target);
        SmallGraph g2 = graph_from_tree(g2t, node_target);
        BenchRecord r;
        r.method = "sepx";
        r.size = size;
        r.sample = s;
        r.tokens1 = static_cast<int>(serialise(g1t).size()) - 1;
        r.tokens2 = static_cast<int>(serialise(g2t).size()) - 1;
        r.graph_nodes1 = g1.node_count();
        r.graph_nodes2 = g2.node_count();
        using clock = std::chrono::steady_clock;
        auto t0 = clock::now();
        try {
          ged_sepx_path(g1, g2, m, opt.sepx_timeout);
        } catch (const OracleTimeoutError&) {
          r.censored = true;
        }
        r.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

// Least-squares slope of log(seconds) against log(size).
inline double log_log_slope(const std::vector<BenchRecord>& records,
                            const std::string& method) {
  std::vector<double> xs, ys;
  for (const auto& r : records) {
    if (r.method != method || r.censored || r.seconds <= 0) continue;
    xs.push_back(std::log(static_cast<double>(r.size)));
    ys.push_back(std::log(r.seconds));
  }
  if (xs.size() < 2) throw DomainError("not enough records for a slope fit");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace swx
