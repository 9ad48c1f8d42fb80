// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "swx/align.hpp"

namespace swx {

// ---------------------------------------------------------------------------
// Recursive (branch-permutation-invariant) alignment
// ---------------------------------------------------------------------------

// Same engine as `align`, with Branching(2) spans allowed to serve their
// branches in either order. Each opened span forks a swap variant; variants
// live as extra per-cell entries and collapse cell-wise when the closing
// separator retires the span, keeping the minimum-cost context.
struct RecursiveAlignment {
  int rows = 0, cols = 0;
  const SerialisedSequence* seq1 = nullptr;
  const SerialisedSequence* seq2 = nullptr;
  std::shared_ptr<detail::StateAlignment> engine;
  std::uint64_t entry_visits = 0;   // total finalized variant entries
  std::uint64_t peak_variants = 0;  // largest per-cell variant count

  double final_distance() const { return engine->final_distance(); }

  // Permutation-variant accounting, mirroring the local-cost model: at cell
  // (i, j) a branch-order variant is a distinct assignment of swap bits to
  // the simultaneously open Branching(2) spans, so at most 2^(open swappable
  // spans) variants exist per cell. Grammar contexts within one variant are
  // engine bookkeeping, reported separately as entry visits.
  double cell_visit_bound() const {
    double sum1 = 0, sum2 = 0;
    for (int i = 0; i < rows; ++i)
      sum1 += std::pow(2.0, engine->spans1.max_open_after(i, true));
    for (int j = 0; j < cols; ++j)
      sum2 += std::pow(2.0, engine->spans2.max_open_after(j, true));
    return sum1 * sum2;
  }

  std::uint64_t max_variants_at(int i, int j) const {
    return static_cast<std::uint64_t>(1) << (engine->spans1.max_open_after(i, true) +
                                             engine->spans2.max_open_after(j, true));
  }

  // Distinct swap-bit assignments among the cell's entries.
  std::size_t variants_at(int i, int j) const {
    std::vector<std::vector<std::uint32_t>> seen;
    for (const auto& e : engine->cell(i, j)) {
      std::vector<std::uint32_t> sig;
      auto collect = [&](const detail::OpenChain& open, const SpanTable& spans,
                         std::uint32_t side) {
        for (int k = 0; k < open.size; ++k) {
          int sid = detail::record_span(open.rec[k]);
          if (!spans[static_cast<std::size_t>(sid)].swappable) continue;
          sig.push_back((side << 30) | (static_cast<std::uint32_t>(sid) << 1) |
                        (detail::record_swap(open.rec[k]) ? 1u : 0u));
        }
      };
      collect(e.state.open1, engine->spans1, 1);
      collect(e.state.open2, engine->spans2, 2);
      if (std::find(seen.begin(), seen.end(), sig) == seen.end())
        seen.push_back(std::move(sig));
    }
    return seen.size();
  }

  // Total permutation-variant visits across the matrix; the brute-force
  // equivalent computes 2^b full matrices.
  std::uint64_t swap_variant_total() const {
    std::uint64_t total = 0;
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) total += variants_at(i, j);
    return total;
  }

  // Cell-wise minimum across the variants, with the winning arrival
  // direction; used for matrix dumps and inspection.
  AlignmentMatrix collapsed() const { return detail::collapse(engine); }
};

inline RecursiveAlignment align_recursive(const SerialisedSequence& s1,
                                          const SerialisedSequence& s2,
                                          const ScoringMatrix& m,
                                          const TieBreak& tie = TieBreak::standard()) {
  RecursiveAlignment out;
  out.engine = std::make_shared<detail::StateAlignment>(
      detail::make_state_alignment(s1, s2, m, true, tie));
  out.rows = out.engine->rows;
  out.cols = out.engine->cols;
  out.seq1 = &s1;
  out.seq2 = &s2;
  out.entry_visits = out.engine->entry_visits;
  out.peak_variants = out.engine->peak_variants;
  return out;
}

inline double rcswx_distance(const DerivationTree& t1, const DerivationTree& t2,
                             const ScoringMatrix& m) {
  SerialisedSequence a = serialise(t1);
  SerialisedSequence b = serialise(t2);
  RecursiveAlignment r = align_recursive(a, b, m);
  double d = r.final_distance();
  if (!std::isfinite(d))
    throw UnalignableError("trees are unalignable under the given scoring matrix");
  return d;
}

// Edit path of the cheapest branch-order variant. Operations carry the swap
// mask of the variant they were traced through; step indices refer to the
// original (unswapped) token sequences, in the variant's serving order.
inline EditPath rcswx_trace_back(const SerialisedSequence& s1, const SerialisedSequence& s2,
                                 const RecursiveAlignment& r, const ScoringMatrix& m) {
  auto [steps, variant] = detail::chain_steps(*r.engine);
  EditPath path = detail::build_edit_path(std::move(steps), s1, s2, m);
  path.variant_mask = variant;
  for (auto& op : path.ops) op.variant_mask = variant;
  return path;
}

}  // namespace swx
