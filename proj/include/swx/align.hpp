// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <vector>

#include "swx/scoring.hpp"

namespace swx {

class UnalignableError : public DomainError {
public:
  using DomainError::DomainError;
};

// Back-pointer directions. Add consumes s1[i] (a token present only in the
// first model), Rem consumes s2[j]; Sub consumes both.
enum class Dir : std::uint8_t { None = 0, Sub, Add, Rem };

inline const char* to_string(Dir d) {
  switch (d) {
    case Dir::None: return "none";
    case Dir::Sub: return "sub";
    case Dir::Add: return "add";
    case Dir::Rem: return "rem";
  }
  return "?";
}

// Candidate evaluation order. The distance never depends on it; the traced
// path may, so a fixed default keeps runs reproducible.
struct TieBreak {
  std::array<Dir, 3> order = {Dir::Sub, Dir::Add, Dir::Rem};

  static TieBreak standard() { return TieBreak{}; }
  static std::vector<TieBreak> all_orders() {
    std::vector<TieBreak> out;
    std::array<Dir, 3> dirs = {Dir::Sub, Dir::Add, Dir::Rem};
    std::sort(dirs.begin(), dirs.end());
    do {
      out.push_back(TieBreak{dirs});
    } while (std::next_permutation(dirs.begin(), dirs.end()));
    return out;
  }
};

// ---------------------------------------------------------------------------
// Span structure
// ---------------------------------------------------------------------------

// A branching/routing token triple (opener, optional divider, closer) in one
// sequence. Only Branching(2) spans are swappable.
struct BranchSpan {
  int opener = -1;
  int divider = -1;  // Branching(2) only
  int closer = -1;
  int parent = -1;  // enclosing span index, -1 at top level
  int depth = 0;
  int len1 = 0;  // tokens strictly between opener and divider (or closer)
  int len2 = 0;  // tokens strictly between divider and closer
  bool swappable = false;
};

// Span table for one sequence: nesting forest, opener/closer lookups, and the
// position mapping under branch swaps. Swapping a Branching(2) span serves
// its second segment first; marker tokens keep their positions within the
// enclosing frame and nested spans translate linearly.
class SpanTable {
public:
  explicit SpanTable(const SerialisedSequence& seq = SerialisedSequence{}) {
    std::vector<int> open_stack;
    std::vector<int> lookup(seq.size(), -1);
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const Token& t = seq[k];
      if (t.is_opener()) {
        BranchSpan s;
        s.opener = static_cast<int>(k);
        s.parent = open_stack.empty() ? -1 : open_stack.back();
        s.depth = static_cast<int>(open_stack.size());
        s.swappable = t.node_class == NodeClass::Branching2;
        lookup[k] = static_cast<int>(spans_.size());
        open_stack.push_back(static_cast<int>(spans_.size()));
        spans_.push_back(s);
      } else if (t.is_separator()) {
        int sid = lookup[static_cast<std::size_t>(t.opener_index)];
        if (t.role == SepRole::BranchDivider) {
          spans_[static_cast<std::size_t>(sid)].divider = static_cast<int>(k);
        } else {
          spans_[static_cast<std::size_t>(sid)].closer = static_cast<int>(k);
          open_stack.pop_back();
        }
      }
    }
    for (auto& s : spans_) {
      if (s.divider >= 0) {
        s.len1 = s.divider - s.opener - 1;
        s.len2 = s.closer - s.divider - 1;
      } else {
        s.len1 = s.closer - s.opener - 1;
      }
    }
    opener_of_.assign(seq.size(), -1);
    closer_of_.assign(seq.size(), -1);
    for (std::size_t sid = 0; sid < spans_.size(); ++sid) {
      opener_of_[static_cast<std::size_t>(spans_[sid].opener)] = static_cast<int>(sid);
      closer_of_[static_cast<std::size_t>(spans_[sid].closer)] = static_cast<int>(sid);
    }
    children_.assign(spans_.size(), {});
    for (std::size_t sid = 0; sid < spans_.size(); ++sid) {
      if (spans_[sid].parent < 0)
        top_level_.push_back(static_cast<int>(sid));
      else
        children_[static_cast<std::size_t>(spans_[sid].parent)].push_back(
            static_cast<int>(sid));
    }
    finalise(seq);
  }

  std::size_t count() const { return spans_.size(); }
  const BranchSpan& operator[](std::size_t sid) const { return spans_[sid]; }
  int span_opened_at(int orig) const { return opener_of_[static_cast<std::size_t>(orig)]; }
  int span_closed_at(int orig) const { return closer_of_[static_cast<std::size_t>(orig)]; }

  // True when the two branch segments of a swappable span hold identical
  // token content, making the swap a no-op.
  bool swap_is_noop(int sid) const { return noop_swap_[static_cast<std::size_t>(sid)]; }

  void finalise(const SerialisedSequence& seq) {
    noop_swap_.assign(spans_.size(), false);
    for (std::size_t sid = 0; sid < spans_.size(); ++sid) {
      const BranchSpan& s = spans_[sid];
      if (!s.swappable) continue;
      if (s.len1 != s.len2) continue;
      bool same = true;
      for (int k = 0; k < s.len1 && same; ++k)
        same = seq[static_cast<std::size_t>(s.opener + 1 + k)].same_identity(
            seq[static_cast<std::size_t>(s.divider + 1 + k)]);
      noop_swap_[sid] = same;
    }
    // swappable-span forest for position resolution; other spans never move
    swap_top_.clear();
    swap_children_.assign(spans_.size(), {});
    std::vector<int> swap_stack;
    for (std::size_t sid = 0; sid < spans_.size(); ++sid) {
      while (!swap_stack.empty() &&
             spans_[static_cast<std::size_t>(swap_stack.back())].closer <
                 spans_[sid].opener)
        swap_stack.pop_back();
      if (!spans_[sid].swappable) continue;
      if (swap_stack.empty())
        swap_top_.push_back(static_cast<int>(sid));
      else
        swap_children_[static_cast<std::size_t>(swap_stack.back())].push_back(
            static_cast<int>(sid));
      swap_stack.push_back(static_cast<int>(sid));
    }
    in_swap_span_.assign(opener_of_.size(), false);
    for (std::size_t sid = 0; sid < spans_.size(); ++sid) {
      if (!spans_[sid].swappable) continue;
      for (int p = spans_[sid].opener + 1; p < spans_[sid].closer; ++p)
        in_swap_span_[static_cast<std::size_t>(p)] = true;
    }
  }

  // View position -> original token index, given per-span swap bits. Only
  // swappable spans relocate tokens.
  template <typename BitOf>
  int resolve(int pos, BitOf&& bit_of) const {
    if (!in_swap_span_[static_cast<std::size_t>(pos)]) return pos;
    int p = pos;
    const std::vector<int>* candidates = &swap_top_;
    for (;;) {
      const BranchSpan* hit = nullptr;
      int hit_id = -1;
      for (int sid : *candidates) {
        const BranchSpan& s = spans_[static_cast<std::size_t>(sid)];
        if (s.opener <= p && p <= s.closer) {
          hit = &s;
          hit_id = sid;
          break;
        }
      }
      if (!hit || p == hit->opener || p == hit->closer) return p;
      if (bit_of(hit_id)) {
        int r = p - hit->opener;
        if (r <= hit->len2)
          p = hit->opener + hit->len1 + 1 + r;  // second branch served first
        else if (r == hit->len2 + 1)
          p = hit->divider;
        else
          p = hit->opener + (r - hit->len2 - 1);
      }
      if (p == hit->divider) return p;
      candidates = &swap_children_[static_cast<std::size_t>(hit_id)];
    }
  }

  // Largest possible number of spans still open after consuming the token at
  // view position `pos`, over all swap assignments. With `swappable_only`
  // counts Branching(2) spans alone: the permutation depth of the local-cost
  // model.
  int max_open_after(int pos, bool swappable_only = false) const {
    return max_open_after(pos, top_level_, swappable_only);
  }

private:
  int max_open_after(int p, const std::vector<int>& candidates, bool swappable_only) const {
    const BranchSpan* hit = nullptr;
    int hit_id = -1;
    for (int sid : candidates) {
      const BranchSpan& s = spans_[static_cast<std::size_t>(sid)];
      if (s.opener <= p && p <= s.closer) {
        hit = &s;
        hit_id = sid;
        break;
      }
    }
    if (!hit) return 0;
    const int self = (swappable_only && !hit->swappable) ? 0 : 1;
    if (p == hit->closer) return 0;
    if (p == hit->opener) return self;
    int best = 0;
    const int flips = hit->swappable ? 2 : 1;
    for (int bit = 0; bit < flips; ++bit) {
      int q = p;
      if (bit) {
        int r = p - hit->opener;
        if (r <= hit->len2)
          q = hit->opener + hit->len1 + 1 + r;
        else if (r == hit->len2 + 1)
          q = hit->divider;
        else
          q = hit->opener + (r - hit->len2 - 1);
      }
      int sub = q == hit->divider
                    ? 0
                    : max_open_after(q, children_[static_cast<std::size_t>(hit_id)],
                                     swappable_only);
      best = std::max(best, sub);
    }
    return self + best;
  }

  std::vector<BranchSpan> spans_;
  std::vector<int> opener_of_, closer_of_;
  std::vector<int> top_level_;
  std::vector<std::vector<int>> children_;
  std::vector<int> swap_top_;
  std::vector<std::vector<int>> swap_children_;
  std::vector<bool> noop_swap_;
  std::vector<bool> in_swap_span_;
};

// ---------------------------------------------------------------------------
// Alignment state machine
// ---------------------------------------------------------------------------

namespace detail {

// Bracket weight of a token. The two branches of a Branching(2) count as
// nested segments: the opener opens two levels, the divider closes one and
// opens one, the closer closes two. A span that straddles a branch divider
// can therefore never balance.
struct BracketDelta {
  int opens = 0, closes = 0;
};

inline BracketDelta bracket_delta(const Token& t, const SerialisedSequence& seq) {
  if (t.is_node()) {
    if (t.node_class == NodeClass::Branching2) return {2, 0};
    if (t.node_class == NodeClass::BranchingK || t.node_class == NodeClass::Routing)
      return {1, 0};
    return {0, 0};
  }
  if (t.is_separator()) {
    if (t.role == SepRole::BranchDivider) return {1, 1};
    const Token& opener = seq[static_cast<std::size_t>(t.opener_index)];
    return {0, opener.node_class == NodeClass::Branching2 ? 2 : 1};
  }
  return {0, 0};
}

// How an open span was consumed: paired with the matching opener of the other
// sequence, or added/removed wholesale. Indel-mode spans carry the bracket
// balance of the other sequence's structure consumed since the opener; the
// balance must be zero at every separator of the span and may never dip
// negative, which is exactly the non-crossing rule for span intervals.
enum class SpanMode : std::uint8_t { Paired = 0, Indel = 1 };

// Packed open-span record: span id, mode, swap bit, balance counter.
inline std::uint32_t pack_record(int span_id, SpanMode mode, bool swap, int balance) {
  return (static_cast<std::uint32_t>(span_id) << 12) |
         (static_cast<std::uint32_t>(mode) << 11) |
         (static_cast<std::uint32_t>(swap ? 1 : 0) << 10) |
         static_cast<std::uint32_t>(balance & 0x3ff);
}
inline int record_span(std::uint32_t r) { return static_cast<int>(r >> 12); }
inline SpanMode record_mode(std::uint32_t r) {
  return static_cast<SpanMode>((r >> 11) & 1);
}
inline bool record_swap(std::uint32_t r) { return ((r >> 10) & 1) != 0; }
inline int record_balance(std::uint32_t r) { return static_cast<int>(r & 0x3ff); }
inline std::uint32_t with_balance(std::uint32_t r, int balance) {
  return (r & ~0x3ffu) | static_cast<std::uint32_t>(balance & 0x3ff);
}

inline constexpr int kMaxOpenSpans = 15;

// A bounded chain of packed open-span records, outermost first.
struct OpenChain {
  std::uint8_t size = 0;
  std::uint32_t rec[kMaxOpenSpans];

  bool operator==(const OpenChain& o) const {
    if (size != o.size) return false;
    for (int k = 0; k < size; ++k)
      if (rec[k] != o.rec[k]) return false;
    return true;
  }
  void push(std::uint32_t r) {
    if (size >= kMaxOpenSpans)
      throw DomainError("alignment exceeds the supported span nesting depth");
    rec[size++] = r;
  }
  void pop() { --size; }
  std::uint32_t& back() { return rec[size - 1]; }
  std::uint32_t back() const { return rec[size - 1]; }
  bool empty() const { return size == 0; }
};

// The grammar context of a partial alignment: the chains of open spans on
// both sides. Two prefixes with equal context admit exactly the same
// continuations, so the dynamic program merges them.
struct PathState {
  OpenChain open1, open2;

  bool operator==(const PathState& o) const {
    return open1 == o.open1 && open2 == o.open2;
  }
};

struct StateEntry {
  PathState state;
  double cost = kInf;
  Dir dir = Dir::None;
  int prev = -1;  // entry index within the predecessor cell
  int i1 = -1;    // original s1 index consumed on arrival
  int i2 = -1;    // original s2 index consumed
};

// Applies the consumption of `tok` (a token of side X) to the OTHER side's
// open indel-mode spans: their balance counters absorb the token's bracket
// weight. Returns false when a counter dips negative (a crossing).
inline bool absorb_other(OpenChain& other_open, const Token& tok,
                         const SerialisedSequence& own_seq) {
  BracketDelta d = bracket_delta(tok, own_seq);
  if (d.opens == 0 && d.closes == 0) return true;
  for (int k = 0; k < other_open.size; ++k) {
    std::uint32_t r = other_open.rec[k];
    if (record_mode(r) != SpanMode::Indel) continue;
    int bal = record_balance(r) - d.closes;
    if (bal < 0) return false;
    other_open.rec[k] = with_balance(r, bal + d.opens);
  }
  return true;
}

// The exact constrained aligner. Cells hold one entry per reachable grammar
// context; Branching(2) spans additionally branch on their swap bit when
// swaps are enabled, and contexts retire at closing separators, collapsing
// the variants cell-wise. Contexts that cannot beat a known-feasible upper
// bound are discarded: the bound comes from a greedy single-context pass and
// the admissible remainder is the surplus node count priced at the cheapest
// indel, so no optimal completion is ever pruned.
struct StateAlignment {
  int rows = 0, cols = 0;
  const SerialisedSequence* seq1 = nullptr;
  const SerialisedSequence* seq2 = nullptr;
  ScoringMatrix scoring;
  bool swaps_enabled = false;
  bool greedy = false;  // keep one context per cell: upper-bound pass
  double upper_bound = kInf;
  SpanTable spans1, spans2;
  // remaining-node bounds per next-unconsumed position; min/max over swap
  // variants (they coincide when swaps are off or outside swappable spans)
  std::vector<int> suffix_lo1, suffix_hi1, suffix_lo2, suffix_hi2;
  double min_node_indel = 1.0;
  std::vector<std::vector<StateEntry>> cells;
  std::uint64_t entry_visits = 0;
  std::uint64_t peak_variants = 0;

  const std::vector<StateEntry>& cell(int i, int j) const {
    return cells[static_cast<std::size_t>(i) * cols + j];
  }
  std::vector<StateEntry>& cell(int i, int j) {
    return cells[static_cast<std::size_t>(i) * cols + j];
  }
  double final_distance() const {
    const auto& fin = cell(rows - 1, cols - 1);
    double best = kInf;
    for (const auto& e : fin) best = std::min(best, e.cost);
    return best;
  }
  int final_entry() const {
    const auto& fin = cell(rows - 1, cols - 1);
    int best = -1;
    for (int k = 0; k < static_cast<int>(fin.size()); ++k)
      if (best < 0 || fin[static_cast<std::size_t>(k)].cost <
                          fin[static_cast<std::size_t>(best)].cost)
        best = k;
    return best;
  }

  double remainder_bound(int i, int j) const {
    // tokens 0..i and 0..j are consumed at cell (i, j); every surplus node
    // costs at least one indel under any swap variant
    const std::size_t a = static_cast<std::size_t>(i) + 1;
    const std::size_t b = static_cast<std::size_t>(j) + 1;
    int surplus = std::max(suffix_lo1[a] - suffix_hi2[b], suffix_lo2[b] - suffix_hi1[a]);
    return std::max(0, surplus) * min_node_indel;
  }
};

inline void run_state_alignment(StateAlignment& out, const TieBreak& tie) {
  const SerialisedSequence& s1 = *out.seq1;
  const SerialisedSequence& s2 = *out.seq2;
  const ScoringMatrix& m = out.scoring;
  out.cells.assign(static_cast<std::size_t>(out.rows) * out.cols, {});
  out.cell(0, 0).push_back(StateEntry{PathState{}, 0.0, Dir::None, -1, -1, -1});
  out.entry_visits = 1;
  out.peak_variants = 1;

  auto bit_of = [](const OpenChain& open) {
    return [&open](int sid) {
      for (int k = 0; k < open.size; ++k)
        if (record_span(open.rec[k]) == sid) return record_swap(open.rec[k]);
      return false;
    };
  };

  for (int i = 0; i < out.rows; ++i) {
    for (int j = 0; j < out.cols; ++j) {
      if (i == 0 && j == 0) continue;
      auto& target = out.cell(i, j);
      const double budget = out.upper_bound - out.remainder_bound(i, j) + 1e-12;

      auto offer = [&](const StateEntry& cand) {
        if (cand.cost > budget) return;
        if (out.greedy) {
          if (target.empty()) {
            target.push_back(cand);
          } else if (cand.cost < target.front().cost) {
            target.front() = cand;
          }
          return;
        }
        for (auto& e : target) {
          if (e.state == cand.state) {
            if (cand.cost < e.cost) e = cand;
            return;
          }
        }
        target.push_back(cand);
      };

      // Consumes one or two tokens on top of predecessor entry `pe`,
      // updating the context; offers every admissible successor.
      auto expand = [&](Dir dir, int pentry, const StateEntry& pe) {
        int orig1 = -1, orig2 = -1;
        if (dir != Dir::Rem) orig1 = out.spans1.resolve(i, bit_of(pe.state.open1));
        if (dir != Dir::Add) orig2 = out.spans2.resolve(j, bit_of(pe.state.open2));
        const Token* t1 = orig1 >= 0 ? &s1[static_cast<std::size_t>(orig1)] : nullptr;
        const Token* t2 = orig2 >= 0 ? &s2[static_cast<std::size_t>(orig2)] : nullptr;

        double step_cost = 0;
        if (dir == Dir::Sub) {
          if (t1->is_start() != t2->is_start()) return;
          if (t1->is_separator() != t2->is_separator()) return;
          if (t1->is_node() && t1->node_class != t2->node_class) return;
          if (t1->is_separator() && t1->role != t2->role) return;
          step_cost = substitution_cost(*t1, *t2, m);
        } else if (dir == Dir::Add) {
          step_cost = indel_cost(*t1, m);
        } else {
          step_cost = indel_cost(*t2, m);
        }
        if (!std::isfinite(step_cost)) return;

        PathState st = pe.state;

        // cross-side balance updates for the consumed tokens
        if (t1 && !absorb_other(st.open2, *t1, s1)) return;
        if (t2 && !absorb_other(st.open1, *t2, s2)) return;

        // own-side structural bookkeeping
        int swap_slots[2];  // encoded positions in open1/open2 that may branch
        int n_slots = 0;
        auto handle_own = [&](const Token& tok, int orig, bool is_seq1) -> bool {
          const SpanTable& spans = is_seq1 ? out.spans1 : out.spans2;
          OpenChain& open = is_seq1 ? st.open1 : st.open2;
          if (tok.is_separator()) {
            if (open.empty()) return false;
            std::uint32_t rec = open.back();
            const BranchSpan& span = spans[static_cast<std::size_t>(record_span(rec))];
            if (span.opener != tok.opener_index) return false;
            if (dir == Dir::Sub) {
              if (record_mode(rec) != SpanMode::Paired) return false;
            } else {
              if (record_mode(rec) != SpanMode::Indel) return false;
              if (record_balance(rec) != 0) return false;
            }
            if (tok.role == SepRole::Closer) open.pop();
            return true;
          }
          if (tok.is_opener()) {
            int sid = spans.span_opened_at(orig);
            SpanMode mode = dir == Dir::Sub ? SpanMode::Paired : SpanMode::Indel;
            open.push(pack_record(sid, mode, false, 0));
            if (out.swaps_enabled && spans[static_cast<std::size_t>(sid)].swappable &&
                !spans.swap_is_noop(sid)) {
              int idx = open.size - 1;
              swap_slots[n_slots++] = is_seq1 ? idx : -(idx + 1);
            }
          }
          return true;
        };
        if (t1 && !handle_own(*t1, orig1, true)) return;
        if (t2 && !handle_own(*t2, orig2, false)) return;

        StateEntry cand;
        cand.cost = pe.cost + step_cost;
        cand.dir = dir;
        cand.prev = pentry;
        cand.i1 = orig1;
        cand.i2 = orig2;

        for (int bits = 0; bits < (1 << n_slots); ++bits) {
          PathState variant = st;
          for (int k = 0; k < n_slots; ++k) {
            if (!(bits & (1 << k))) continue;
            int slot = swap_slots[k];
            OpenChain& open = slot >= 0 ? variant.open1 : variant.open2;
            open.rec[slot >= 0 ? slot : -slot - 1] |= 1u << 10;  // swap bit
          }
          cand.state = variant;
          offer(cand);
        }
      };

      for (Dir d : tie.order) {
        switch (d) {
          case Dir::Sub:
            if (i > 0 && j > 0) {
              const auto& src = out.cell(i - 1, j - 1);
              for (int k = 0; k < static_cast<int>(src.size()); ++k)
                expand(Dir::Sub, k, src[static_cast<std::size_t>(k)]);
            }
            break;
          case Dir::Add:
            if (i > 0) {
              const auto& src = out.cell(i - 1, j);
              for (int k = 0; k < static_cast<int>(src.size()); ++k)
                expand(Dir::Add, k, src[static_cast<std::size_t>(k)]);
            }
            break;
          case Dir::Rem:
            if (j > 0) {
              const auto& src = out.cell(i, j - 1);
              for (int k = 0; k < static_cast<int>(src.size()); ++k)
                expand(Dir::Rem, k, src[static_cast<std::size_t>(k)]);
            }
            break;
          default:
            break;
        }
      }

      out.entry_visits += target.size();
      out.peak_variants = std::max<std::uint64_t>(out.peak_variants, target.size());
    }
  }
}

inline void prepare_state_alignment(StateAlignment& out, const SerialisedSequence& s1,
                                    const SerialisedSequence& s2, const ScoringMatrix& m,
                                    bool swaps) {
  out.rows = static_cast<int>(s1.size());
  out.cols = static_cast<int>(s2.size());
  out.seq1 = &s1;
  out.seq2 = &s2;
  out.scoring = m;
  out.swaps_enabled = swaps;
  out.spans1 = SpanTable(s1);
  out.spans2 = SpanTable(s2);

  // remaining-node bounds and the cheapest node indel, for the remainder
  // bound; inside a swappable span the exact count depends on the swap bits,
  // so the bounds widen to [nodes after the outermost such span, plus its
  // whole interior]
  auto suffix_bounds = [&](const SerialisedSequence& s, const SpanTable& spans,
                           std::vector<int>& lo, std::vector<int>& hi) {
    const std::size_t n = s.size();
    std::vector<int> suffix(n + 1, 0);
    for (int k = static_cast<int>(n) - 1; k >= 0; --k)
      suffix[static_cast<std::size_t>(k)] = suffix[static_cast<std::size_t>(k) + 1] +
                                            (s[static_cast<std::size_t>(k)].is_node() ? 1 : 0);
    lo = suffix;
    hi = suffix;
    if (!swaps) return;
    std::vector<int> outer(n, -1);  // outermost swappable span containing p
    for (std::size_t sid = 0; sid < spans.count(); ++sid) {
      const BranchSpan& sp = spans[sid];
      if (!sp.swappable) continue;
      for (int p = sp.opener + 1; p < sp.closer; ++p)
        if (outer[static_cast<std::size_t>(p)] < 0)
          outer[static_cast<std::size_t>(p)] = static_cast<int>(sid);
    }
    for (std::size_t p = 0; p < n; ++p) {
      if (outer[p] < 0) continue;
      const BranchSpan& sp = spans[static_cast<std::size_t>(outer[p])];
      int after = suffix[static_cast<std::size_t>(sp.closer) + 1];
      int inside = suffix[static_cast<std::size_t>(sp.opener) + 1] - after;
      lo[p] = after;
      hi[p] = after + inside;
    }
  };
  suffix_bounds(s1, out.spans1, out.suffix_lo1, out.suffix_hi1);
  suffix_bounds(s2, out.spans2, out.suffix_lo2, out.suffix_hi2);
  out.min_node_indel = kInf;
  double total_indel = 0;
  for (const auto& s : {std::cref(s1), std::cref(s2)})
    for (const auto& t : s.get().tokens)
      if (t.is_node()) {
        out.min_node_indel = std::min(out.min_node_indel, indel_cost(t, m));
        total_indel += indel_cost(t, m);
      }
  if (!std::isfinite(out.min_node_indel)) out.min_node_indel = 0;
  // deleting everything and inserting everything is always feasible
  out.upper_bound = total_indel;
}

inline StateAlignment make_state_alignment(const SerialisedSequence& s1,
                                           const SerialisedSequence& s2,
                                           const ScoringMatrix& m, bool swaps,
                                           const TieBreak& tie) {
  StateAlignment out;
  prepare_state_alignment(out, s1, s2, m, swaps);

  // Span-free inputs have one context per cell and need no bounding: the
  // plain quadratic grid is already exact, with |s1| x |s2| cell visits.
  if (out.spans1.count() + out.spans2.count() > 0) {
    // greedy single-context passes: a cheap feasible script bounds the search
    StateAlignment probe;
    prepare_state_alignment(probe, s1, s2, m, swaps);
    probe.greedy = true;
    run_state_alignment(probe, tie);
    double greedy_cost = probe.final_distance();

    StateAlignment reversed;
    prepare_state_alignment(reversed, s2, s1, m, swaps);
    reversed.greedy = true;
    run_state_alignment(reversed, tie);
    greedy_cost = std::min(greedy_cost, reversed.final_distance());

    out.upper_bound = std::min(out.upper_bound, greedy_cost);
  }
  run_state_alignment(out, tie);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrix view and public alignment API
// ---------------------------------------------------------------------------

// Cumulative-cost and back-pointer matrices. `dist` holds, per cell, the
// cheapest cost over the cell's grammar contexts; `paths` the arrival
// direction of that cheapest entry. The engine handle retains the full
// per-context state for tracebacks.
struct AlignmentMatrix {
  int rows = 0, cols = 0;
  std::vector<double> dist;
  std::vector<Dir> paths;
  const SerialisedSequence* seq1 = nullptr;
  const SerialisedSequence* seq2 = nullptr;
  std::uint64_t cell_visits = 0;
  std::shared_ptr<detail::StateAlignment> engine;

  double& at(int i, int j) { return dist[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return dist[static_cast<std::size_t>(i) * cols + j]; }
  Dir& dir(int i, int j) { return paths[static_cast<std::size_t>(i) * cols + j]; }
  Dir dir(int i, int j) const { return paths[static_cast<std::size_t>(i) * cols + j]; }
  double final_distance() const { return at(rows - 1, cols - 1); }
};

namespace detail {

inline AlignmentMatrix collapse(std::shared_ptr<StateAlignment> engine) {
  AlignmentMatrix m;
  m.rows = engine->rows;
  m.cols = engine->cols;
  m.seq1 = engine->seq1;
  m.seq2 = engine->seq2;
  m.cell_visits = engine->entry_visits;
  m.dist.assign(static_cast<std::size_t>(m.rows) * m.cols, kInf);
  m.paths.assign(static_cast<std::size_t>(m.rows) * m.cols, Dir::None);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) {
      for (const auto& e : engine->cell(i, j)) {
        if (e.cost < m.at(i, j)) {
          m.at(i, j) = e.cost;
          m.dir(i, j) = e.dir;
        }
      }
    }
  m.engine = std::move(engine);
  return m;
}

}  // namespace detail

// Fills the constrained alignment matrix: per cell the minimum over
// substitution, addition and removal, each admitted only when the grammar
// constraints allow it in some reachable context.
inline AlignmentMatrix align(const SerialisedSequence& s1, const SerialisedSequence& s2,
                             const ScoringMatrix& m,
                             const TieBreak& tie = TieBreak::standard()) {
  auto engine = std::make_shared<detail::StateAlignment>(
      detail::make_state_alignment(s1, s2, m, false, tie));
  return detail::collapse(std::move(engine));
}

// ---------------------------------------------------------------------------
// Retrospective path validity (the single-path formulation)
// ---------------------------------------------------------------------------

namespace detail {

struct StepRef {
  Dir dir;
  int i1;
  int i2;
};

// Walks a stored back-pointer matrix, newest step first.
class MatrixHistory {
public:
  MatrixHistory(const AlignmentMatrix& m, int i, int j) : m_(m), i_(i), j_(j) {}

  bool operator()(StepRef& out) {
    if (i_ == 0 && j_ == 0) return false;
    Dir d = m_.dir(i_, j_);
    switch (d) {
      case Dir::Sub:
        out = {d, i_, j_};
        --i_;
        --j_;
        return true;
      case Dir::Add:
        out = {d, i_, -1};
        --i_;
        return true;
      case Dir::Rem:
        out = {d, -1, j_};
        --j_;
        return true;
      case Dir::None:
        return false;
    }
    return false;
  }

private:
  const AlignmentMatrix& m_;
  int i_, j_;
};

template <typename NextStep>
bool separator_substitution_valid(const Token& sep1, const Token& sep2, NextStep&& next) {
  if (sep1.role != sep2.role) return false;
  const int op1 = sep1.opener_index;
  const int op2 = sep2.opener_index;
  StepRef s;
  while (next(s)) {
    const bool hits1 = s.i1 == op1;
    const bool hits2 = s.i2 == op2;
    if (hits1 && hits2) return s.dir == Dir::Sub;
    if (hits1 || hits2) return false;
  }
  return false;
}

template <typename NextStep>
bool separator_indel_valid(const Token& sep, bool own_is_seq1,
                           const SerialisedSequence& other_seq, NextStep&& next) {
  const int opener = sep.opener_index;
  std::vector<BracketDelta> inside;  // newest -> oldest
  StepRef s;
  while (next(s)) {
    const int own = own_is_seq1 ? s.i1 : s.i2;
    const int other = own_is_seq1 ? s.i2 : s.i1;
    if (own == opener) {
      if (s.dir != (own_is_seq1 ? Dir::Add : Dir::Rem)) return false;
      int depth = 0;
      for (auto it = inside.rbegin(); it != inside.rend(); ++it) {  // oldest first
        depth -= it->closes;
        if (depth < 0) return false;
        depth += it->opens;
      }
      return depth == 0;
    }
    if (other >= 0)
      inside.push_back(bracket_delta(other_seq[static_cast<std::size_t>(other)], other_seq));
  }
  return false;
}

}  // namespace detail

// Validity of extending the matrix's stored path at cell (i, j) in the given
// direction, judged retrospectively against the stored back-pointers. The
// engine itself admits candidates with the equivalent context rules,
// evaluated per reachable context rather than against one stored path.
inline bool valid_path(const AlignmentMatrix& m, int i, int j, Dir direction) {
  const SerialisedSequence& s1 = *m.seq1;
  const SerialisedSequence& s2 = *m.seq2;
  switch (direction) {
    case Dir::Sub: {
      const Token& a = s1[static_cast<std::size_t>(i)];
      const Token& b = s2[static_cast<std::size_t>(j)];
      if (a.is_start() || b.is_start()) return a.is_start() && b.is_start();
      if (a.is_separator() != b.is_separator()) return false;
      if (!a.is_separator()) return a.node_class == b.node_class;
      return detail::separator_substitution_valid(
          a, b, detail::MatrixHistory(m, i - 1, j - 1));
    }
    case Dir::Add: {
      const Token& a = s1[static_cast<std::size_t>(i)];
      if (!a.is_separator()) return true;
      return detail::separator_indel_valid(a, true, s2,
                                           detail::MatrixHistory(m, i - 1, j));
    }
    case Dir::Rem: {
      const Token& b = s2[static_cast<std::size_t>(j)];
      if (!b.is_separator()) return true;
      return detail::separator_indel_valid(b, false, s1,
                                           detail::MatrixHistory(m, i, j - 1));
    }
    case Dir::None:
      break;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Edit operations
// ---------------------------------------------------------------------------

struct Step {
  Dir dir;
  int i1;  // s1 token index consumed by this step, -1 if none
  int i2;  // s2 token index consumed
};

enum class OpType { AddNode, RemoveNode, Substitute, AddEnclosure, RemoveEnclosure };

inline const char* to_string(OpType t) {
  switch (t) {
    case OpType::AddNode: return "add_node";
    case OpType::RemoveNode: return "remove_node";
    case OpType::Substitute: return "substitute";
    case OpType::AddEnclosure: return "add_enclosure";
    case OpType::RemoveEnclosure: return "remove_enclosure";
  }
  return "?";
}

// A dependency group: the operation is inadmissible in a selection that
// contains every disabler unless it also contains an enabler.
struct ConstraintGroup {
  std::vector<int> disablers;
  std::vector<int> enablers;
};

struct EditOperation {
  int id = -1;
  OpType op_type = OpType::Substitute;
  double value = 0;
  int i = -1, j = -1;            // node token indices (s1, s2)
  std::vector<int> ii, jj;       // separator token indices (s1, s2)
  std::vector<int> disablers, enablers;  // flattened unions of the groups
  std::vector<ConstraintGroup> groups;
  std::uint64_t variant_mask = 0;  // branch-order variant the op was traced through
  int step = -1;                   // forward index of the main step
};

struct EditPath {
  SerialisedSequence seq1, seq2;  // sequences the step indices refer to
  std::vector<Step> steps;
  std::vector<int> step_op;  // covering op id per step, -1 when none
  std::vector<EditOperation> ops;
  double total_cost = 0;
  std::uint64_t variant_mask = 0;
};

namespace detail {

struct SegmentScan {
  int kept = 0;
  std::vector<int> removes;
  std::vector<int> adds;
};

inline EditPath build_edit_path(std::vector<Step> steps, const SerialisedSequence& s1,
                                const SerialisedSequence& s2, const ScoringMatrix& m) {
  EditPath path;
  path.seq1 = s1;
  path.seq2 = s2;
  path.steps = std::move(steps);
  const int nsteps = static_cast<int>(path.steps.size());
  path.step_op.assign(static_cast<std::size_t>(nsteps), -1);

  std::vector<int> pos1(s1.size(), -1), pos2(s2.size(), -1);
  for (int p = 0; p < nsteps; ++p) {
    const Step& st = path.steps[static_cast<std::size_t>(p)];
    if (st.i1 >= 0) pos1[static_cast<std::size_t>(st.i1)] = p;
    if (st.i2 >= 0) pos2[static_cast<std::size_t>(st.i2)] = p;
  }

  std::map<int, std::vector<int>> seps1, seps2;  // opener index -> separators
  for (std::size_t k = 0; k < s1.size(); ++k)
    if (s1[k].is_separator()) seps1[s1[k].opener_index].push_back(static_cast<int>(k));
  for (std::size_t k = 0; k < s2.size(); ++k)
    if (s2[k].is_separator()) seps2[s2[k].opener_index].push_back(static_cast<int>(k));

  std::map<int, int> op_of_opener1, op_of_opener2;
  for (int p = 0; p < nsteps; ++p) {
    const Step& st = path.steps[static_cast<std::size_t>(p)];
    EditOperation op;
    op.step = p;
    switch (st.dir) {
      case Dir::Add: {
        const Token& t = s1[static_cast<std::size_t>(st.i1)];
        if (t.is_separator()) break;
        op.i = st.i1;
        op.value = indel_cost(t, m);
        if (t.is_opener()) {
          op.op_type = OpType::RemoveEnclosure;
          op.ii = seps1[st.i1];
          for (int k : op.ii) op.value += indel_cost(s1[static_cast<std::size_t>(k)], m);
        } else {
          op.op_type = OpType::RemoveNode;
        }
        if (op.value > 0) {
          op.id = static_cast<int>(path.ops.size());
          if (t.is_opener()) op_of_opener1[st.i1] = op.id;
          path.ops.push_back(op);
        }
        break;
      }
      case Dir::Rem: {
        const Token& t = s2[static_cast<std::size_t>(st.i2)];
        if (t.is_separator()) break;
        op.j = st.i2;
        op.value = indel_cost(t, m);
        if (t.is_opener()) {
          op.op_type = OpType::AddEnclosure;
          op.jj = seps2[st.i2];
          for (int k : op.jj) op.value += indel_cost(s2[static_cast<std::size_t>(k)], m);
        } else {
          op.op_type = OpType::AddNode;
        }
        if (op.value > 0) {
          op.id = static_cast<int>(path.ops.size());
          if (t.is_opener()) op_of_opener2[st.i2] = op.id;
          path.ops.push_back(op);
        }
        break;
      }
      case Dir::Sub: {
        const Token& a = s1[static_cast<std::size_t>(st.i1)];
        const Token& b = s2[static_cast<std::size_t>(st.i2)];
        if (a.is_separator() || a.is_start()) break;
        op.value = substitution_cost(a, b, m);
        if (op.value > 0) {
          op.op_type = OpType::Substitute;
          op.i = st.i1;
          op.j = st.i2;
          if (a.is_opener()) {
            op.ii = seps1[st.i1];
            op.jj = seps2[st.i2];
          }
          op.id = static_cast<int>(path.ops.size());
          path.ops.push_back(op);
        }
        break;
      }
      default:
        break;
    }
  }

  // step coverage for replay: separators follow their opener's operation
  std::map<int, int> op_at_step;
  for (const auto& op : path.ops) op_at_step[op.step] = op.id;
  for (int p = 0; p < nsteps; ++p) {
    const Step& st = path.steps[static_cast<std::size_t>(p)];
    auto it = op_at_step.find(p);
    if (it != op_at_step.end()) {
      path.step_op[static_cast<std::size_t>(p)] = it->second;
      continue;
    }
    if (st.dir == Dir::Add) {
      const Token& t = s1[static_cast<std::size_t>(st.i1)];
      if (t.is_separator()) {
        auto o = op_of_opener1.find(t.opener_index);
        if (o != op_of_opener1.end()) path.step_op[static_cast<std::size_t>(p)] = o->second;
      }
    } else if (st.dir == Dir::Rem) {
      const Token& t = s2[static_cast<std::size_t>(st.i2)];
      if (t.is_separator()) {
        auto o = op_of_opener2.find(t.opener_index);
        if (o != op_of_opener2.end()) path.step_op[static_cast<std::size_t>(p)] = o->second;
      }
    }
  }

  path.total_cost = 0;
  for (const auto& op : path.ops) path.total_cost += op.value;

  // ---------------------------------------------------------------------
  // Dependency groups. Every branching/routing segment that survives into
  // the offspring must keep at least one node, and so must the tree root:
  //  - adding an enclosure around nodes is disabled by deleting them all and
  //    enabled by adding another node inside;
  //  - adding an enclosure plus its whole content is disabled by itself and
  //    enabled by any inside addition;
  //  - deleting a node inside an enclosure is disabled by deleting all nodes
  //    inside and enabled by an inside addition or deleting the enclosure.
  // ---------------------------------------------------------------------
  auto scan_segment = [&](int pa, int pb) {
    SegmentScan sc;
    for (int p = pa + 1; p < pb; ++p) {
      const Step& st = path.steps[static_cast<std::size_t>(p)];
      const int op_id = path.step_op[static_cast<std::size_t>(p)];
      switch (st.dir) {
        case Dir::Sub: {
          const Token& t = s1[static_cast<std::size_t>(st.i1)];
          if (t.is_node()) ++sc.kept;
          break;
        }
        case Dir::Add: {
          const Token& t = s1[static_cast<std::size_t>(st.i1)];
          if (t.is_node() && op_id >= 0 &&
              path.ops[static_cast<std::size_t>(op_id)].step == p)
            sc.removes.push_back(op_id);
          break;
        }
        case Dir::Rem: {
          const Token& t = s2[static_cast<std::size_t>(st.i2)];
          if (t.is_node() && op_id >= 0 &&
              path.ops[static_cast<std::size_t>(op_id)].step == p)
            sc.adds.push_back(op_id);
          break;
        }
        default:
          break;
      }
    }
    return sc;
  };

  auto add_group = [&](int op_id, std::vector<int> dis, std::vector<int> ena) {
    std::sort(dis.begin(), dis.end());
    std::sort(ena.begin(), ena.end());
    path.ops[static_cast<std::size_t>(op_id)].groups.push_back(
        {std::move(dis), std::move(ena)});
  };

  struct Segment {
    int pa, pb;
    int removal_op;   // RemoveEnclosure op of the owner, -1 when kept
    int addition_op;  // AddEnclosure op of the owner, -1 otherwise
  };
  std::vector<Segment> segments;
  segments.push_back({-1, nsteps, -1, -1});  // the root segment

  auto push_enclosure_segments = [&](int opener_idx, bool in_s1) {
    const auto& seps = in_s1 ? seps1[opener_idx] : seps2[opener_idx];
    const auto& pos = in_s1 ? pos1 : pos2;
    int removal = -1, addition = -1;
    if (in_s1) {
      auto it = op_of_opener1.find(opener_idx);
      if (it != op_of_opener1.end() &&
          path.ops[static_cast<std::size_t>(it->second)].op_type == OpType::RemoveEnclosure)
        removal = it->second;
    } else {
      auto it = op_of_opener2.find(opener_idx);
      if (it != op_of_opener2.end() &&
          path.ops[static_cast<std::size_t>(it->second)].op_type == OpType::AddEnclosure)
        addition = it->second;
    }
    int prev = pos[static_cast<std::size_t>(opener_idx)];
    for (int sep_idx : seps) {
      int ps = pos[static_cast<std::size_t>(sep_idx)];
      segments.push_back({prev, ps, removal, addition});
      prev = ps;
    }
  };

  for (std::size_t k = 0; k < s1.size(); ++k)
    if (s1[k].is_opener()) push_enclosure_segments(static_cast<int>(k), true);
  for (std::size_t k = 0; k < s2.size(); ++k) {
    if (!s2[k].is_opener()) continue;
    // spans substituted into an s1 opener share that opener's segments
    if (path.steps[static_cast<std::size_t>(pos2[k])].dir == Dir::Rem)
      push_enclosure_segments(static_cast<int>(k), false);
  }

  for (const Segment& seg : segments) {
    SegmentScan sc = scan_segment(seg.pa, seg.pb);
    if (sc.kept > 0) continue;
    if (seg.addition_op >= 0) {
      std::vector<int> dis = sc.removes;
      if (dis.empty()) dis.push_back(seg.addition_op);  // self-disabled insertion
      add_group(seg.addition_op, std::move(dis), sc.adds);
    } else {
      std::vector<int> ena = sc.adds;
      if (seg.removal_op >= 0) ena.push_back(seg.removal_op);
      for (int r : sc.removes) add_group(r, sc.removes, ena);
    }
  }

  for (auto& op : path.ops) {
    std::set<int> d, e;
    for (const auto& g : op.groups) {
      d.insert(g.disablers.begin(), g.disablers.end());
      e.insert(g.enablers.begin(), g.enablers.end());
    }
    op.disablers.assign(d.begin(), d.end());
    op.enablers.assign(e.begin(), e.end());
  }
  return path;
}

// Walks an entry chain back to the origin, returning steps in forward order
// and the branch-order variant bits chosen along the winning chain.
inline std::pair<std::vector<Step>, std::uint64_t> chain_steps(const StateAlignment& a) {
  const auto& fin = a.cell(a.rows - 1, a.cols - 1);
  if (fin.empty() || !std::isfinite(fin.front().cost))
    throw UnalignableError("no finite-cost alignment between the sequences");
  const int base2 = static_cast<int>(a.spans1.count());
  std::vector<Step> steps;
  std::uint64_t variant = 0;
  int i = a.rows - 1, j = a.cols - 1, entry = 0;
  while (i != 0 || j != 0) {
    const StateEntry& e = a.cell(i, j)[static_cast<std::size_t>(entry)];
    steps.push_back({e.dir, e.i1, e.i2});
    if (e.i1 >= 0) {
      int sid = a.spans1.span_opened_at(e.i1);
      if (sid >= 0 && a.spans1[static_cast<std::size_t>(sid)].swappable)
        for (int k = 0; k < e.state.open1.size; ++k)
          if (record_span(e.state.open1.rec[k]) == sid &&
              record_swap(e.state.open1.rec[k]))
            variant |= 1ULL << std::min(sid, 62);
    }
    if (e.i2 >= 0) {
      int sid = a.spans2.span_opened_at(e.i2);
      if (sid >= 0 && a.spans2[static_cast<std::size_t>(sid)].swappable)
        for (int k = 0; k < e.state.open2.size; ++k)
          if (record_span(e.state.open2.rec[k]) == sid &&
              record_swap(e.state.open2.rec[k]))
            variant |= 1ULL << std::min(base2 + sid, 62);
    }
    switch (e.dir) {
      case Dir::Sub:
        --i;
        --j;
        break;
      case Dir::Add:
        --i;
        break;
      case Dir::Rem:
        --j;
        break;
      case Dir::None:
        throw DomainError("broken entry chain in alignment");
    }
    entry = e.prev;
  }
  std::reverse(steps.begin(), steps.end());
  return {std::move(steps), variant};
}

}  // namespace detail

// Converts the cheapest path into edit operations with dependency sets,
// walking entries from the bottom-right corner.
inline EditPath trace_back(const SerialisedSequence& s1, const SerialisedSequence& s2,
                           const AlignmentMatrix& m, const ScoringMatrix& scoring) {
  if (!m.engine) throw DomainError("alignment matrix has no engine state to trace");
  auto [steps, variant] = detail::chain_steps(*m.engine);
  EditPath path = detail::build_edit_path(std::move(steps), s1, s2, scoring);
  path.variant_mask = variant;
  for (auto& op : path.ops) op.variant_mask = variant;
  return path;
}

// ---------------------------------------------------------------------------
// Distance
// ---------------------------------------------------------------------------

inline double cswx_distance(const DerivationTree& t1, const DerivationTree& t2,
                            const ScoringMatrix& m) {
  SerialisedSequence a = serialise(t1);
  SerialisedSequence b = serialise(t2);
  AlignmentMatrix mat = align(a, b, m);
  double d = mat.final_distance();
  if (!std::isfinite(d))
    throw UnalignableError("trees are unalignable under the given scoring matrix");
  return d;
}

// Row-major CSV with a header row of seq2 token labels.
inline void write_matrix_csv(std::ostream& out, const AlignmentMatrix& m) {
  for (int j = 0; j < m.cols; ++j)
    out << (j ? "," : "") << '"' << (*m.seq2)[static_cast<std::size_t>(j)].label() << '"';
  out << "\n";
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      if (j) out << ',';
      double v = m.at(i, j);
      if (std::isfinite(v))
        out << v;
      else
        out << "inf";
    }
    out << "\n";
  }
}

}  // namespace swx
