// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "swx/analysis.hpp"
#include "swx/bench.hpp"

namespace swx_test {

inline std::string fixture(const std::string& name) {
  return std::string(SWX_FIXTURE_DIR) + "/" + name;
}

inline swx::DerivationTree load_fixture_tree(const std::string& name) {
  auto trees = swx::read_trees_file(fixture(name));
  return trees.at(0);
}

// Independent structural check used by the selection fuzzers: replays the
// selection and verifies that every opened span keeps at least one node per
// segment and that the whole offspring is non-empty, by direct simulation.
inline bool selection_structurally_valid(const swx::EditPath& path,
                                         const std::set<int>& chosen) {
  swx::SerialisedSequence seq = swx::replay_selection(path, chosen);
  // count node tokens per open segment via a stack; root is segment 0
  std::vector<int> counts{0};
  std::vector<char> opener_kind;  // '2' branching2, 'k' other
  for (std::size_t k = 1; k < seq.tokens.size(); ++k) {
    const swx::Token& t = seq.tokens[k];
    if (t.is_node()) {
      counts.back() += 1;
      if (t.is_opener()) {
        counts.push_back(0);
        opener_kind.push_back(t.node_class == swx::NodeClass::Branching2 ? '2' : 'k');
      }
    } else if (t.is_separator()) {
      if (opener_kind.empty()) return false;
      if (counts.back() == 0) return false;  // empty segment
      if (t.role == swx::SepRole::BranchDivider) {
        counts.back() = 0;  // second branch starts fresh
        if (opener_kind.back() != '2') return false;
      } else {
        counts.pop_back();
        opener_kind.pop_back();
      }
    }
  }
  if (!opener_kind.empty()) return false;
  return counts.size() == 1 && counts[0] > 0;
}

}  // namespace swx_test
