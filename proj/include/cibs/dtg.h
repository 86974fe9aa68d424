#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "cibs/concurrency.h"

namespace cibs {

struct DtgEdge {
  int to = 0;
  int op = 0;
  auto operator<=>(const DtgEdge&) const = default;
};

struct DomainTransitionGraph {
  int var = 0;
  std::vector<std::vector<DtgEdge>> adj;  // indexed by source value
};

DomainTransitionGraph build_dtg(const FdrTask& task, int var);

/// d_to reachable from d_from using only edges whose operator is allowed.
bool safe_transition_exists(const DomainTransitionGraph& g, int d_from, int d_to,
                            const std::function<bool(int)>& allowed);

std::string dtg_to_dot(const FdrTask& task, const DomainTransitionGraph& g);

struct ExtendResult {
  /// Siblings of b_i forming the extended block, b_i included.
  std::vector<int> members;
  /// Elements absorbed, in the order they were added.
  std::vector<int> absorbed;
  std::set<int> cvars;
};

/// Grow b_i among its siblings until substituting it can avoid the conflict
/// with b_j. Nothing in the plan is modified.
ExtendResult extend(const PbdPlan& pbd, int bi, int bj);

}  // namespace cibs
