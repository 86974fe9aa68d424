#pragma once

#include <string>
#include <vector>

#include "cibs/concurrency.h"
#include "cibs/subplanner.h"

namespace cibs {

struct SubstitutionOutcome {
  PbdPlan plan;  // untouched input when success is false
  bool success = false;
  std::vector<std::string> trace;
};

struct SubstituteOptions {
  /// Order the new block after b_x's immediate predecessors and before its
  /// immediate successors (Anchor reasons).
  bool inherit_neighbors = false;
};

/// Replace element bx by the operators of `candidate`, a POP over a task with
/// the same operator set. INIT links of the candidate mark the new block's
/// preconditions.
SubstitutionOutcome substitute(const PbdPlan& pbd, int bx, const PartialOrderPlan& candidate,
                               const SubstituteOptions& opts = {});

/// Subtask whose solutions can stand in for element b. Throws InternalError
/// if the predecessors of b do not execute from the initial state.
SubplanRequest build_subtask(const PbdPlan& pbd, int b);

SubstitutionOutcome resolve_nonconcurrency(const PbdPlan& pbd, int bi, int bj, const PlannerConfig& cfg);

struct ScAttempt {
  std::string first, second;  // element descriptions, first is the one replaced
  bool success = false;
  Rational cflex_after;
  std::vector<std::string> trace;
};

struct ScResult {
  PbdPlan plan;
  std::vector<ScAttempt> attempts;
  int accepted = 0;
};

/// Resolve necessary non-concurrency pairs from the start of the plan,
/// restarting after every accepted substitution until a pass changes nothing.
ScResult substitution_for_concurrency(const PbdPlan& pbd, const PlannerConfig& cfg, int max_rounds = 1000);

}  // namespace cibs
