#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cibs/fdr.h"

namespace cibs {

struct SubplanRequest {
  FdrTask subtask;
  int64_t cost_bound = 0;
  double time_bound = 5.0;
  int max_solutions = 10;
  std::set<Fact> supplied;  // facts the replaced block hands to later nodes
  std::set<Fact> crossing;  // facts that must survive across the block
};

struct PlannerConfig {
  /// Shell command with {task} and {plan} placeholders. Empty selects the
  /// built-in search.
  std::string command;
  double time_bound = 5.0;
  int max_solutions = 10;
  size_t node_budget = 1000000;
};

struct PlannerResult {
  std::vector<SequentialPlan> plans;  // non-decreasing cost
  std::string diagnostic;
  bool timed_out = false;
  size_t generated = 0;
};

/// Uniform-cost search over (state, operator multiset). Plans whose multiset
/// contains an earlier solution's multiset are skipped, as are paths that
/// revisit a state.
PlannerResult internal_search(const SubplanRequest& req, size_t node_budget);

/// Runs an external planner on a serialized subtask and collects every plan
/// file it leaves behind (plan, plan.1, plan.2, ...).
PlannerResult external_search(const SubplanRequest& req, const std::string& command);

PlannerResult generate_plans(const SubplanRequest& req, const PlannerConfig& cfg);

}  // namespace cibs
