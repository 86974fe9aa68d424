#pragma once

#include <functional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "cibs/substitution.h"

namespace cibs::testing {

std::string read_fixture(const std::string& name);
std::string fixture_path(const std::string& name);
FdrTask load_task(const std::string& name);

struct OpSpec {
  std::string name;
  std::vector<std::pair<int, int>> prevail;
  std::vector<std::tuple<int, int, int>> effects;  // var, pre (-1 for none), post
  int64_t cost = 1;
};

FdrTask make_task(const std::vector<std::pair<std::string, int>>& vars, const State& init, const PartialState& goal,
                  const std::vector<OpSpec>& ops, bool metric = false);
SequentialPlan plan_of(const FdrTask& task, const std::vector<std::string>& names);

struct RandomInstance {
  FdrTask task;
  SequentialPlan plan;
};

/// Small random task with a valid plan of 1..max_steps steps obtained by a
/// random walk; the goal is the final value of some of the variables.
RandomInstance random_instance(std::mt19937& rng, int max_steps = 8);

using NodeSeq = std::vector<int>;

/// Calls fn on every topological order of the operator nodes; fn returns
/// false to stop. Returns the number of orders visited.
size_t for_each_linearization(const PartialOrderPlan& pop, const std::function<bool(const NodeSeq&)>& fn);

/// Same over operator sequences respecting the block orderings with every
/// block executed contiguously.
size_t for_each_legal_execution(const BdpoPlan& plan, const std::function<bool(const NodeSeq&)>& fn);

SequentialPlan to_plan(const std::vector<PlanNode>& nodes, const NodeSeq& seq);

/// Element whose members are exactly the operator nodes with these names.
int find_element(const BdpoPlan& plan, const std::vector<std::string>& names);

}  // namespace cibs::testing

namespace cibs::testing {

/// Every operator over the given domains (each variable: no precondition or
/// a value, no effect or a value, at least one effect), as a finalized task.
FdrTask all_operators(const std::vector<int>& domains);

/// Concurrent by enumeration: some state admits both operators, and in every
/// such state both orders apply and reach the same state.
bool semantically_concurrent(const FdrTask& task, const Operator& a, const Operator& b);

struct MicroCheck {
  size_t pairs = 0;
  size_t mismatches = 0;
  std::string example;
};

/// Compares op_conflict_vars against the enumeration for every pair.
MicroCheck micro_concurrency_check(const std::vector<int>& domains);

}  // namespace cibs::testing

namespace cibs::testing {

/// Variable v2 cycles through d1..d4 via o1..o8. o1..o4 also write v1 := a,
/// which clashes with `other` writing v1 := b; o5..o8 leave v1 alone. The
/// plan is o8, other, o1, use, o2 (nodes 2..6).
struct CycleTask {
  FdrTask task;
  SequentialPlan plan;
};
CycleTask cycle_task();

}  // namespace cibs::testing
