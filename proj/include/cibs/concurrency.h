#pragma once

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "cibs/bdpo.h"

namespace cibs {

/// Variables on which two operators cannot run in parallel. Empty means concurrent.
std::set<int> op_conflict_vars(const Operator& a, const Operator& b);

/// Conflicting variables per unordered pair of operator nodes (first < second).
/// Only pairs with a non-empty set are stored.
using NonConcurrency = std::map<std::pair<int, int>, std::set<int>>;

/// Parallel block decomposed plan.
struct PbdPlan {
  BdpoPlan plan;
  NonConcurrency nc;
  bool operator==(const PbdPlan&) const = default;
};

PbdPlan make_pbd(BdpoPlan plan);
/// Drop pairs of removed nodes and add pairs for nodes not covered yet.
void refresh_nonconcurrency(PbdPlan& pbd);

/// Union of conflicts over cross pairs of members. Throws
/// std::invalid_argument when one element contains the other.
std::set<int> block_conflict_vars(const PbdPlan& pbd, int a, int b);

/// Unordered sibling pairs with a conflict, INIT and GOAL excluded. Sorted by
/// the earliest plan position in each element.
std::vector<std::pair<int, int>> necessary_nonconcurrency(const PbdPlan& pbd);

/// Fraction of operator pairs that are neither ordered nor in conflict at the
/// level where their blocks meet. Throws std::domain_error below two operators.
Rational cflex(const PbdPlan& pbd);

/// Exhaustive check over legal execution prefixes that every unordered,
/// conflict-free pair of enabled operators commutes and keeps the plan
/// completable. Empty when the plan has more than `bound` operators.
std::optional<bool> parallel_soundness_oracle(const PbdPlan& pbd, size_t bound);

}  // namespace cibs
