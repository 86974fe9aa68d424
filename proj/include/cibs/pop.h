#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cibs/bitmatrix.h"
#include "cibs/fdr.h"
#include "cibs/rational.h"

namespace cibs {

/// Why one node must precede another. Anchor marks orderings a substituted
/// block inherits from the block it replaced.
enum class ReasonKind { PC, CD, DP, Anchor };

struct Reason {
  ReasonKind kind = ReasonKind::PC;
  Fact fact;
  auto operator<=>(const Reason&) const = default;
};

std::string reason_kind_name(ReasonKind k);

enum class NodeKind { Init, Goal, Op };

struct PlanNode {
  NodeKind kind = NodeKind::Op;
  int op = -1;        // task operator, Op nodes only
  int instance = -1;  // instance id carried over from the sequential plan
  int position = 0;   // index in the source plan; INIT is -1, GOAL is n
  bool operator==(const PlanNode&) const = default;
};

struct CausalLink {
  int producer = 0;
  int consumer = 0;
  Fact fact;
  auto operator<=>(const CausalLink&) const = default;
};

using OrderingMap = std::map<std::pair<int, int>, std::set<Reason>>;

inline constexpr int kInitNode = 0;
inline constexpr int kGoalNode = 1;

/// Partially ordered plan. Node 0 is INIT, node 1 is GOAL, the rest are
/// operator instances. `orderings` holds every reasoned edge; INIT before
/// everything and everything before GOAL is implicit.
struct PartialOrderPlan {
  std::vector<PlanNode> nodes;
  std::vector<CausalLink> links;
  OrderingMap orderings;

  size_t num_ops() const { return nodes.size() - 2; }
  /// Reachability over reasoned edges plus the implicit INIT/GOAL edges.
  /// Returns false when the ordering graph has a cycle.
  bool closure(BitMatrix& out) const;
  /// Transitive reduction of the reasoned edges.
  std::vector<std::pair<int, int>> basic_orderings() const;
};

/// Explanation-based order generalization of a valid sequential plan.
PartialOrderPlan eog(const SequentialPlan& plan, const FdrTask& task);

/// Reasons for every basic ordering; throws InternalError if one has none.
OrderingMap annotate_reasons(const PartialOrderPlan& pop);

/// True iff the ordering is acyclic and every linearization is a valid plan.
bool is_valid_pop(const PartialOrderPlan& pop, const FdrTask& task);

/// Topological order of the operator nodes, ties broken by instance id.
SequentialPlan linearize(const PartialOrderPlan& pop);

/// Fraction of unordered operator pairs. Throws std::domain_error with fewer
/// than two operators.
Rational flex(const PartialOrderPlan& pop);

std::set<Fact> node_pre(const PartialOrderPlan& pop, const FdrTask& task, int n);
std::set<Fact> node_eff(const PartialOrderPlan& pop, const FdrTask& task, int n);
std::set<Fact> node_del(const PartialOrderPlan& pop, const FdrTask& task, int n);

}  // namespace cibs
