#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cibs/pop.h"

namespace cibs {

/// Node of the block tree. Leaves wrap one plan node; everything else is a
/// block. Element 0 is the root block covering the whole plan.
struct Element {
  int node = -1;
  int parent = -1;
  std::vector<int> children;
  bool alive = true;
  bool is_block() const { return node < 0; }
  bool operator==(const Element&) const = default;
};

struct BlockSemantics {
  std::set<Fact> pre, eff, cons, prod, del;
};

inline constexpr int kRootElem = 0;
inline constexpr int kInitElem = 1;
inline constexpr int kGoalElem = 2;

/// Block decomposed partial-order plan.
///
/// Orderings are stored between plan nodes. An edge (a, b) constrains the two
/// children of the lowest common ancestor block that contain a and b; order
/// between any two elements is read off at that level.
class BdpoPlan {
 public:
  BdpoPlan() = default;
  static BdpoPlan from_pop(const PartialOrderPlan& pop, const FdrTask& task);

  const FdrTask& task() const { return *task_; }

  std::vector<PlanNode> nodes;
  std::vector<int> node_elem;
  std::vector<Element> elems;
  std::vector<CausalLink> links;
  OrderingMap orderings;

  /// Must be called after editing any public field.
  void touch() { cache_.reset(); }

  bool acyclic() const;
  /// Every member of a precedes every member of b. False if they overlap.
  bool before(int a, int b) const;
  bool node_before(int a, int b) const;
  bool contains(int e, int node) const;
  bool elem_contains(int outer, int inner) const;
  /// Alive plan nodes under e, in position order.
  const std::vector<int>& members(int e) const;
  /// Operator nodes (no INIT/GOAL) in position order.
  std::vector<int> op_nodes() const;
  size_t num_ops() const;
  int depth(int e) const;
  int first_position(int e) const;
  /// Ancestor of e (or e itself) whose parent is `block`, or -1.
  int child_of(int block, int e) const;
  /// Lowest block containing both nodes; A and B receive the children holding them.
  int lca(int a_node, int b_node, int* A = nullptr, int* B = nullptr) const;
  /// Compound blocks excluding the root.
  std::vector<int> blocks() const;
  const BlockSemantics& sem(int e) const;
  /// Transitive reduction of the ordering among children of `block`.
  std::vector<std::pair<int, int>> level_basic_orderings(int block) const;
  /// Children of `block` lying between members under the level ordering.
  std::vector<int> hull(int block, const std::vector<int>& members) const;
  /// Op node in e producing f that no later member of e overwrites.
  int final_producer(int e, Fact f) const;
  int64_t cost() const;
  std::string describe(int e) const;

  /// Wrap sibling elements in a new block. Returns its id, or -1 if they are
  /// not siblings or would cover the whole parent.
  int add_block(const std::vector<int>& children);
  /// Splice a block's children into its parent.
  void dissolve(int block);
  /// Drop an element with its nodes, their links and orderings.
  void remove_element(int e);
  int add_node(const PlanNode& node, int parent);
  void dissolve_singletons();

  /// Structural equality; the task must be the same object.
  bool operator==(const BdpoPlan& o) const {
    return task_ == o.task_ && nodes == o.nodes && node_elem == o.node_elem && elems == o.elems &&
           links == o.links && orderings == o.orderings;
  }

 private:
  struct Derived;
  const Derived& derived() const;
  const FdrTask* task_ = nullptr;
  mutable std::shared_ptr<Derived> cache_;
};

/// Empty when the plan is valid, otherwise a description of the first problem.
std::optional<std::string> check_bdpo(const BdpoPlan& plan);
inline bool is_valid_bdpo(const BdpoPlan& plan) { return !check_bdpo(plan).has_value(); }

Rational flex(const BdpoPlan& plan);

/// Earliest candidate producer of f for `consumer`, searched among the
/// consumer's siblings first and then outward. `ignore` is left out of the
/// search (the block about to be replaced). Returns an element or -1.
int earliest_candidate_producer(const BdpoPlan& plan, Fact f, int consumer, int ignore = -1);

struct DeorderStats {
  int removed = 0;
  int attempts = 0;
};

BdpoPlan block_deorder(const PartialOrderPlan& pop, const FdrTask& task, DeorderStats* stats = nullptr);

/// Operator-level POP carrying every ordering implied by the block tree.
/// With order_blocks, unordered siblings of which one is compound are also
/// ordered as in the witness linearization, so every linearization of the
/// result is a legal execution.
PartialOrderPlan expand(const BdpoPlan& plan, bool order_blocks = false);

/// One legal execution (blocks contiguous), ties broken by earliest position.
SequentialPlan witness_linearization(const BdpoPlan& plan);
/// Operator nodes of the witness linearization.
std::vector<int> witness_nodes(const BdpoPlan& plan);

}  // namespace cibs
