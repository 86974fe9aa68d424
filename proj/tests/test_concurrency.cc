#include "doctest.h"
#include "support.h"

using namespace cibs;
using namespace cibs::testing;

namespace {

struct Elevator {
  FdrTask task = load_task("elevator.sas");
  SequentialPlan plan = parse_plan(read_fixture("elevator.plan"), task);
  PartialOrderPlan pop = eog(plan, task);

  const Operator& op(const std::string& name) const { return task.operators[*task.find_operator(name)]; }
};

}  // namespace

TEST_CASE("operator conflicts on elevator operators") {
  Elevator e;
  CHECK(op_conflict_vars(e.op("board p1 n1 e1"), e.op("board p2 n2 e1")) == std::set<int>{0});
  CHECK(op_conflict_vars(e.op("board p1 n1 e1"), e.op("board p2 n1 e1")).empty());
  CHECK(op_conflict_vars(e.op("move_up e1 n2 n3"), e.op("move_down e1 n2 n1")) == std::set<int>{0});
  CHECK(op_conflict_vars(e.op("move_up e1 n2 n3"), e.op("move_up e2 n2 n3")).empty());
  CHECK(op_conflict_vars(e.op("board p1 n1 e1"), e.op("leave p1 n1 e1")) == std::set<int>{2});
}

TEST_CASE("operator conflicts are symmetric") {
  Elevator e;
  for (const Operator& a : e.task.operators)
    for (const Operator& b : e.task.operators) CHECK(op_conflict_vars(a, b) == op_conflict_vars(b, a));
}

TEST_CASE("syntactic conflicts match enumeration on small domains") {
  for (const std::vector<int>& shape : std::vector<std::vector<int>>{{1}, {2}, {3}, {2, 2}, {2, 3}, {2, 2, 2}}) {
    const MicroCheck r = micro_concurrency_check(shape);
    CAPTURE(r.example);
    CHECK(r.pairs > 0);
    CHECK(r.mismatches == 0);
  }
}

TEST_CASE("enumeration oracle on hand-picked pairs") {
  const FdrTask t = make_task({{"v", 3}, {"w", 2}}, {0, 0}, {},
                              {{"set1", {}, {{0, -1, 1}}},
                               {"set1b", {}, {{0, -1, 1}}},
                               {"set2", {}, {{0, -1, 2}}},
                               {"need1", {{0, 1}}, {{1, -1, 1}}},
                               {"flip", {}, {{1, 0, 1}}}});
  auto op = [&](const char* n) { return t.operators[*t.find_operator(n)]; };
  CHECK(semantically_concurrent(t, op("set1"), op("set1b")));
  CHECK_FALSE(semantically_concurrent(t, op("set1"), op("set2")));
  CHECK(semantically_concurrent(t, op("set1"), op("need1")));
  CHECK_FALSE(semantically_concurrent(t, op("need1"), op("flip")));
  CHECK_FALSE(semantically_concurrent(t, op("flip"), op("flip")));
}

TEST_CASE("elevator cflex after EOG and BD") {
  Elevator e;
  const PbdPlan flat = make_pbd(BdpoPlan::from_pop(e.pop, e.task));
  CHECK(cflex(flat) == Rational::make(2, 55));
  const PbdPlan bd = make_pbd(block_deorder(e.pop, e.task));
  CHECK(cflex(bd) == Rational::make(2, 55));
  CHECK(flex(bd.plan) == Rational::make(26, 55));
  CHECK(cflex(bd) <= flex(bd.plan));
  CHECK(parallel_soundness_oracle(bd, 12) == std::optional<bool>(true));
  CHECK_FALSE(parallel_soundness_oracle(bd, 5).has_value());
}

TEST_CASE("necessary non-concurrency pairs") {
  Elevator e;
  const PbdPlan bd = make_pbd(block_deorder(e.pop, e.task));
  const auto pairs = necessary_nonconcurrency(bd);
  REQUIRE_FALSE(pairs.empty());
  for (auto [a, b] : pairs) {
    CHECK(bd.plan.elems[a].parent == bd.plan.elems[b].parent);
    CHECK_FALSE(bd.plan.before(a, b));
    CHECK_FALSE(bd.plan.before(b, a));
    CHECK(block_conflict_vars(bd, a, b).count(0));
  }
}

TEST_CASE("block conflicts reject overlapping elements") {
  Elevator e;
  const PbdPlan bd = make_pbd(block_deorder(e.pop, e.task));
  const int b = bd.plan.blocks().front();
  const int inner = bd.plan.elems[b].children.front();
  CHECK_THROWS_AS(block_conflict_vars(bd, b, inner), std::invalid_argument);
}

TEST_CASE("nonconcurrency refresh drops removed nodes") {
  Elevator e;
  PbdPlan bd = make_pbd(BdpoPlan::from_pop(e.pop, e.task));
  const size_t before = bd.nc.size();
  bd.plan.remove_element(bd.plan.node_elem[12]);  // leave p3
  refresh_nonconcurrency(bd);
  CHECK(bd.nc.size() < before);
  for (const auto& [k, vars] : bd.nc) {
    CHECK(k.first != 12);
    CHECK(k.second != 12);
  }
}

TEST_CASE("cflex needs two operators") {
  FdrTask m = load_task("tiny_metric.sas");
  m.goal = {{1, 1}};
  const PbdPlan one = make_pbd(BdpoPlan::from_pop(eog(plan_of(m, {"go l0 l1"}), m), m));
  CHECK_THROWS_AS(cflex(one), std::domain_error);
}
