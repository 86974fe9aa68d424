#include "doctest.h"
#include "support.h"

using namespace cibs;
using namespace cibs::testing;

namespace {

struct Elevator {
  FdrTask task = load_task("elevator.sas");
  SequentialPlan plan = parse_plan(read_fixture("elevator.plan"), task);
  PartialOrderPlan pop = eog(plan, task);
};

const std::vector<std::string> kFirstTrip = {"board p1 n2 e1", "board p2 n2 e1", "move_up e1 n2 n3",
                                             "leave p1 n3 e1", "leave p2 n3 e1", "move_down e1 n3 n2"};
const std::vector<std::string> kSecondTrip = {"move_down e1 n2 n1", "board p3 n1 e1", "move_up e1 n1 n2"};

}  // namespace

TEST_CASE("from_pop keeps the flat plan") {
  Elevator e;
  const BdpoPlan b = BdpoPlan::from_pop(e.pop, e.task);
  CHECK(b.blocks().empty());
  CHECK(b.num_ops() == 11);
  CHECK(flex(b) == flex(e.pop));
  CHECK(is_valid_bdpo(b));
}

TEST_CASE("elevator block deordering") {
  Elevator e;
  DeorderStats stats;
  const BdpoPlan b = block_deorder(e.pop, e.task, &stats);
  CHECK(flex(b) == Rational::make(26, 55));
  CHECK(is_valid_bdpo(b));
  CHECK(stats.removed >= 1);

  const int b1 = find_element(b, kFirstTrip);
  const int b2 = find_element(b, kSecondTrip);
  REQUIRE(b1 >= 0);
  REQUIRE(b2 >= 0);
  CHECK_FALSE(b.before(b1, b2));
  CHECK_FALSE(b.before(b2, b1));
  CHECK(b.cost() == 11);

  const int leave3 = find_element(b, {"leave p3 n2 e1"});
  REQUIRE(leave3 >= 0);
  CHECK(b.before(b2, leave3));
  CHECK_FALSE(b.before(b1, leave3));
  CHECK_FALSE(b.before(leave3, b1));
}

TEST_CASE("expansion and witness are valid") {
  Elevator e;
  const BdpoPlan b = block_deorder(e.pop, e.task);
  CHECK(validate_sequential(witness_linearization(b), e.task).valid);
  CHECK(expand(b).num_ops() == 11);
  CHECK(is_valid_pop(expand(b, true), e.task));
  size_t n = for_each_legal_execution(b, [&](const NodeSeq& seq) {
    CHECK(validate_sequential(to_plan(b.nodes, seq), e.task).valid);
    return true;
  });
  CHECK(n > 1);
}

TEST_CASE("check_bdpo reports a threat") {
  Elevator e;
  BdpoPlan b = BdpoPlan::from_pop(e.pop, e.task);
  // drop the ordering that keeps move_up e1 n2 n3 after board p2
  b.orderings.erase({4, 5});
  b.touch();
  const auto problem = check_bdpo(b);
  REQUIRE(problem);
  CHECK_FALSE(problem->empty());
}

TEST_CASE("block edits") {
  Elevator e;
  BdpoPlan b = BdpoPlan::from_pop(e.pop, e.task);
  const int boards = b.add_block({b.node_elem[3], b.node_elem[4]});
  REQUIRE(boards >= 0);
  CHECK(b.members(boards) == std::vector<int>{3, 4});
  CHECK(b.add_block({b.node_elem[3], b.node_elem[5]}) == -1);  // not siblings any more
  CHECK(is_valid_bdpo(b));
  b.dissolve(boards);
  CHECK(b.blocks().empty());
  CHECK(is_valid_bdpo(b));
}

TEST_CASE("block deordering of random plans is sound") {
  std::mt19937 rng(11);
  for (int i = 0; i < 150; ++i) {
    const RandomInstance inst = random_instance(rng);
    const PartialOrderPlan pop = eog(inst.plan, inst.task);
    const BdpoPlan b = block_deorder(pop, inst.task);
    REQUIRE(is_valid_bdpo(b));
    if (b.num_ops() >= 2) CHECK(flex(b) >= flex(pop));
    for_each_legal_execution(b, [&](const NodeSeq& seq) {
      CHECK(validate_sequential(to_plan(b.nodes, seq), inst.task).valid);
      return true;
    });
  }
}
