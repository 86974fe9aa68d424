#include "doctest.h"
#include "support.h"

using namespace cibs;
using namespace cibs::testing;

TEST_CASE("elevator task parses") {
  const FdrTask t = load_task("elevator.sas");
  CHECK(t.num_vars() == 5);
  CHECK(t.variables[0].name == "v_e1");
  CHECK(t.domain_size(2) == 5);
  CHECK(t.operators.size() == 44);
  CHECK(t.goal.size() == 3);
  CHECK_FALSE(t.use_metric);
  const auto board = t.find_operator("board p1 n1 e1");
  REQUIRE(board);
  CHECK(t.find_operator("(board p1 n1 e1)") == board);
  CHECK(t.find_operator("BOARD  p1 n1 e1") == board);
  CHECK_FALSE(t.find_operator("board p9 n1 e1"));
}

TEST_CASE("serialization round trips") {
  const FdrTask t = load_task("elevator.sas");
  CHECK(parse_sas(serialize_sas(t)) == t);
  const FdrTask m = load_task("tiny_metric.sas");
  CHECK(parse_sas(serialize_sas(m)) == m);
}

TEST_CASE("elevator plan validates with cost 11") {
  const FdrTask t = load_task("elevator.sas");
  const SequentialPlan p = parse_plan(read_fixture("elevator.plan"), t);
  CHECK(p.size() == 11);
  const ValidationReport r = validate_sequential(p, t);
  CHECK(r.valid);
  CHECK(r.cost == 11);
  CHECK(satisfies(r.final_state, t.goal));
  CHECK(parse_plan(format_plan(p, t), t) == p);
}

TEST_CASE("metric costs and zero-cost fallback") {
  const FdrTask m = load_task("tiny_metric.sas");
  CHECK(m.use_metric);
  CHECK(m.cost(*m.find_operator("go l0 l1")) == 4);
  const SequentialPlan p = parse_plan(read_fixture("tiny_metric.plan"), m);
  CHECK(plan_cost(p, m) == 6);
  CHECK(validate_sequential(p, m).valid);

  const FdrTask z = load_task("tiny_zero_cost.sas");
  CHECK(z.zero_cost_fallback());
  CHECK(z.cost(0) == 1);
  CHECK_THROWS_AS(parse_plan(read_fixture("tiny_metric.plan"), z), PlanError);  // declared cost 6, sums to 2
}

TEST_CASE("unsupported inputs") {
  CHECK_THROWS_AS(load_task("derived_variable.sas"), UnsupportedFeature);
  CHECK_THROWS_AS(load_task("axiom_section.sas"), UnsupportedFeature);
  CHECK_THROWS_AS(load_task("conditional_effect.sas"), UnsupportedFeature);
}

TEST_CASE("parse errors carry line numbers") {
  std::string text = read_fixture("tiny_metric.sas");
  text.replace(text.find("begin_version\n3"), 15, "begin_version\n2");
  try {
    parse_sas(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_sas(text.substr(0, 40)), ParseError);
}

TEST_CASE("plan errors") {
  const FdrTask t = load_task("elevator.sas");
  CHECK_THROWS_AS(parse_plan("(fly p1)\n", t), PlanError);
  CHECK_THROWS_AS(parse_plan("board p1 n1 e1\n", t), PlanError);
  const FdrTask m = load_task("tiny_metric.sas");
  const ValidationReport r = validate_sequential(parse_plan(read_fixture("tiny_bad.plan"), m), m);
  CHECK_FALSE(r.valid);
  REQUIRE(r.failing_step);
  CHECK(*r.failing_step == 0);
}

TEST_CASE("cons, prod and del") {
  const FdrTask t = load_task("elevator.sas");
  const Operator& op = t.operators[*t.find_operator("board p1 n2 e1")];
  CHECK(cons(op) == std::set<Fact>{{0, 1}, {2, 1}});
  CHECK(prod(op) == std::set<Fact>{{2, 3}});
  const std::set<Fact> d = del(t, op);
  CHECK(d == std::set<Fact>{{2, 1}});
  const Operator& up = t.operators[*t.find_operator("move_up e1 n2 n3")];
  CHECK(del(t, up) == std::set<Fact>{{0, 1}});
  // without a precondition every other value is deleted
  const FdrTask r = make_task({{"v", 3}}, {0}, {}, {{"reset", {}, {{0, -1, 2}}}});
  CHECK(del(r, r.operators[0]) == std::set<Fact>{{0, 0}, {0, 1}});
  CHECK(prod(r.operators[0]) == std::set<Fact>{{0, 2}});
  CHECK(cons(r.operators[0]).empty());
  CHECK_FALSE(d.count({2, 3}));
}
