#include <chrono>

#include "doctest.h"
#include "support.h"

using namespace cibs;
using namespace cibs::testing;

namespace {

/// Elevator subtask for p3: e2 waits at n1, p3 must reach n2.
SubplanRequest p3_request(int64_t bound = 4) {
  SubplanRequest req;
  req.subtask = load_task("elevator.sas");
  req.subtask.init = {0, 0, 2, 2, 0};  // e1 n1, e2 n1, p1 n3, p2 n3, p3 n1
  req.subtask.goal = {{4, 1}};
  req.cost_bound = bound;
  req.max_solutions = 10;
  req.time_bound = 5.0;
  return req;
}

std::vector<std::string> names(const FdrTask& t, const SequentialPlan& p) {
  std::vector<std::string> out;
  for (const PlanStep& s : p.steps) out.push_back(t.operators[s.op].name);
  return out;
}

}  // namespace

TEST_CASE("internal search finds both lifts") {
  const SubplanRequest req = p3_request(3);
  const PlannerResult r = internal_search(req, 1000000);
  REQUIRE(r.plans.size() >= 2);
  bool with_e2 = false;
  for (const SequentialPlan& p : r.plans) {
    CHECK(validate_sequential(p, req.subtask).valid);
    CHECK(plan_cost(p, req.subtask) <= 3);
    with_e2 = with_e2 || names(req.subtask, p) ==
                             std::vector<std::string>{"board p3 n1 e2", "move_up e2 n1 n2", "leave p3 n2 e2"};
  }
  CHECK(with_e2);
  for (size_t i = 1; i < r.plans.size(); ++i)
    CHECK(plan_cost(r.plans[i - 1], req.subtask) <= plan_cost(r.plans[i], req.subtask));
}

TEST_CASE("internal search is deterministic") {
  const SubplanRequest req = p3_request();
  CHECK(internal_search(req, 1000000).plans == internal_search(req, 1000000).plans);
}

TEST_CASE("goal already true gives the empty plan") {
  SubplanRequest req = p3_request();
  req.subtask.goal = {{0, 0}};
  const PlannerResult r = internal_search(req, 1000);
  REQUIRE(r.plans.size() == 1);
  CHECK(r.plans[0].steps.empty());
}

TEST_CASE("cost bound and budget") {
  SubplanRequest req = p3_request(0);
  CHECK(internal_search(req, 1000000).plans.empty());
  req.cost_bound = 4;
  const PlannerResult tiny = internal_search(req, 3);
  CHECK(tiny.plans.empty());
  CHECK(tiny.diagnostic == "node budget exhausted");
  req.max_solutions = 1;
  CHECK(internal_search(req, 1000000).plans.size() == 1);
}

TEST_CASE("external planner output files are collected") {
  const SubplanRequest req = p3_request();
  const std::string cmd =
      "test -s {task} && printf '(board p3 n1 e1)\\n(move_up e1 n1 n2)\\n(leave p3 n2 e1)\\n(move_down e1 n2 n1)\\n' > {plan}"
      " && printf '(board p3 n1 e2)\\n(move_up e2 n1 n2)\\n(leave p3 n2 e2)\\n' > {plan}.1"
      " && printf '(leave p3 n2 e2)\\n' > {plan}.2";
  const PlannerResult r = external_search(req, cmd);
  REQUIRE(r.plans.size() == 2);
  CHECK(r.plans[0].size() == 3);
  CHECK(r.plans[1].size() == 4);
  CHECK(r.diagnostic.find("plan.2") != std::string::npos);
}

TEST_CASE("external planner failures") {
  SubplanRequest req = p3_request();
  PlannerResult r = external_search(req, "exit 3");
  CHECK(r.plans.empty());
  CHECK(r.diagnostic == "planner exited with status 3");

  req.time_bound = 0.2;
  const auto t0 = std::chrono::steady_clock::now();
  r = external_search(req, "sleep 30");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(r.timed_out);
  CHECK(r.diagnostic == "planner killed after time bound");
  CHECK(secs < 5.0);
}

TEST_CASE("generate_plans picks the backend") {
  const SubplanRequest req = p3_request();
  PlannerConfig cfg;
  CHECK_FALSE(generate_plans(req, cfg).plans.empty());
  cfg.command = "true";
  CHECK(generate_plans(req, cfg).plans.empty());
}
