#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cibs {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Input uses something this library does not model (axioms, conditional effects).
class UnsupportedFeature : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class PlanError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ApplicabilityError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Plan structure is inconsistent with what an algorithm requires.
class InternalError : public std::logic_error {
  using std::logic_error::logic_error;
};

struct Fact {
  int var = 0;
  int val = 0;
  auto operator<=>(const Fact&) const = default;
};

using PartialState = std::map<int, int>;
using State = std::vector<int>;

struct Variable {
  std::string name;
  int axiom_layer = -1;
  std::vector<std::string> values;
};

struct PrePost {
  int var = 0;
  int pre = -1;
  int post = 0;
  bool operator==(const PrePost&) const = default;
};

struct Operator {
  std::string name;
  std::vector<Fact> prevail;
  std::vector<PrePost> pre_post;
  int64_t cost = 1;
  PartialState pre;
  PartialState eff;
  bool noop_effect = false;  // some var has pre(v) == eff(v)

  bool operator==(const Operator& o) const {
    return name == o.name && prevail == o.prevail && pre_post == o.pre_post && cost == o.cost;
  }
};

struct FdrTask {
  bool use_metric = false;
  std::vector<Variable> variables;
  std::vector<std::vector<Fact>> mutex_groups;
  State init;
  PartialState goal;
  std::vector<Operator> operators;

  /// Cost used by every algorithm. Unit cost without a metric, and also when
  /// all declared costs are zero (see zero_cost_fallback).
  int64_t cost(int op) const;
  bool zero_cost_fallback() const { return zero_cost_; }
  std::optional<int> find_operator(std::string_view name) const;
  int domain_size(int var) const { return static_cast<int>(variables[var].values.size()); }
  int num_vars() const { return static_cast<int>(variables.size()); }

  /// Rebuild derived fields (pre/eff maps, name index). Call after editing.
  void finalize();

  bool operator==(const FdrTask& o) const {
    return use_metric == o.use_metric && init == o.init && goal == o.goal &&
           operators == o.operators && mutex_groups == o.mutex_groups && same_vars(o);
  }

 private:
  bool same_vars(const FdrTask& o) const;
  bool zero_cost_ = false;
  std::unordered_map<std::string, int> name_index_;
};

std::string normalize_op_name(std::string_view name);

FdrTask parse_sas(std::string_view text);
std::string serialize_sas(const FdrTask& task);

struct PlanStep {
  int instance = 0;
  int op = 0;
  bool operator==(const PlanStep&) const = default;
};

struct SequentialPlan {
  std::vector<PlanStep> steps;
  size_t size() const { return steps.size(); }
  bool operator==(const SequentialPlan&) const = default;
};

SequentialPlan parse_plan(std::string_view text, const FdrTask& task);
SequentialPlan make_plan(const std::vector<int>& ops);
std::string format_plan(const SequentialPlan& plan, const FdrTask& task);
int64_t plan_cost(const SequentialPlan& plan, const FdrTask& task);

std::set<Fact> cons(const Operator& op);
std::set<Fact> prod(const Operator& op);
std::set<Fact> del(const FdrTask& task, const Operator& op);

bool applicable(const Operator& op, const State& s);
State apply(const FdrTask& task, const Operator& op, const State& s);
bool satisfies(const State& s, const PartialState& ps);

struct ValidationReport {
  bool valid = false;
  std::optional<size_t> failing_step;
  std::string reason;
  State final_state;
  int64_t cost = 0;
};

ValidationReport validate_sequential(const SequentialPlan& plan, const FdrTask& task);

std::string fact_name(const FdrTask& task, Fact f);

}  // namespace cibs
