#include "cibs/fdr.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace cibs {

namespace {

class LineReader {
 public:
  explicit LineReader(std::string_view text) {
    size_t start = 0;
    while (start < text.size()) {
      size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(start, end - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines_.emplace_back(line);
      start = end + 1;
    }
  }

  bool done() const { return pos_ >= lines_.size(); }
  int line_no() const { return static_cast<int>(pos_) + 1; }

  std::string next(const char* what) {
    if (done()) throw ParseError(line_no(), std::string("unexpected end of input, expected ") + what);
    return lines_[pos_++];
  }

  void expect(const std::string& word) {
    int at = line_no();
    std::string got = next(word.c_str());
    if (got != word) throw ParseError(at, "expected '" + word + "', got '" + got + "'");
  }

  long long next_int(const char* what) {
    int at = line_no();
    std::string s = next(what);
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ParseError(at, std::string("expected integer for ") + what + ", got '" + s + "'");
    return v;
  }

  std::vector<long long> next_ints(const char* what) {
    int at = line_no();
    std::string s = next(what);
    std::vector<long long> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) {
      long long v = 0;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw ParseError(at, std::string("bad integer in ") + what + ": '" + tok + "'");
      out.push_back(v);
    }
    return out;
  }

 private:
  std::vector<std::string> lines_;
  size_t pos_ = 0;
};

void check_fact(const FdrTask& t, long long var, long long val, int line, const char* what) {
  if (var < 0 || var >= t.num_vars())
    throw ParseError(line, std::string("variable index out of range in ") + what);
  if (val < 0 || val >= t.domain_size(static_cast<int>(var)))
    throw ParseError(line, std::string("value index out of range in ") + what);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string normalize_op_name(std::string_view name) {
  std::string out;
  bool space = false;
  for (char c : name) {
    if (c == '(' || c == ')') {
      space = true;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

bool FdrTask::same_vars(const FdrTask& o) const {
  if (variables.size() != o.variables.size()) return false;
  for (size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name != o.variables[i].name || variables[i].axiom_layer != o.variables[i].axiom_layer ||
        variables[i].values != o.variables[i].values)
      return false;
  }
  return true;
}

void FdrTask::finalize() {
  name_index_.clear();
  bool all_zero = !operators.empty();
  for (size_t i = 0; i < operators.size(); ++i) {
    Operator& op = operators[i];
    op.pre.clear();
    op.eff.clear();
    op.noop_effect = false;
    for (const Fact& f : op.prevail) op.pre[f.var] = f.val;
    for (const PrePost& pp : op.pre_post) {
      if (pp.pre >= 0) op.pre[pp.var] = pp.pre;
      op.eff[pp.var] = pp.post;
      if (pp.pre == pp.post) op.noop_effect = true;
    }
    if (op.cost != 0) all_zero = false;
    name_index_.emplace(normalize_op_name(op.name), static_cast<int>(i));
  }
  zero_cost_ = use_metric && all_zero;
}

int64_t FdrTask::cost(int op) const {
  if (!use_metric || zero_cost_) return 1;
  return operators[op].cost;
}

std::optional<int> FdrTask::find_operator(std::string_view name) const {
  auto it = name_index_.find(normalize_op_name(name));
  if (it == name_index_.end()) return std::nullopt;
  return it->second;
}

FdrTask parse_sas(std::string_view text) {
  LineReader in(text);
  FdrTask t;

  in.expect("begin_version");
  int vline = in.line_no();
  long long version = in.next_int("version");
  if (version != 3) throw ParseError(vline, "unsupported SAS version " + std::to_string(version) + " (need 3)");
  in.expect("end_version");

  in.expect("begin_metric");
  int mline = in.line_no();
  long long metric = in.next_int("metric");
  if (metric != 0 && metric != 1) throw ParseError(mline, "metric must be 0 or 1");
  t.use_metric = metric == 1;
  in.expect("end_metric");

  long long nvars = in.next_int("variable count");
  if (nvars < 0) throw ParseError(in.line_no() - 1, "negative variable count");
  for (long long i = 0; i < nvars; ++i) {
    in.expect("begin_variable");
    Variable v;
    v.name = in.next("variable name");
    int lline = in.line_no();
    v.axiom_layer = static_cast<int>(in.next_int("axiom layer"));
    if (v.axiom_layer != -1) throw UnsupportedFeature("line " + std::to_string(lline) + ": derived variable (axiom layer)");
    int dline = in.line_no();
    long long dom = in.next_int("domain size");
    if (dom < 1) throw ParseError(dline, "domain must be non-empty");
    for (long long d = 0; d < dom; ++d) v.values.push_back(in.next("value name"));
    in.expect("end_variable");
    t.variables.push_back(std::move(v));
  }

  long long nmutex = in.next_int("mutex group count");
  for (long long i = 0; i < nmutex; ++i) {
    in.expect("begin_mutex_group");
    long long k = in.next_int("mutex group size");
    std::vector<Fact> group;
    for (long long j = 0; j < k; ++j) {
      int at = in.line_no();
      auto xs = in.next_ints("mutex fact");
      if (xs.size() != 2) throw ParseError(at, "mutex fact needs 2 integers");
      check_fact(t, xs[0], xs[1], at, "mutex group");
      group.push_back({static_cast<int>(xs[0]), static_cast<int>(xs[1])});
    }
    in.expect("end_mutex_group");
    t.mutex_groups.push_back(std::move(group));
  }

  in.expect("begin_state");
  for (int v = 0; v < t.num_vars(); ++v) {
    int at = in.line_no();
    long long val = in.next_int("initial value");
    check_fact(t, v, val, at, "initial state");
    t.init.push_back(static_cast<int>(val));
  }
  in.expect("end_state");

  in.expect("begin_goal");
  long long ngoal = in.next_int("goal count");
  for (long long i = 0; i < ngoal; ++i) {
    int at = in.line_no();
    auto xs = in.next_ints("goal fact");
    if (xs.size() != 2) throw ParseError(at, "goal fact needs 2 integers");
    check_fact(t, xs[0], xs[1], at, "goal");
    if (!t.goal.emplace(static_cast<int>(xs[0]), static_cast<int>(xs[1])).second)
      throw ParseError(at, "duplicate goal variable");
  }
  in.expect("end_goal");

  long long nops = in.next_int("operator count");
  for (long long i = 0; i < nops; ++i) {
    int begin_line = in.line_no();
    in.expect("begin_operator");
    Operator op;
    op.name = in.next("operator name");
    long long nprev = in.next_int("prevail count");
    std::set<int> seen;
    for (long long j = 0; j < nprev; ++j) {
      int at = in.line_no();
      auto xs = in.next_ints("prevail");
      if (xs.size() != 2) throw ParseError(at, "prevail needs 2 integers");
      check_fact(t, xs[0], xs[1], at, "prevail");
      if (!seen.insert(static_cast<int>(xs[0])).second) throw ParseError(at, "variable repeated in operator");
      op.prevail.push_back({static_cast<int>(xs[0]), static_cast<int>(xs[1])});
    }
    long long neff = in.next_int("effect count");
    for (long long j = 0; j < neff; ++j) {
      int at = in.line_no();
      auto xs = in.next_ints("effect");
      if (xs.empty()) throw ParseError(at, "empty effect line");
      if (xs[0] != 0)
        throw UnsupportedFeature("line " + std::to_string(at) + ": conditional effect in operator '" + op.name + "'");
      if (xs.size() != 4) throw ParseError(at, "effect needs 'count var pre post'");
      if (xs[2] != -1) check_fact(t, xs[1], xs[2], at, "effect precondition");
      check_fact(t, xs[1], xs[3], at, "effect");
      if (!seen.insert(static_cast<int>(xs[1])).second) throw ParseError(at, "variable repeated in operator");
      op.pre_post.push_back({static_cast<int>(xs[1]), static_cast<int>(xs[2]), static_cast<int>(xs[3])});
    }
    if (op.pre_post.empty()) throw ParseError(begin_line, "operator '" + op.name + "' has no effect");
    int cline = in.line_no();
    op.cost = in.next_int("operator cost");
    if (op.cost < 0) throw ParseError(cline, "negative operator cost");
    in.expect("end_operator");
    t.operators.push_back(std::move(op));
  }

  int aline = in.line_no();
  long long naxioms = in.next_int("axiom count");
  if (naxioms != 0) throw UnsupportedFeature("line " + std::to_string(aline) + ": axioms are not supported");
  while (!in.done()) {
    int at = in.line_no();
    std::string rest = in.next("");
    if (!rest.empty()) throw ParseError(at, "trailing content after axiom section");
  }
  t.finalize();
  return t;
}

std::string serialize_sas(const FdrTask& t) {
  std::ostringstream out;
  out << "begin_version\n3\nend_version\n";
  out << "begin_metric\n" << (t.use_metric ? 1 : 0) << "\nend_metric\n";
  out << t.variables.size() << "\n";
  for (const auto& v : t.variables) {
    out << "begin_variable\n" << v.name << "\n" << v.axiom_layer << "\n" << v.values.size() << "\n";
    for (const auto& name : v.values) out << name << "\n";
    out << "end_variable\n";
  }
  out << t.mutex_groups.size() << "\n";
  for (const auto& g : t.mutex_groups) {
    out << "begin_mutex_group\n" << g.size() << "\n";
    for (const Fact& f : g) out << f.var << " " << f.val << "\n";
    out << "end_mutex_group\n";
  }
  out << "begin_state\n";
  for (int v : t.init) out << v << "\n";
  out << "end_state\n";
  out << "begin_goal\n" << t.goal.size() << "\n";
  for (auto [v, d] : t.goal) out << v << " " << d << "\n";
  out << "end_goal\n";
  out << t.operators.size() << "\n";
  for (const auto& op : t.operators) {
    out << "begin_operator\n" << op.name << "\n" << op.prevail.size() << "\n";
    for (const Fact& f : op.prevail) out << f.var << " " << f.val << "\n";
    out << op.pre_post.size() << "\n";
    for (const PrePost& pp : op.pre_post) out << "0 " << pp.var << " " << pp.pre << " " << pp.post << "\n";
    out << op.cost << "\nend_operator\n";
  }
  out << "0\n";
  return out.str();
}

SequentialPlan make_plan(const std::vector<int>& ops) {
  SequentialPlan p;
  for (size_t i = 0; i < ops.size(); ++i) p.steps.push_back({static_cast<int>(i), ops[i]});
  return p;
}

SequentialPlan parse_plan(std::string_view text, const FdrTask& task) {
  LineReader in(text);
  std::vector<int> ops;
  std::optional<long long> declared_cost;
  int cost_line = 0;
  while (!in.done()) {
    int at = in.line_no();
    std::string raw = in.next("plan line");
    std::string_view line = raw;
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == ';') {
      std::string l = lower(line);
      auto pos = l.find("cost");
      auto eq = l.find('=', pos == std::string::npos ? 0 : pos);
      if (pos != std::string::npos && eq != std::string::npos) {
        std::string num;
        size_t k = eq + 1;
        while (k < l.size() && std::isspace(static_cast<unsigned char>(l[k]))) ++k;
        while (k < l.size() && (std::isdigit(static_cast<unsigned char>(l[k])) || l[k] == '-')) num += l[k++];
        if (!num.empty()) {
          declared_cost = std::stoll(num);
          cost_line = at;
        }
      }
      continue;
    }
    if (line.front() != '(' || line.back() != ')')
      throw PlanError("plan line " + std::to_string(at) + ": expected '(name args...)', got '" + std::string(line) + "'");
    auto op = task.find_operator(line);
    if (!op)
      throw PlanError("plan line " + std::to_string(at) + ": unknown operator '" + std::string(line) + "'");
    ops.push_back(*op);
  }
  SequentialPlan plan = make_plan(ops);
  if (declared_cost) {
    int64_t actual = plan_cost(plan, task);
    if (*declared_cost != actual)
      throw PlanError("plan line " + std::to_string(cost_line) + ": declared cost " + std::to_string(*declared_cost) +
                      " but operators sum to " + std::to_string(actual));
  }
  return plan;
}

std::string format_plan(const SequentialPlan& plan, const FdrTask& task) {
  std::ostringstream out;
  for (const auto& s : plan.steps) out << "(" << task.operators[s.op].name << ")\n";
  out << "; cost = " << plan_cost(plan, task) << (task.use_metric && !task.zero_cost_fallback() ? " (general cost)" : " (unit cost)")
      << "\n";
  return out.str();
}

int64_t plan_cost(const SequentialPlan& plan, const FdrTask& task) {
  int64_t c = 0;
  for (const auto& s : plan.steps) c += task.cost(s.op);
  return c;
}

std::set<Fact> cons(const Operator& op) {
  std::set<Fact> out;
  for (auto [v, d] : op.pre) out.insert({v, d});
  return out;
}

std::set<Fact> prod(const Operator& op) {
  std::set<Fact> out;
  for (auto [v, d] : op.eff) out.insert({v, d});
  return out;
}

std::set<Fact> del(const FdrTask& task, const Operator& op) {
  std::set<Fact> out;
  for (auto [v, d2] : op.eff) {
    auto it = op.pre.find(v);
    if (it != op.pre.end()) {
      if (it->second != d2) out.insert({v, it->second});
    } else {
      for (int d = 0; d < task.domain_size(v); ++d)
        if (d != d2) out.insert({v, d});
    }
  }
  return out;
}

bool applicable(const Operator& op, const State& s) {
  for (auto [v, d] : op.pre)
    if (s[v] != d) return false;
  return true;
}

State apply(const FdrTask& task, const Operator& op, const State& s) {
  for (auto [v, d] : op.pre)
    if (s[v] != d)
      throw ApplicabilityError("operator '" + op.name + "' not applicable: needs " + fact_name(task, {v, d}));
  State out = s;
  for (auto [v, d] : op.eff) out[v] = d;
  return out;
}

bool satisfies(const State& s, const PartialState& ps) {
  for (auto [v, d] : ps)
    if (s[v] != d) return false;
  return true;
}

ValidationReport validate_sequential(const SequentialPlan& plan, const FdrTask& task) {
  ValidationReport r;
  State s = task.init;
  for (size_t i = 0; i < plan.steps.size(); ++i) {
    const Operator& op = task.operators[plan.steps[i].op];
    r.cost += task.cost(plan.steps[i].op);
    if (!applicable(op, s)) {
      r.failing_step = i;
      for (auto [v, d] : op.pre)
        if (s[v] != d) {
          r.reason = "step " + std::to_string(i + 1) + " (" + op.name + ") needs " + fact_name(task, {v, d});
          break;
        }
      r.final_state = s;
      return r;
    }
    for (auto [v, d] : op.eff) s[v] = d;
  }
  r.final_state = s;
  for (auto [v, d] : task.goal) {
    if (s[v] != d) {
      r.reason = "goal " + fact_name(task, {v, d}) + " not reached";
      return r;
    }
  }
  r.valid = true;
  return r;
}

std::string fact_name(const FdrTask& task, Fact f) {
  const Variable& v = task.variables[f.var];
  std::string val = f.val >= 0 && f.val < static_cast<int>(v.values.size()) ? v.values[f.val] : std::to_string(f.val);
  return v.name + "=" + val;
}

}  // namespace cibs
