#include "support.h"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cibs::testing {

std::string fixture_path(const std::string& name) { return std::string(FIXTURE_DIR) + "/" + name; }

std::string read_fixture(const std::string& name) {
  std::ifstream in(fixture_path(name));
  if (!in) throw std::runtime_error("missing fixture " + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FdrTask load_task(const std::string& name) { return parse_sas(read_fixture(name)); }

FdrTask make_task(const std::vector<std::pair<std::string, int>>& vars, const State& init, const PartialState& goal,
                  const std::vector<OpSpec>& ops, bool metric) {
  FdrTask t;
  t.use_metric = metric;
  for (const auto& [name, dom] : vars) {
    Variable v;
    v.name = name;
    for (int d = 0; d < dom; ++d) v.values.push_back("d" + std::to_string(d));
    t.variables.push_back(v);
  }
  t.init = init;
  t.goal = goal;
  for (const OpSpec& s : ops) {
    Operator op;
    op.name = s.name;
    op.cost = s.cost;
    for (auto [v, d] : s.prevail) op.prevail.push_back({v, d});
    for (auto [v, pre, post] : s.effects) op.pre_post.push_back({v, pre, post});
    t.operators.push_back(op);
  }
  t.finalize();
  return t;
}

SequentialPlan plan_of(const FdrTask& task, const std::vector<std::string>& names) {
  std::vector<int> ops;
  for (const auto& n : names) {
    auto o = task.find_operator(n);
    if (!o) throw std::runtime_error("unknown operator " + n);
    ops.push_back(*o);
  }
  return make_plan(ops);
}

RandomInstance random_instance(std::mt19937& rng, int max_steps) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  for (;;) {
    const int nvars = pick(2, 4);
    std::vector<std::pair<std::string, int>> vars;
    State init;
    for (int v = 0; v < nvars; ++v) {
      vars.push_back({"v" + std::to_string(v), pick(2, 3)});
      init.push_back(pick(0, vars.back().second - 1));
    }
    std::vector<OpSpec> ops;
    const int nops = pick(3, 8);
    for (int k = 0; k < nops; ++k) {
      OpSpec s;
      s.name = "o" + std::to_string(k);
      std::vector<int> order(nvars);
      for (int v = 0; v < nvars; ++v) order[v] = v;
      std::shuffle(order.begin(), order.end(), rng);
      const int neff = pick(1, std::min(2, nvars));
      for (int i = 0; i < nvars; ++i) {
        const int v = order[i];
        const int dom = vars[v].second;
        if (i < neff) {
          const int pre = pick(-1, dom - 1);
          int post = pick(0, dom - 1);
          if (post == pre) post = (post + 1) % dom;
          s.effects.push_back({v, pre, post});
        } else if (pick(0, 2) == 0) {
          s.prevail.push_back({v, pick(0, dom - 1)});
        }
      }
      ops.push_back(s);
    }
    FdrTask task = make_task(vars, init, {}, ops);
    State s = task.init;
    std::vector<int> steps;
    const int len = pick(1, max_steps);
    for (int k = 0; k < len; ++k) {
      std::vector<int> app;
      for (int o = 0; o < nops; ++o)
        if (applicable(task.operators[o], s)) app.push_back(o);
      if (app.empty()) break;
      const int o = app[pick(0, static_cast<int>(app.size()) - 1)];
      steps.push_back(o);
      s = apply(task, task.operators[o], s);
    }
    if (steps.empty()) continue;
    PartialState goal;
    for (int v = 0; v < nvars; ++v)
      if (pick(0, 1) == 0) goal[v] = s[v];
    if (goal.empty()) goal[0] = s[0];
    task.goal = goal;
    return {task, make_plan(steps)};
  }
}

namespace {

size_t enumerate(size_t m, const std::vector<uint32_t>& preds, const std::vector<uint32_t>& blocks,
                 const std::function<bool(const NodeSeq&)>& fn, const std::vector<int>& ids) {
  size_t count = 0;
  bool stop = false;
  NodeSeq seq;
  std::function<void(uint32_t)> rec = [&](uint32_t done) {
    if (stop) return;
    if (seq.size() == m) {
      ++count;
      if (!fn(seq)) stop = true;
      return;
    }
    for (size_t i = 0; i < m && !stop; ++i) {
      if ((done >> i) & 1 || (preds[i] & ~done)) continue;
      bool legal = true;
      for (uint32_t bm : blocks)
        if ((done & bm) && (~done & bm) && !((bm >> i) & 1)) legal = false;
      if (!legal) continue;
      seq.push_back(ids[i]);
      rec(done | (uint32_t{1} << i));
      seq.pop_back();
    }
  };
  rec(0);
  return count;
}

}  // namespace

size_t for_each_linearization(const PartialOrderPlan& pop, const std::function<bool(const NodeSeq&)>& fn) {
  BitMatrix before;
  if (!pop.closure(before)) throw std::runtime_error("cyclic plan");
  std::vector<int> ids;
  for (size_t n = 2; n < pop.nodes.size(); ++n) ids.push_back(static_cast<int>(n));
  std::vector<uint32_t> preds(ids.size(), 0);
  for (size_t i = 0; i < ids.size(); ++i)
    for (size_t j = 0; j < ids.size(); ++j)
      if (before.get(ids[j], ids[i])) preds[i] |= uint32_t{1} << j;
  return enumerate(ids.size(), preds, {}, fn, ids);
}

size_t for_each_legal_execution(const BdpoPlan& plan, const std::function<bool(const NodeSeq&)>& fn) {
  const std::vector<int> ids = plan.op_nodes();
  std::vector<uint32_t> preds(ids.size(), 0);
  for (size_t i = 0; i < ids.size(); ++i)
    for (size_t j = 0; j < ids.size(); ++j)
      if (plan.node_before(ids[j], ids[i])) preds[i] |= uint32_t{1} << j;
  std::vector<uint32_t> blocks;
  for (int b : plan.blocks()) {
    uint32_t bm = 0;
    for (size_t i = 0; i < ids.size(); ++i)
      if (plan.contains(b, ids[i])) bm |= uint32_t{1} << i;
    blocks.push_back(bm);
  }
  return enumerate(ids.size(), preds, blocks, fn, ids);
}

SequentialPlan to_plan(const std::vector<PlanNode>& nodes, const NodeSeq& seq) {
  SequentialPlan p;
  for (int n : seq) p.steps.push_back({nodes[n].instance, nodes[n].op});
  return p;
}

int find_element(const BdpoPlan& plan, const std::vector<std::string>& names) {
  std::vector<std::string> want = names;
  std::sort(want.begin(), want.end());
  for (size_t e = 0; e < plan.elems.size(); ++e) {
    if (!plan.elems[e].alive) continue;
    std::vector<std::string> got;
    for (int n : plan.members(static_cast<int>(e)))
      if (plan.nodes[n].kind == NodeKind::Op) got.push_back(plan.task().operators[plan.nodes[n].op].name);
    std::sort(got.begin(), got.end());
    if (got == want && plan.members(static_cast<int>(e)).size() == names.size()) return static_cast<int>(e);
  }
  return -1;
}

}  // namespace cibs::testing

namespace cibs::testing {

FdrTask all_operators(const std::vector<int>& domains) {
  FdrTask t;
  for (size_t v = 0; v < domains.size(); ++v) {
    Variable var;
    var.name = "v" + std::to_string(v);
    for (int d = 0; d < domains[v]; ++d) var.values.push_back("d" + std::to_string(d));
    t.variables.push_back(var);
    t.init.push_back(0);
  }
  // each variable takes (pre, eff) in [-1, dom) x [-1, dom)
  std::vector<int> choice(domains.size(), 0);
  std::vector<int> radix;
  for (int d : domains) radix.push_back((d + 1) * (d + 1));
  for (;;) {
    Operator op;
    bool has_effect = false;
    for (size_t v = 0; v < domains.size(); ++v) {
      const int pre = choice[v] / (domains[v] + 1) - 1;
      const int eff = choice[v] % (domains[v] + 1) - 1;
      op.name += (v ? " " : "") + std::to_string(pre) + ":" + std::to_string(eff);
      if (eff >= 0) {
        op.pre_post.push_back({static_cast<int>(v), pre, eff});
        has_effect = true;
      } else if (pre >= 0) {
        op.prevail.push_back({static_cast<int>(v), pre});
      }
    }
    if (has_effect) t.operators.push_back(op);
    size_t k = 0;
    while (k < choice.size() && ++choice[k] == radix[k]) choice[k++] = 0;
    if (k == choice.size()) break;
  }
  t.finalize();
  return t;
}

namespace {

void for_each_state(const FdrTask& task, const std::function<void(const State&)>& fn) {
  State s(task.num_vars(), 0);
  for (;;) {
    fn(s);
    int v = 0;
    while (v < task.num_vars() && ++s[v] == task.domain_size(v)) s[v++] = 0;
    if (v == task.num_vars()) return;
  }
}

}  // namespace

bool semantically_concurrent(const FdrTask& task, const Operator& a, const Operator& b) {
  bool witness = false, ok = true;
  for_each_state(task, [&](const State& s) {
    if (!ok || !applicable(a, s) || !applicable(b, s)) return;
    witness = true;
    const State sa = apply(task, a, s), sb = apply(task, b, s);
    if (!applicable(b, sa) || !applicable(a, sb) || apply(task, b, sa) != apply(task, a, sb)) ok = false;
  });
  return witness && ok;
}

MicroCheck micro_concurrency_check(const std::vector<int>& domains) {
  const FdrTask t = all_operators(domains);
  std::vector<State> states;
  for_each_state(t, [&](const State& s) { states.push_back(s); });
  const size_t n = t.operators.size();
  // Flattened per-operator successor table: next[o][s] = -1 when inapplicable.
  auto index_of = [&](const State& s) {
    size_t idx = 0;
    for (int v = t.num_vars() - 1; v >= 0; --v) idx = idx * t.domain_size(v) + s[v];
    return static_cast<int>(idx);
  };
  std::vector<std::vector<int>> next(n, std::vector<int>(states.size(), -1));
  for (size_t o = 0; o < n; ++o)
    for (size_t s = 0; s < states.size(); ++s)
      if (applicable(t.operators[o], states[s])) next[o][s] = index_of(apply(t, t.operators[o], states[s]));

  MicroCheck out;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i; j < n; ++j) {
      bool witness = false, ok = true;
      for (size_t s = 0; s < states.size() && ok; ++s) {
        const int a = next[i][s], b = next[j][s];
        if (a < 0 || b < 0) continue;
        witness = true;
        const int ab = next[j][a], ba = next[i][b];
        ok = ab >= 0 && ba >= 0 && ab == ba;
      }
      const bool semantic = witness && ok;
      const bool syntactic = op_conflict_vars(t.operators[i], t.operators[j]).empty();
      ++out.pairs;
      if (semantic != syntactic) {
        if (out.mismatches++ == 0)
          out.example = "[" + t.operators[i].name + "] vs [" + t.operators[j].name + "]: enumeration says " +
                        (semantic ? "concurrent" : "not concurrent");
      }
    }
  return out;
}

}  // namespace cibs::testing

namespace cibs::testing {

CycleTask cycle_task() {
  enum { V1, V2, V3, V4, V5 };
  enum { D1, D2, D3, D4 };
  const std::vector<OpSpec> ops = {
      {"o1", {}, {{V2, D1, D2}, {V1, -1, 0}}}, {"o2", {}, {{V2, D2, D3}, {V1, -1, 0}}},
      {"o3", {}, {{V2, D3, D2}, {V1, -1, 0}}}, {"o4", {}, {{V2, D2, D1}, {V1, -1, 0}}},
      {"o5", {}, {{V2, D1, D4}}},             {"o6", {}, {{V2, D4, D3}}},
      {"o7", {}, {{V2, D3, D4}}},             {"o8", {}, {{V2, D4, D1}, {V3, 0, 1}}},
      {"other", {{V3, 1}}, {{V1, -1, 1}, {V5, 0, 1}}},
      {"use", {{V2, D2}}, {{V4, 0, 1}}},
  };
  CycleTask c;
  c.task = make_task({{"v1", 2}, {"v2", 4}, {"v3", 2}, {"v4", 2}, {"v5", 2}}, {0, D4, 0, 0, 0},
                     {{V2, D3}, {V4, 1}, {V5, 1}}, ops);
  c.plan = plan_of(c.task, {"o8", "other", "o1", "use", "o2"});
  return c;
}

}  // namespace cibs::testing
