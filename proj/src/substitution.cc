#include "cibs/substitution.h"

#include <algorithm>
#include <map>

#include "cibs/dtg.h"

namespace cibs {

namespace {

struct Threat {
  CausalLink link;
  int X = -1, P = -1, C = -1;
  bool inner = false;
};

std::optional<Threat> first_threat(const BdpoPlan& plan) {
  for (const CausalLink& l : plan.links) {
    int P = -1, C = -1;
    const int L = plan.lca(l.producer, l.consumer, &P, &C);
    for (int X : plan.elems[L].children) {
      if (X == P || X == C) continue;
      if (!plan.before(X, P) && !plan.before(C, X) && plan.sem(X).del.count(l.fact)) return Threat{l, X, P, C, false};
    }
    for (int u = plan.node_elem[l.producer]; u != P; u = plan.elems[u].parent)
      for (int Y : plan.elems[plan.elems[u].parent].children)
        if (Y != u && !plan.before(Y, u) && plan.sem(Y).del.count(l.fact)) return Threat{l, Y, P, C, true};
    for (int u = plan.node_elem[l.consumer]; u != C; u = plan.elems[u].parent)
      for (int Y : plan.elems[plan.elems[u].parent].children)
        if (Y != u && !plan.before(u, Y) && plan.sem(Y).del.count(l.fact)) return Threat{l, Y, P, C, true};
  }
  return std::nullopt;
}

/// Member of e whose operator deletes f, falling back to the first member.
int deleter_node(const BdpoPlan& p, int e, Fact f) {
  for (int n : p.members(e)) {
    if (p.nodes[n].kind != NodeKind::Op) continue;
    const auto& eff = p.task().operators[p.nodes[n].op].eff;
    auto it = eff.find(f.var);
    if (it != eff.end() && it->second != f.val) return n;
  }
  return p.members(e).front();
}

void add_edge(BdpoPlan& p, int a, int b, Reason r) {
  p.orderings[{a, b}].insert(r);
  p.touch();
}

/// Hand every link leaving `target` to `by` and drop `target`.
std::optional<std::string> replace_internally(BdpoPlan& p, int target, int by) {
  std::vector<size_t> out;
  for (size_t i = 0; i < p.links.size(); ++i)
    if (p.contains(target, p.links[i].producer) && !p.contains(target, p.links[i].consumer)) out.push_back(i);
  for (size_t i : out) {
    const CausalLink l = p.links[i];
    if (p.contains(by, l.consumer)) return "replacement consumes " + fact_name(p.task(), l.fact) + " itself";
    if (!p.sem(by).prod.count(l.fact)) return "replacement does not produce " + fact_name(p.task(), l.fact);
  }
  for (size_t i : out) {
    const int np = p.final_producer(by, p.links[i].fact);
    p.links[i].producer = np;
    p.orderings[{np, p.links[i].consumer}].insert({ReasonKind::PC, p.links[i].fact});
  }
  p.touch();
  p.remove_element(target);
  return std::nullopt;
}

bool is_terminal(int e) { return e == kInitElem || e == kGoalElem; }

}  // namespace

SubstitutionOutcome substitute(const PbdPlan& pbd, int bx, const PartialOrderPlan& candidate,
                               const SubstituteOptions& opts) {
  std::vector<std::string> trace;
  auto fail = [&](const std::string& why) {
    trace.push_back("rejected: " + why);
    return SubstitutionOutcome{pbd, false, trace};
  };
  if (candidate.num_ops() == 0) return fail("empty candidate");

  PbdPlan work = pbd;
  BdpoPlan& P = work.plan;
  const FdrTask& task = P.task();
  const int L = P.elems[bx].parent;

  std::vector<int> preds, succs;
  if (opts.inherit_neighbors) {
    for (int Z : P.elems[L].children) {
      if (Z == bx || is_terminal(Z)) continue;
      if (P.before(Z, bx)) preds.push_back(Z);
      if (P.before(bx, Z)) succs.push_back(Z);
    }
    auto immediate = [&](std::vector<int> side, bool up) {
      std::erase_if(side, [&](int Z) {
        for (int W : side)
          if (W != Z && (up ? P.before(Z, W) : P.before(W, Z))) return true;
        return false;
      });
      return side;
    };
    preds = immediate(preds, true);
    succs = immediate(succs, false);
  }

  int max_inst = -1, max_pos = -1;
  for (int n : P.op_nodes()) {
    max_inst = std::max(max_inst, P.nodes[n].instance);
    max_pos = std::max(max_pos, P.nodes[n].position);
  }
  std::vector<int> map(candidate.nodes.size(), -1);
  int bhat = -1;
  int parent = L;
  if (candidate.num_ops() > 1) {
    bhat = static_cast<int>(P.elems.size());
    Element blk;
    blk.parent = L;
    P.elems.push_back(blk);
    P.elems[L].children.push_back(bhat);
    parent = bhat;
  }
  for (size_t k = 2; k < candidate.nodes.size(); ++k) {
    PlanNode n = candidate.nodes[k];
    n.instance = max_inst + static_cast<int>(k) - 1;
    n.position = max_pos + static_cast<int>(k) - 1;
    map[k] = P.add_node(n, parent);
  }
  if (bhat < 0) bhat = P.node_elem[map[2]];
  for (const CausalLink& l : candidate.links)
    if (map[l.producer] >= 0 && map[l.consumer] >= 0) P.links.push_back({map[l.producer], map[l.consumer], l.fact});
  for (const auto& [e, rs] : candidate.orderings)
    if (map[e.first] >= 0 && map[e.second] >= 0) P.orderings[{map[e.first], map[e.second]}].insert(rs.begin(), rs.end());
  const int head = P.members(bhat).front();
  for (int Z : preds) add_edge(P, P.members(Z).back(), head, {ReasonKind::Anchor, {}});
  for (int Z : succs) add_edge(P, head, P.members(Z).front(), {ReasonKind::Anchor, {}});
  P.touch();
  trace.push_back("inserted " + P.describe(bhat) + " for " + P.describe(bx));

  for (const CausalLink& l : candidate.links) {
    if (l.producer != kInitNode || map[l.consumer] < 0) continue;
    const int Z = earliest_candidate_producer(P, l.fact, bhat, bx);
    if (Z < 0) return fail("no producer for " + fact_name(task, l.fact));
    const int pn = P.final_producer(Z, l.fact);
    if (pn < 0) return fail("no producer for " + fact_name(task, l.fact));
    P.links.push_back({pn, map[l.consumer], l.fact});
    add_edge(P, pn, map[l.consumer], {ReasonKind::PC, l.fact});
    trace.push_back("link " + P.describe(Z) + " -> " + P.describe(bhat) + " (" + fact_name(task, l.fact) + ")");
  }

  std::vector<size_t> supplied;
  for (size_t i = 0; i < P.links.size(); ++i)
    if (P.contains(bx, P.links[i].producer) && !P.contains(bx, P.links[i].consumer)) supplied.push_back(i);
  for (size_t i : supplied)
    if (!P.sem(bhat).prod.count(P.links[i].fact)) return fail("does not produce " + fact_name(task, P.links[i].fact));
  for (size_t i : supplied) {
    CausalLink& l = P.links[i];
    l.producer = P.final_producer(bhat, l.fact);
    P.orderings[{l.producer, l.consumer}].insert({ReasonKind::PC, l.fact});
  }
  P.touch();
  P.remove_element(bx);

  for (int iter = 0;; ++iter) {
    if (iter > 1000) return fail("threat repair did not settle");
    if (!P.acyclic()) return fail("ordering cycle");
    const auto t = first_threat(P);
    if (!t) break;
    const Fact f = t->link.fact;
    const std::string what = P.describe(t->X) + " threatens " + fact_name(task, f);
    if (t->inner) return fail(what + " inside a block");
    if (!P.before(t->X, t->C)) {
      add_edge(P, t->link.consumer, deleter_node(P, t->X, f), {ReasonKind::CD, f});
      trace.push_back("demote: " + what);
    } else if (!P.before(t->P, t->X)) {
      add_edge(P, deleter_node(P, t->X, f), t->link.producer, {ReasonKind::DP, f});
      trace.push_back("promote: " + what);
    } else if (t->X == bhat || t->C == bhat) {
      const int target = t->X == bhat ? t->C : t->X;
      trace.push_back("replace " + P.describe(target) + " by " + P.describe(bhat));
      if (auto err = replace_internally(P, target, bhat)) return fail(*err);
    } else {
      return fail(what + ", no repair");
    }
  }
  P.dissolve_singletons();
  if (auto err = check_bdpo(P)) return fail(*err);
  refresh_nonconcurrency(work);
  return SubstitutionOutcome{std::move(work), true, std::move(trace)};
}

SubplanRequest build_subtask(const PbdPlan& pbd, int b) {
  const BdpoPlan& p = pbd.plan;
  const FdrTask& task = p.task();
  const int anchor = p.members(b).front();
  SubplanRequest req;
  req.subtask = task;
  State s = task.init;
  for (int n : witness_nodes(p)) {
    if (p.contains(b, n) || !p.node_before(n, anchor)) continue;
    const Operator& op = task.operators[p.nodes[n].op];
    if (!applicable(op, s)) throw InternalError("predecessors of " + p.describe(b) + " do not execute");
    s = apply(task, op, s);
  }
  for (const CausalLink& l : p.links) {
    const bool pin = p.contains(b, l.producer), cin = p.contains(b, l.consumer);
    if (pin && !cin) req.supplied.insert(l.fact);
    if (!pin && !cin && p.node_before(l.producer, anchor) && p.node_before(anchor, l.consumer))
      req.crossing.insert(l.fact);
  }
  PartialState goal;
  for (const std::set<Fact>* fs : {&req.supplied, &req.crossing})
    for (const Fact& f : *fs) {
      auto [it, fresh] = goal.emplace(f.var, f.val);
      if (!fresh && it->second != f.val) throw InternalError("subtask goal is inconsistent");
    }
  req.subtask.init = s;
  req.subtask.goal = goal;
  req.cost_bound = 0;
  for (int n : p.members(b))
    if (p.nodes[n].kind == NodeKind::Op) req.cost_bound += task.cost(p.nodes[n].op);
  return req;
}

SubstitutionOutcome resolve_nonconcurrency(const PbdPlan& pbd, int bi, int bj, const PlannerConfig& cfg) {
  const BdpoPlan& orig = pbd.plan;
  const FdrTask& task = orig.task();
  std::vector<std::string> trace;
  auto fail = [&](const std::string& why) {
    trace.push_back(why);
    return SubstitutionOutcome{pbd, false, trace};
  };

  const ExtendResult ext = extend(pbd, bi, bj);
  std::string cv;
  for (int v : ext.cvars) cv += (cv.empty() ? "" : ",") + task.variables[v].name;
  trace.push_back("conflict on {" + cv + "}");
  PbdPlan start = pbd;
  int b = bi;
  if (ext.members.size() > 1) {
    const int L = orig.elems[bi].parent;
    b = ext.members.size() == orig.elems[L].children.size() ? L : start.plan.add_block(ext.members);
    if (b < 0) return fail("cannot group extended block");
    trace.push_back("extended to " + start.plan.describe(b));
  }

  SubplanRequest req;
  try {
    req = build_subtask(start, b);
  } catch (const InternalError& e) {
    return fail(e.what());
  }
  req.time_bound = cfg.time_bound;
  req.max_solutions = cfg.max_solutions;
  const PlannerResult found = generate_plans(req, cfg);
  if (!found.diagnostic.empty()) trace.push_back("planner: " + found.diagnostic);

  struct Cand {
    SequentialPlan plan;
    int64_t cost;
    std::vector<std::string> names;
  };
  std::vector<Cand> cands;
  std::set<std::vector<int>> seen;
  for (const SequentialPlan& sp : found.plans) {
    std::vector<int> ms;
    std::vector<std::string> names;
    for (const PlanStep& s : sp.steps) {
      ms.push_back(s.op);
      names.push_back(task.operators[s.op].name);
    }
    std::sort(ms.begin(), ms.end());
    if (seen.insert(ms).second) cands.push_back({sp, plan_cost(sp, req.subtask), names});
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& a, const Cand& c) { return std::tie(a.cost, a.names) < std::tie(c.cost, c.names); });
  trace.push_back(std::to_string(cands.size()) + " candidates");

  const Rational base = cflex(pbd);
  const int64_t base_cost = orig.cost();
  std::vector<int> partner;
  for (int n : orig.members(bj))
    if (orig.nodes[n].kind == NodeKind::Op) partner.push_back(orig.nodes[n].op);
  for (size_t k = 0; k < cands.size(); ++k) {
    const std::string tag = "candidate " + std::to_string(k) + ": ";
    bool clash = false;
    for (const PlanStep& s : cands[k].plan.steps)
      for (int o : partner) clash = clash || !op_conflict_vars(task.operators[s.op], task.operators[o]).empty();
    if (clash) {
      trace.push_back(tag + "conflicts with partner");
      continue;
    }
    const PartialOrderPlan cand = eog(cands[k].plan, req.subtask);
    SubstitutionOutcome out = substitute(start, b, cand, {.inherit_neighbors = true});
    if (!out.success) {
      trace.push_back(tag + (out.trace.empty() ? "substitution failed" : out.trace.back()));
      continue;
    }
    if (out.plan.plan.num_ops() < 2) {
      trace.push_back(tag + "too few operators left");
      continue;
    }
    if (!is_valid_pop(expand(out.plan.plan, true), task)) {
      trace.push_back(tag + "expanded plan invalid");
      continue;
    }
    const Rational cf = cflex(out.plan);
    const int64_t cost = out.plan.plan.cost();
    if (!(base < cf) || cost > base_cost) {
      trace.push_back(tag + "no gain (cflex " + cf.str() + ", cost " + std::to_string(cost) + ")");
      continue;
    }
    trace.insert(trace.end(), out.trace.begin(), out.trace.end());
    trace.push_back(tag + "accepted, cflex " + base.str() + " -> " + cf.str());
    out.trace = std::move(trace);
    return out;
  }
  return fail("no candidate accepted");
}

ScResult substitution_for_concurrency(const PbdPlan& pbd, const PlannerConfig& cfg, int max_rounds) {
  ScResult res{pbd, {}, 0};
  for (int round = 0; round < max_rounds; ++round) {
    bool changed = false;
    for (auto [a, b] : necessary_nonconcurrency(res.plan)) {
      for (auto [x, y] : {std::pair(a, b), std::pair(b, a)}) {
        ScAttempt at{res.plan.plan.describe(x), res.plan.plan.describe(y), false, {}, {}};
        SubstitutionOutcome out = resolve_nonconcurrency(res.plan, x, y, cfg);
        at.success = out.success;
        at.trace = std::move(out.trace);
        if (out.success) res.plan = std::move(out.plan);
        at.cflex_after = cflex(res.plan);
        res.attempts.push_back(std::move(at));
        if (out.success) {
          ++res.accepted;
          changed = true;
          break;
        }
      }
      if (changed) break;
    }
    if (!changed) break;
  }
  return res;
}

}  // namespace cibs
