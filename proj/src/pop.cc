#include "cibs/pop.h"

#include <algorithm>
#include <queue>

namespace cibs {

std::string reason_kind_name(ReasonKind k) {
  switch (k) {
    case ReasonKind::PC: return "PC";
    case ReasonKind::CD: return "CD";
    case ReasonKind::DP: return "DP";
    case ReasonKind::Anchor: return "ANCHOR";
  }
  return "?";
}

bool PartialOrderPlan::closure(BitMatrix& out) const {
  const size_t n = nodes.size();
  out = BitMatrix(n);
  for (const auto& [e, _] : orderings) out.set(e.first, e.second);
  for (size_t i = 2; i < n; ++i) {
    out.set(kInitNode, i);
    out.set(i, kGoalNode);
  }
  if (n >= 2) out.set(kInitNode, kGoalNode);
  return out.close();
}

std::vector<std::pair<int, int>> PartialOrderPlan::basic_orderings() const {
  BitMatrix reach(nodes.size());
  for (const auto& [e, _] : orderings) reach.set(e.first, e.second);
  if (!reach.close()) throw InternalError("ordering cycle");
  std::vector<std::pair<int, int>> out;
  for (const auto& [e, _] : orderings) {
    bool implied = false;
    for (size_t k = 0; k < nodes.size() && !implied; ++k)
      implied = static_cast<int>(k) != e.first && static_cast<int>(k) != e.second && reach.get(e.first, k) &&
                reach.get(k, e.second);
    if (!implied) out.push_back(e);
  }
  return out;
}

std::set<Fact> node_pre(const PartialOrderPlan& pop, const FdrTask& task, int n) {
  const PlanNode& node = pop.nodes[n];
  std::set<Fact> out;
  if (node.kind == NodeKind::Op) return cons(task.operators[node.op]);
  if (node.kind == NodeKind::Goal)
    for (auto [v, d] : task.goal) out.insert({v, d});
  return out;
}

std::set<Fact> node_eff(const PartialOrderPlan& pop, const FdrTask& task, int n) {
  const PlanNode& node = pop.nodes[n];
  std::set<Fact> out;
  if (node.kind == NodeKind::Op) return prod(task.operators[node.op]);
  if (node.kind == NodeKind::Init)
    for (int v = 0; v < task.num_vars(); ++v) out.insert({v, task.init[v]});
  return out;
}

std::set<Fact> node_del(const PartialOrderPlan& pop, const FdrTask& task, int n) {
  const PlanNode& node = pop.nodes[n];
  if (node.kind == NodeKind::Op) return del(task, task.operators[node.op]);
  return {};
}

PartialOrderPlan eog(const SequentialPlan& plan, const FdrTask& task) {
  const ValidationReport vr = validate_sequential(plan, task);
  if (!vr.valid) throw PlanError("plan is not valid: " + vr.reason);

  PartialOrderPlan pop;
  const int n = static_cast<int>(plan.size());
  pop.nodes.push_back({NodeKind::Init, -1, -1, -1});
  pop.nodes.push_back({NodeKind::Goal, -1, -1, n});
  for (int i = 0; i < n; ++i) pop.nodes.push_back({NodeKind::Op, plan.steps[i].op, plan.steps[i].instance, i});

  // sequence position -> node: 0 is INIT, n + 1 is GOAL
  auto node_at = [&](int pos) { return pos == 0 ? kInitNode : pos == n + 1 ? kGoalNode : pos + 1; };
  std::vector<std::set<Fact>> pre(n + 2), eff(n + 2), dels(n + 2);
  for (int pos = 0; pos <= n + 1; ++pos) {
    int node = node_at(pos);
    pre[pos] = node_pre(pop, task, node);
    eff[pos] = node_eff(pop, task, node);
    dels[pos] = node_del(pop, task, node);
  }

  std::map<Fact, std::vector<int>> deleters;
  for (int pos = 1; pos <= n; ++pos)
    for (const Fact& f : dels[pos]) deleters[f].push_back(pos);

  struct PosLink {
    int p, c;
    Fact f;
  };
  std::vector<PosLink> links;
  for (int i = 1; i <= n + 1; ++i) {
    for (const Fact& f : pre[i]) {
      int last_del = -1;
      if (auto it = deleters.find(f); it != deleters.end())
        for (int d : it->second)
          if (d < i) last_del = std::max(last_del, d);
      int k = -1;
      for (int j = last_del + 1; j < i; ++j)
        if (eff[j].count(f)) {
          k = j;
          break;
        }
      if (k < 0) throw InternalError("no producer for " + fact_name(task, f));
      links.push_back({k, i, f});
    }
  }

  auto add = [&](int a, int b, Reason r) { pop.orderings[{node_at(a), node_at(b)}].insert(r); };
  for (const PosLink& l : links) {
    pop.links.push_back({node_at(l.p), node_at(l.c), l.f});
    add(l.p, l.c, {ReasonKind::PC, l.f});
    auto it = deleters.find(l.f);
    if (it == deleters.end()) continue;
    for (int d : it->second) {
      if (d == l.c || d == l.p) continue;
      if (d > l.c) add(l.c, d, {ReasonKind::CD, l.f});
      if (d < l.p) add(d, l.p, {ReasonKind::DP, l.f});
    }
  }
  std::sort(pop.links.begin(), pop.links.end());
  return pop;
}

OrderingMap annotate_reasons(const PartialOrderPlan& pop) {
  OrderingMap out;
  for (const auto& e : pop.basic_orderings()) {
    auto it = pop.orderings.find(e);
    if (it == pop.orderings.end() || it->second.empty())
      throw InternalError("basic ordering " + std::to_string(e.first) + "->" + std::to_string(e.second) +
                          " has no reason");
    out[e] = it->second;
  }
  return out;
}

bool is_valid_pop(const PartialOrderPlan& pop, const FdrTask& task) {
  BitMatrix before;
  if (!pop.closure(before)) return false;
  const int n = static_cast<int>(pop.nodes.size());
  std::vector<std::set<Fact>> eff(n), dels(n);
  for (int i = 0; i < n; ++i) {
    eff[i] = node_eff(pop, task, i);
    dels[i] = node_del(pop, task, i);
  }
  for (int c = 1; c < n; ++c) {
    for (const Fact& f : node_pre(pop, task, c)) {
      bool established = false;
      for (int p = 0; p < n && !established; ++p) established = p != c && before.get(p, c) && eff[p].count(f);
      if (!established) return false;
      for (int k = 2; k < n; ++k) {
        if (k == c || !dels[k].count(f) || before.get(c, k)) continue;
        bool knight = false;
        for (int p = 0; p < n && !knight; ++p) knight = before.get(k, p) && before.get(p, c) && eff[p].count(f);
        if (!knight) return false;
      }
    }
  }
  return true;
}

SequentialPlan linearize(const PartialOrderPlan& pop) {
  const int n = static_cast<int>(pop.nodes.size());
  std::vector<std::vector<int>> succ(n);
  std::vector<int> indeg(n, 0);
  for (const auto& [e, _] : pop.orderings) {
    if (e.first < 2 || e.second < 2) continue;
    succ[e.first].push_back(e.second);
    ++indeg[e.second];
  }
  using Key = std::pair<int, int>;  // (instance, node)
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  for (int i = 2; i < n; ++i)
    if (indeg[i] == 0) ready.push({pop.nodes[i].instance, i});
  SequentialPlan out;
  while (!ready.empty()) {
    int i = ready.top().second;
    ready.pop();
    out.steps.push_back({pop.nodes[i].instance, pop.nodes[i].op});
    for (int j : succ[i])
      if (--indeg[j] == 0) ready.push({pop.nodes[j].instance, j});
  }
  if (static_cast<int>(out.size()) != n - 2) throw InternalError("ordering cycle");
  return out;
}

Rational flex(const PartialOrderPlan& pop) {
  const int64_t m = static_cast<int64_t>(pop.num_ops());
  if (m < 2) throw std::domain_error("flex needs at least two operators");
  BitMatrix before;
  if (!pop.closure(before)) throw InternalError("ordering cycle");
  int64_t unordered = 0;
  const int n = static_cast<int>(pop.nodes.size());
  for (int i = 2; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!before.get(i, j) && !before.get(j, i)) ++unordered;
  return Rational::make(unordered, m * (m - 1) / 2);
}

}  // namespace cibs
