#include "cibs/dtg.h"

#include <algorithm>
#include <deque>
#include <map>
#include <sstream>

namespace cibs {

DomainTransitionGraph build_dtg(const FdrTask& task, int var) {
  DomainTransitionGraph g;
  g.var = var;
  g.adj.resize(task.domain_size(var));
  for (int o = 0; o < static_cast<int>(task.operators.size()); ++o) {
    const Operator& op = task.operators[o];
    auto e = op.eff.find(var);
    if (e == op.eff.end()) continue;
    auto p = op.pre.find(var);
    if (p != op.pre.end()) {
      g.adj[p->second].push_back({e->second, o});
    } else {
      for (int d = 0; d < task.domain_size(var); ++d)
        if (d != e->second) g.adj[d].push_back({e->second, o});
    }
  }
  return g;
}

bool safe_transition_exists(const DomainTransitionGraph& g, int d_from, int d_to,
                            const std::function<bool(int)>& allowed) {
  if (d_from == d_to) return true;
  std::vector<char> seen(g.adj.size(), 0);
  std::deque<int> q{d_from};
  seen[d_from] = 1;
  while (!q.empty()) {
    int d = q.front();
    q.pop_front();
    for (const DtgEdge& e : g.adj[d]) {
      if (seen[e.to] || !allowed(e.op)) continue;
      if (e.to == d_to) return true;
      seen[e.to] = 1;
      q.push_back(e.to);
    }
  }
  return false;
}

std::string dtg_to_dot(const FdrTask& task, const DomainTransitionGraph& g) {
  const Variable& v = task.variables[g.var];
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  std::ostringstream os;
  os << "digraph " << quote(v.name) << " {\n";
  for (size_t d = 0; d < v.values.size(); ++d) os << "  " << d << " [label=" << quote(v.values[d]) << "];\n";
  for (size_t d = 0; d < g.adj.size(); ++d)
    for (const DtgEdge& e : g.adj[d])
      os << "  " << d << " -> " << e.to << " [label=" << quote(task.operators[e.op].name) << "];\n";
  os << "}\n";
  return os.str();
}

ExtendResult extend(const PbdPlan& pbd, int bi, int bj) {
  const BdpoPlan& p = pbd.plan;
  const FdrTask& task = p.task();
  ExtendResult res;
  res.cvars = block_conflict_vars(pbd, bi, bj);
  res.members = {bi};
  const int L = p.elems[bi].parent;

  std::vector<char> allowed(task.operators.size(), 1);
  for (size_t o = 0; o < task.operators.size(); ++o)
    for (int n : p.members(bj))
      if (p.nodes[n].kind == NodeKind::Op && !op_conflict_vars(task.operators[o], task.operators[p.nodes[n].op]).empty())
        allowed[o] = 0;
  auto ok = [&](int o) { return allowed[o] != 0; };
  std::map<int, DomainTransitionGraph> dtgs;
  auto safe = [&](int var, int from, int to) {
    auto it = dtgs.find(var);
    if (it == dtgs.end()) it = dtgs.emplace(var, build_dtg(task, var)).first;
    return safe_transition_exists(it->second, from, to, ok);
  };
  auto terminal = [](int e) { return e == kInitElem || e == kGoalElem; };
  const std::vector<int> witness = witness_nodes(p);

  for (;;) {
    const std::vector<int>& group = res.members;
    std::set<int> gnodes;
    for (int g : group) gnodes.insert(p.members(g).begin(), p.members(g).end());
    auto in_group = [&](int e) { return std::find(group.begin(), group.end(), e) != group.end(); };

    std::vector<int> preds, succs;
    for (int Z : p.elems[L].children) {
      if (in_group(Z)) continue;
      bool before_g = false, after_g = false;
      for (int m : group) {
        before_g = before_g || p.before(Z, m);
        after_g = after_g || p.before(m, Z);
      }
      if (before_g) preds.push_back(Z);
      if (after_g) succs.push_back(Z);
    }
    auto immediate = [&](const std::vector<int>& side, bool up) {
      std::vector<int> out;
      for (int Z : side) {
        bool direct = true;
        for (int W : side)
          if (W != Z && (up ? p.before(Z, W) : p.before(W, Z))) direct = false;
        if (direct) out.push_back(Z);
      }
      std::sort(out.begin(), out.end(), [&](int a, int b) { return p.first_position(a) < p.first_position(b); });
      return out;
    };

    State s = task.init;
    for (int n : witness) {
      bool is_pred = false;
      if (!gnodes.count(n))
        for (int m : gnodes) is_pred = is_pred || p.node_before(n, m);
      if (!is_pred) continue;
      const Operator& op = task.operators[p.nodes[n].op];
      if (!applicable(op, s)) throw InternalError("predecessors of the block do not form a valid prefix");
      s = apply(task, op, s);
    }

    std::map<int, std::set<int>> F;
    for (const CausalLink& l : p.links)
      if (gnodes.count(l.producer) && !gnodes.count(l.consumer)) F[l.fact.var].insert(l.fact.val);

    std::vector<int> S;
    for (int Z : immediate(preds, true)) {
      if (terminal(Z) || Z == bj || p.before(Z, bj)) continue;
      bool absorb = false;
      for (const CausalLink& l : p.links) {
        if (absorb || !p.contains(Z, l.producer) || !gnodes.count(l.consumer)) continue;
        auto it = F.find(l.fact.var);
        if (it == F.end()) continue;
        for (int target : it->second) absorb = absorb || !safe(l.fact.var, l.fact.val, target);
      }
      if (absorb) S.push_back(Z);
    }
    if (S.empty()) {
      for (int Z : immediate(succs, false)) {
        if (terminal(Z) || Z == bj || p.before(bj, Z)) continue;
        bool absorb = false;
        for (const CausalLink& l : p.links) {
          if (absorb || !gnodes.count(l.producer) || !p.contains(Z, l.consumer)) continue;
          absorb = !safe(l.fact.var, s[l.fact.var], l.fact.val);
        }
        if (absorb) S.push_back(Z);
      }
    }
    if (S.empty()) return res;

    std::vector<int> wanted = group;
    wanted.insert(wanted.end(), S.begin(), S.end());
    std::vector<int> grown = p.hull(L, wanted);
    if (std::find(grown.begin(), grown.end(), bj) != grown.end() ||
        std::any_of(grown.begin(), grown.end(), terminal))
      return res;
    for (int e : grown)
      if (!in_group(e)) res.absorbed.push_back(e);
    res.members = grown;
  }
}

}  // namespace cibs
