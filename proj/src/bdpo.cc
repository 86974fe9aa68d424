#include "cibs/bdpo.h"

#include <algorithm>
#include <climits>
#include <deque>
#include <functional>
#include <map>

namespace cibs {

namespace {

int order_key(const PlanNode& n) {
  if (n.kind == NodeKind::Init) return INT_MIN;
  if (n.kind == NodeKind::Goal) return INT_MAX;
  return n.position;
}

std::set<Fact> leaf_pre(const BdpoPlan& p, int node) {
  const PlanNode& n = p.nodes[node];
  std::set<Fact> out;
  if (n.kind == NodeKind::Op) return cons(p.task().operators[n.op]);
  if (n.kind == NodeKind::Goal)
    for (auto [v, d] : p.task().goal) out.insert({v, d});
  return out;
}

std::set<Fact> leaf_eff(const BdpoPlan& p, int node) {
  const PlanNode& n = p.nodes[node];
  std::set<Fact> out;
  if (n.kind == NodeKind::Op) return prod(p.task().operators[n.op]);
  if (n.kind == NodeKind::Init)
    for (int v = 0; v < p.task().num_vars(); ++v) out.insert({v, p.task().init[v]});
  return out;
}

}  // namespace

struct BdpoPlan::Derived {
  std::vector<std::vector<int>> members;
  std::vector<int> depth;
  std::vector<int> first_pos;
  std::vector<int> child_index;
  std::vector<BitMatrix> level;  // reachability among children, blocks only
  BitMatrix node_before;
  bool acyclic = true;
  std::multimap<int, const CausalLink*> links_in;
  mutable std::vector<std::unique_ptr<BlockSemantics>> sem;
};

BdpoPlan BdpoPlan::from_pop(const PartialOrderPlan& pop, const FdrTask& task) {
  BdpoPlan p;
  p.task_ = &task;
  p.nodes = pop.nodes;
  p.links = pop.links;
  p.orderings = pop.orderings;
  p.elems.push_back(Element{});
  for (size_t i = 0; i < pop.nodes.size(); ++i) {
    Element e;
    e.node = static_cast<int>(i);
    e.parent = kRootElem;
    p.elems[kRootElem].children.push_back(static_cast<int>(p.elems.size()));
    p.node_elem.push_back(static_cast<int>(p.elems.size()));
    p.elems.push_back(e);
  }
  return p;
}

const BdpoPlan::Derived& BdpoPlan::derived() const {
  if (cache_) return *cache_;
  auto d = std::make_shared<Derived>();
  const size_t E = elems.size();
  d->members.assign(E, {});
  d->depth.assign(E, 0);
  d->first_pos.assign(E, INT_MAX);
  d->child_index.assign(E, -1);
  d->level.assign(E, BitMatrix());
  d->sem.resize(E);

  std::function<void(int, int)> visit = [&](int e, int depth) {
    d->depth[e] = depth;
    const Element& el = elems[e];
    if (!el.is_block()) {
      d->members[e] = {el.node};
    } else {
      for (size_t i = 0; i < el.children.size(); ++i) {
        int c = el.children[i];
        d->child_index[c] = static_cast<int>(i);
        visit(c, depth + 1);
        d->members[e].insert(d->members[e].end(), d->members[c].begin(), d->members[c].end());
      }
      std::sort(d->members[e].begin(), d->members[e].end(),
                [&](int a, int b) { return order_key(nodes[a]) < order_key(nodes[b]); });
      d->level[e] = BitMatrix(el.children.size());
    }
    for (int n : d->members[e]) d->first_pos[e] = std::min(d->first_pos[e], order_key(nodes[n]));
  };
  visit(kRootElem, 0);

  auto alive_node = [&](int n) { return elems[node_elem[n]].alive; };
  auto lift = [&](int a, int b, int* A, int* B) {
    int ea = node_elem[a], eb = node_elem[b];
    while (d->depth[ea] > d->depth[eb]) ea = elems[ea].parent;
    while (d->depth[eb] > d->depth[ea]) eb = elems[eb].parent;
    while (elems[ea].parent != elems[eb].parent) {
      ea = elems[ea].parent;
      eb = elems[eb].parent;
    }
    *A = ea;
    *B = eb;
    return elems[ea].parent;
  };
  for (const auto& [e, _] : orderings) {
    if (!alive_node(e.first) || !alive_node(e.second)) continue;
    int A, B;
    int L = lift(e.first, e.second, &A, &B);
    d->level[L].set(d->child_index[A], d->child_index[B]);
  }
  {
    const auto& root = elems[kRootElem].children;
    BitMatrix& m = d->level[kRootElem];
    for (size_t i = 0; i < root.size(); ++i) {
      if (root[i] != kInitElem) m.set(d->child_index[kInitElem], i);
      if (root[i] != kGoalElem) m.set(i, d->child_index[kGoalElem]);
    }
  }
  d->node_before = BitMatrix(nodes.size());
  for (size_t e = 0; e < E; ++e) {
    if (!elems[e].alive || !elems[e].is_block()) continue;
    if (!d->level[e].close()) {
      d->acyclic = false;
      continue;
    }
    const auto& ch = elems[e].children;
    for (size_t i = 0; i < ch.size(); ++i)
      for (size_t j = 0; j < ch.size(); ++j)
        if (i != j && d->level[e].get(i, j))
          for (int x : d->members[ch[i]])
            for (int y : d->members[ch[j]]) d->node_before.set(x, y);
  }
  for (const CausalLink& l : links) d->links_in.insert({l.consumer, &l});
  cache_ = d;
  return *cache_;
}

bool BdpoPlan::acyclic() const { return derived().acyclic; }

bool BdpoPlan::node_before(int a, int b) const { return derived().node_before.get(a, b); }

bool BdpoPlan::elem_contains(int outer, int inner) const {
  for (int e = inner; e >= 0; e = elems[e].parent)
    if (e == outer) return true;
  return false;
}

bool BdpoPlan::contains(int e, int node) const { return elem_contains(e, node_elem[node]); }

bool BdpoPlan::before(int a, int b) const {
  if (elem_contains(a, b) || elem_contains(b, a)) return false;
  const auto& d = derived();
  if (d.members[a].empty() || d.members[b].empty()) return false;
  return d.node_before.get(d.members[a][0], d.members[b][0]);
}

const std::vector<int>& BdpoPlan::members(int e) const { return derived().members[e]; }

std::vector<int> BdpoPlan::op_nodes() const {
  std::vector<int> out;
  for (int n : members(kRootElem))
    if (nodes[n].kind == NodeKind::Op) out.push_back(n);
  return out;
}

size_t BdpoPlan::num_ops() const { return members(kRootElem).size() - 2; }

int BdpoPlan::depth(int e) const { return derived().depth[e]; }

int BdpoPlan::first_position(int e) const { return derived().first_pos[e]; }

int BdpoPlan::child_of(int block, int e) const {
  while (e >= 0 && elems[e].parent != block) e = elems[e].parent;
  return e;
}

int BdpoPlan::lca(int a_node, int b_node, int* A, int* B) const {
  const auto& d = derived();
  int ea = node_elem[a_node], eb = node_elem[b_node];
  while (d.depth[ea] > d.depth[eb]) ea = elems[ea].parent;
  while (d.depth[eb] > d.depth[ea]) eb = elems[eb].parent;
  if (ea == eb) return ea;
  while (elems[ea].parent != elems[eb].parent) {
    ea = elems[ea].parent;
    eb = elems[eb].parent;
  }
  if (A) *A = ea;
  if (B) *B = eb;
  return elems[ea].parent;
}

std::vector<int> BdpoPlan::blocks() const {
  std::vector<int> out;
  for (size_t e = 1; e < elems.size(); ++e)
    if (elems[e].alive && elems[e].is_block()) out.push_back(static_cast<int>(e));
  return out;
}

const BlockSemantics& BdpoPlan::sem(int e) const {
  const auto& d = derived();
  if (d.sem[e]) return *d.sem[e];
  auto s = std::make_unique<BlockSemantics>();
  const Element& el = elems[e];
  if (!el.is_block()) {
    s->pre = s->cons = leaf_pre(*this, el.node);
    s->eff = s->prod = leaf_eff(*this, el.node);
    if (nodes[el.node].kind == NodeKind::Op) s->del = del(task(), task().operators[nodes[el.node].op]);
  } else {
    const auto& mem = d.members[e];
    std::set<int> in(mem.begin(), mem.end());
    for (int c : mem) {
      for (const Fact& f : leaf_pre(*this, c)) {
        bool internal = false;
        auto [lo, hi] = d.links_in.equal_range(c);
        for (auto it = lo; it != hi && !internal; ++it)
          internal = it->second->fact == f && in.count(it->second->producer);
        if (!internal) s->pre.insert(f);
      }
    }
    std::vector<std::set<Fact>> effs(mem.size());
    for (size_t i = 0; i < mem.size(); ++i) effs[i] = leaf_eff(*this, mem[i]);
    for (size_t i = 0; i < mem.size(); ++i) {
      for (const Fact& f : effs[i]) {
        bool overwritten = false;
        for (size_t j = 0; j < mem.size() && !overwritten; ++j) {
          if (j == i || !d.node_before.get(mem[i], mem[j])) continue;
          for (const Fact& g : effs[j])
            if (g.var == f.var && g.val != f.val) overwritten = true;
        }
        if (!overwritten) s->eff.insert(f);
      }
    }
    s->cons = s->pre;
    std::map<int, std::set<int>> eff_vals, cons_vals;
    for (const Fact& f : s->eff) eff_vals[f.var].insert(f.val);
    for (const Fact& f : s->cons) cons_vals[f.var].insert(f.val);
    for (const Fact& f : s->eff)
      if (!s->cons.count(f) && eff_vals[f.var].size() == 1) s->prod.insert(f);
    for (const auto& [v, vals] : eff_vals) {
      auto cv = cons_vals.find(v);
      for (int val = 0; val < task().domain_size(v); ++val) {
        if (cv != cons_vals.end() && !cv->second.count(val)) continue;
        bool other = false;
        for (int w : vals) other = other || w != val;
        if (other) s->del.insert({v, val});
      }
    }
  }
  d.sem[e] = std::move(s);
  return *d.sem[e];
}

std::vector<std::pair<int, int>> BdpoPlan::level_basic_orderings(int block) const {
  const auto& d = derived();
  const auto& ch = elems[block].children;
  const BitMatrix& m = d.level[block];
  std::vector<std::pair<int, int>> out;
  for (size_t i = 0; i < ch.size(); ++i)
    for (size_t j = 0; j < ch.size(); ++j) {
      if (i == j || !m.get(i, j)) continue;
      bool implied = false;
      for (size_t k = 0; k < ch.size() && !implied; ++k)
        implied = k != i && k != j && m.get(i, k) && m.get(k, j);
      if (!implied) out.push_back({ch[i], ch[j]});
    }
  return out;
}

std::vector<int> BdpoPlan::hull(int block, const std::vector<int>& mem) const {
  const auto& d = derived();
  const auto& ch = elems[block].children;
  const BitMatrix& m = d.level[block];
  std::vector<size_t> idx;
  for (int x : mem) idx.push_back(static_cast<size_t>(d.child_index[x]));
  std::vector<int> out;
  for (size_t k = 0; k < ch.size(); ++k) {
    bool after = false, before_ = false;
    for (size_t i : idx) {
      after = after || i == k || m.get(i, k);
      before_ = before_ || i == k || m.get(k, i);
    }
    if (after && before_) out.push_back(ch[k]);
  }
  return out;
}

int BdpoPlan::final_producer(int e, Fact f) const {
  const auto& mem = members(e);
  int best = -1;
  for (int o : mem) {
    if (!leaf_eff(*this, o).count(f)) continue;
    bool overwritten = false;
    for (int o2 : mem) {
      if (o2 == o || !node_before(o, o2)) continue;
      for (const Fact& g : leaf_eff(*this, o2))
        if (g.var == f.var && g.val != f.val) overwritten = true;
    }
    if (!overwritten && (best < 0 || nodes[o].instance < nodes[best].instance)) best = o;
  }
  return best;
}

int64_t BdpoPlan::cost() const {
  int64_t c = 0;
  for (int n : op_nodes()) c += task().cost(nodes[n].op);
  return c;
}

std::string BdpoPlan::describe(int e) const {
  std::string s = elems[e].is_block() ? "{" : "";
  bool first = true;
  for (int n : members(e)) {
    if (!first) s += ", ";
    first = false;
    const PlanNode& pn = nodes[n];
    if (pn.kind == NodeKind::Init) s += "INIT";
    else if (pn.kind == NodeKind::Goal) s += "GOAL";
    else s += task().operators[pn.op].name;
  }
  if (elems[e].is_block()) s += "}";
  return s;
}

int BdpoPlan::add_block(const std::vector<int>& children) {
  if (children.size() < 2) return -1;
  const int parent = elems[children[0]].parent;
  for (int c : children)
    if (elems[c].parent != parent || !elems[c].alive) return -1;
  std::set<int> chosen(children.begin(), children.end());
  if (chosen.size() >= elems[parent].children.size()) return -1;
  const int id = static_cast<int>(elems.size());
  Element b;
  b.parent = parent;
  std::vector<int> rest;
  bool placed = false;
  for (int c : elems[parent].children) {
    if (chosen.count(c)) {
      b.children.push_back(c);
      if (!placed) rest.push_back(id);
      placed = true;
    } else {
      rest.push_back(c);
    }
  }
  elems.push_back(b);
  elems[parent].children = rest;
  for (int c : elems[id].children) elems[c].parent = id;
  touch();
  return id;
}

void BdpoPlan::dissolve(int block) {
  const int parent = elems[block].parent;
  std::vector<int> out;
  for (int c : elems[parent].children) {
    if (c == block) {
      for (int g : elems[block].children) {
        elems[g].parent = parent;
        out.push_back(g);
      }
    } else {
      out.push_back(c);
    }
  }
  elems[parent].children = out;
  elems[block].children.clear();
  elems[block].alive = false;
  touch();
}

void BdpoPlan::remove_element(int e) {
  std::set<int> gone;
  std::function<void(int)> kill = [&](int x) {
    elems[x].alive = false;
    if (!elems[x].is_block()) gone.insert(elems[x].node);
    for (int c : elems[x].children) kill(c);
  };
  kill(e);
  const int parent = elems[e].parent;
  auto& sib = elems[parent].children;
  sib.erase(std::remove(sib.begin(), sib.end(), e), sib.end());
  std::erase_if(links, [&](const CausalLink& l) { return gone.count(l.producer) || gone.count(l.consumer); });
  std::erase_if(orderings, [&](const auto& kv) { return gone.count(kv.first.first) || gone.count(kv.first.second); });
  touch();
  if (parent != kRootElem && sib.empty()) remove_element(parent);
}

int BdpoPlan::add_node(const PlanNode& node, int parent) {
  const int n = static_cast<int>(nodes.size());
  nodes.push_back(node);
  Element e;
  e.node = n;
  e.parent = parent;
  const int id = static_cast<int>(elems.size());
  elems.push_back(e);
  elems[parent].children.push_back(id);
  node_elem.push_back(id);
  touch();
  return n;
}

void BdpoPlan::dissolve_singletons() {
  for (int b : blocks())
    if (elems[b].alive && elems[b].children.size() == 1) dissolve(b);
}

std::optional<std::string> check_bdpo(const BdpoPlan& plan) {
  if (!plan.acyclic()) return "ordering cycle";
  const auto& all = plan.members(kRootElem);
  std::map<std::pair<int, Fact>, int> supply;
  for (const CausalLink& l : plan.links) {
    if (!plan.elems[plan.node_elem[l.producer]].alive || !plan.elems[plan.node_elem[l.consumer]].alive)
      return "link touches a removed node";
    ++supply[{l.consumer, l.fact}];
  }
  for (int c : all)
    for (const Fact& f : plan.sem(plan.node_elem[c]).pre) {
      int k = supply.count({c, f}) ? supply[{c, f}] : 0;
      if (k != 1)
        return plan.describe(plan.node_elem[c]) + " has " + std::to_string(k) + " links for " +
               fact_name(plan.task(), f);
    }
  for (const CausalLink& l : plan.links) {
    const Fact f = l.fact;
    const std::string what = plan.describe(plan.node_elem[l.producer]) + " -> " +
                             plan.describe(plan.node_elem[l.consumer]) + " (" + fact_name(plan.task(), f) + ")";
    if (!plan.sem(plan.node_elem[l.producer]).prod.count(f)) return "producer does not achieve " + what;
    if (!plan.sem(plan.node_elem[l.consumer]).pre.count(f)) return "consumer does not need " + what;
    int P = -1, C = -1;
    const int L = plan.lca(l.producer, l.consumer, &P, &C);
    if (!plan.before(P, C)) return "unordered link " + what;
    for (int X : plan.elems[L].children) {
      if (X == P || X == C) continue;
      if (!plan.before(X, P) && !plan.before(C, X) && plan.sem(X).del.count(f))
        return plan.describe(X) + " threatens " + what;
    }
    for (int u = plan.node_elem[l.producer]; u != P; u = plan.elems[u].parent)
      for (int Y : plan.elems[plan.elems[u].parent].children)
        if (Y != u && !plan.before(Y, u) && plan.sem(Y).del.count(f))
          return plan.describe(Y) + " threatens " + what + " inside the producer block";
    for (int u = plan.node_elem[l.consumer]; u != C; u = plan.elems[u].parent)
      for (int Y : plan.elems[plan.elems[u].parent].children)
        if (Y != u && !plan.before(u, Y) && plan.sem(Y).del.count(f))
          return plan.describe(Y) + " threatens " + what + " inside the consumer block";
  }
  return std::nullopt;
}

Rational flex(const BdpoPlan& plan) {
  const auto ops = plan.op_nodes();
  const int64_t m = static_cast<int64_t>(ops.size());
  if (m < 2) throw std::domain_error("flex needs at least two operators");
  int64_t unordered = 0;
  for (size_t i = 0; i < ops.size(); ++i)
    for (size_t j = i + 1; j < ops.size(); ++j)
      if (!plan.node_before(ops[i], ops[j]) && !plan.node_before(ops[j], ops[i])) ++unordered;
  return Rational::make(unordered, m * (m - 1) / 2);
}

int earliest_candidate_producer(const BdpoPlan& plan, Fact f, int consumer, int ignore) {
  for (int c = consumer; c != kRootElem; c = plan.elems[c].parent) {
    const int L = plan.elems[c].parent;
    std::vector<int> cands;
    for (int Z : plan.elems[L].children) {
      if (Z == c || Z == ignore || !plan.sem(Z).prod.count(f) || plan.before(c, Z)) continue;
      bool blocked = false;
      for (int K : plan.elems[L].children) {
        if (K == Z || K == c || K == ignore) continue;
        if (plan.before(Z, K) && plan.before(K, c) && plan.sem(K).del.count(f)) blocked = true;
      }
      if (!blocked) cands.push_back(Z);
    }
    int best = -1;
    for (int Z : cands) {
      bool dominated = false;
      for (int Z2 : cands) dominated = dominated || (Z2 != Z && plan.before(Z2, Z));
      if (dominated) continue;
      if (best < 0 || plan.first_position(Z) < plan.first_position(best)) best = Z;
    }
    if (best >= 0) return best;
  }
  return -1;
}

namespace {

bool is_terminal(int e) { return e == kInitElem || e == kGoalElem; }

/// Siblings reachable from `from` by repeatedly following basic level edges
/// in one direction, nearest first.
std::vector<int> bfs_level(const BdpoPlan& p, int from, bool upward) {
  const int L = p.elems[from].parent;
  auto edges = p.level_basic_orderings(L);
  std::vector<int> out;
  std::set<int> seen{from};
  std::deque<int> q{from};
  while (!q.empty()) {
    int x = q.front();
    q.pop_front();
    std::vector<int> next;
    for (auto [a, b] : edges) {
      if (upward && b == x) next.push_back(a);
      if (!upward && a == x) next.push_back(b);
    }
    std::sort(next.begin(), next.end(),
              [&](int a, int b) { return upward ? p.first_position(a) > p.first_position(b)
                                                : p.first_position(a) < p.first_position(b); });
    for (int y : next)
      if (seen.insert(y).second) {
        out.push_back(y);
        q.push_back(y);
      }
  }
  return out;
}

void drop_reason(BdpoPlan& p, int X, int Y, const Reason& r) {
  const std::set<int> xs(p.members(X).begin(), p.members(X).end());
  const std::set<int> ys(p.members(Y).begin(), p.members(Y).end());
  for (auto it = p.orderings.begin(); it != p.orderings.end();) {
    if (xs.count(it->first.first) && ys.count(it->first.second)) {
      it->second.erase(r);
      if (it->second.empty()) {
        it = p.orderings.erase(it);
        continue;
      }
    }
    ++it;
  }
  p.touch();
}

std::set<Reason> reasons_between(const BdpoPlan& p, int X, int Y) {
  std::set<int> xs(p.members(X).begin(), p.members(X).end());
  std::set<int> ys(p.members(Y).begin(), p.members(Y).end());
  std::set<Reason> out;
  for (const auto& [e, rs] : p.orderings)
    if (xs.count(e.first) && ys.count(e.second)) out.insert(rs.begin(), rs.end());
  return out;
}

void resource_link(BdpoPlan& p, CausalLink& l, int producer) {
  auto it = p.orderings.find({l.producer, l.consumer});
  if (it != p.orderings.end()) {
    it->second.erase({ReasonKind::PC, l.fact});
    if (it->second.empty()) p.orderings.erase(it);
  }
  l.producer = producer;
  p.orderings[{producer, l.consumer}].insert({ReasonKind::PC, l.fact});
  p.touch();
}

/// Candidate plans in which reason r no longer orders X before Y.
std::vector<BdpoPlan> rule_candidates(const BdpoPlan& T, int X, int Y, const Reason& r) {
  std::vector<BdpoPlan> out;
  const Fact f = r.fact;
  const std::set<int> xs(T.members(X).begin(), T.members(X).end());
  const std::set<int> ys(T.members(Y).begin(), T.members(Y).end());
  const int L = T.elems[X].parent;
  auto plain_drop = [&] {
    BdpoPlan U = T;
    drop_reason(U, X, Y, r);
    out.push_back(std::move(U));
  };

  if (r.kind == ReasonKind::PC) {
    bool linked = false;
    for (const CausalLink& l : T.links) linked = linked || (l.fact == f && xs.count(l.producer) && ys.count(l.consumer));
    if (!linked) plain_drop();
    // Each earlier consumer alone, preceded by all earlier consumers sharing
    // one producer.
    std::vector<std::vector<int>> groups;
    std::map<int, std::vector<int>> by_producer;
    std::vector<int> producers;
    for (int Z : bfs_level(T, X, true)) {
      if (is_terminal(Z) || !T.sem(Z).cons.count(f)) continue;
      groups.push_back({Z});
      for (const CausalLink& l : T.links)
        if (l.fact == f && T.contains(Z, l.consumer) && !T.contains(Z, l.producer)) {
          if (!by_producer.count(l.producer)) producers.push_back(l.producer);
          by_producer[l.producer].push_back(Z);
        }
    }
    for (auto it = producers.rbegin(); it != producers.rend(); ++it)
      if (by_producer[*it].size() > 1) groups.insert(groups.begin(), by_producer[*it]);
    for (const auto& group : groups) {
      const int Z = group.back();
      std::vector<int> wanted = group;
      wanted.push_back(X);
      BdpoPlan U = T;
      int H = U.add_block(U.hull(L, wanted));
      if (H < 0) continue;
      int producer = -1;
      for (const CausalLink& l : U.links)
        if (l.fact == f && U.contains(Z, l.consumer) && !U.contains(H, l.producer) &&
            (producer < 0 || order_key(U.nodes[l.producer]) < order_key(U.nodes[producer])))
          producer = l.producer;
      if (producer < 0) continue;
      for (CausalLink& l : U.links)
        if (l.fact == f && xs.count(l.producer) && ys.count(l.consumer)) resource_link(U, l, producer);
      std::sort(U.links.begin(), U.links.end());
      if (!U.sem(H).pre.count(f)) continue;
      drop_reason(U, X, Y, r);
      out.push_back(std::move(U));
    }
  } else if (r.kind == ReasonKind::CD) {
    if (!T.sem(X).cons.count(f) || !T.sem(Y).del.count(f)) {
      plain_drop();
      return out;
    }
    for (int Z : bfs_level(T, X, true)) {
      if (is_terminal(Z) || !T.sem(Z).prod.count(f)) continue;
      BdpoPlan U = T;
      int H = U.add_block(U.hull(L, {Z, X}));
      if (H < 0) continue;
      const int fp = U.final_producer(Z, f);
      if (fp < 0) continue;
      for (CausalLink& l : U.links)
        if (l.fact == f && xs.count(l.consumer) && !xs.count(l.producer)) resource_link(U, l, fp);
      std::sort(U.links.begin(), U.links.end());
      if (U.sem(H).cons.count(f)) continue;
      drop_reason(U, X, Y, r);
      out.push_back(std::move(U));
    }
    for (int Z : bfs_level(T, Y, false)) {
      if (is_terminal(Z) || !T.sem(Z).prod.count(f)) continue;
      BdpoPlan U = T;
      int H = U.add_block(U.hull(L, {Y, Z}));
      if (H < 0 || U.sem(H).del.count(f)) continue;
      drop_reason(U, X, Y, r);
      out.push_back(std::move(U));
    }
  } else if (r.kind == ReasonKind::DP) {
    std::vector<int> group{Y};
    for (const CausalLink& l : T.links) {
      if (l.fact != f || !ys.count(l.producer) || ys.count(l.consumer)) continue;
      int C = T.child_of(L, T.node_elem[l.consumer]);
      if (C < 0 || is_terminal(C)) return out;
      group.push_back(C);
    }
    if (group.size() == 1 || !T.sem(X).del.count(f)) {
      plain_drop();
      return out;
    }
    BdpoPlan U = T;
    auto h = U.hull(L, group);
    if (std::find(h.begin(), h.end(), X) != h.end()) return out;
    if (U.add_block(h) < 0) return out;
    drop_reason(U, X, Y, r);
    out.push_back(std::move(U));
  }
  return out;
}

/// Depth-first search over rule applications until the elements holding x0
/// and y0 at their common level are unordered. One reason is eliminated per
/// step; once blocks form around the pair the search continues on them.
std::optional<BdpoPlan> eliminate(const BdpoPlan& T, int x0, int y0, const Rational& base, int depth, int& budget) {
  if (--budget < 0) return std::nullopt;
  int X = -1, Y = -1;
  T.lca(x0, y0, &X, &Y);
  if (!T.before(X, Y)) {
    if (is_valid_bdpo(T) && flex(T) > base) return T;
    return std::nullopt;
  }
  if (depth > static_cast<int>(2 * T.nodes.size())) return std::nullopt;
  const auto reasons = reasons_between(T, X, Y);
  if (reasons.empty()) return std::nullopt;
  const Reason r = *reasons.begin();
  if (r.kind == ReasonKind::Anchor) return std::nullopt;
  for (BdpoPlan& U : rule_candidates(T, X, Y, r)) {
    if (!is_valid_bdpo(U)) continue;
    if (auto res = eliminate(U, x0, y0, base, depth + 1, budget)) return res;
    if (budget < 0) break;
  }
  return std::nullopt;
}

std::optional<BdpoPlan> try_remove(const BdpoPlan& S, int X0, int Y0) {
  int budget = 256;
  return eliminate(S, S.members(X0).front(), S.members(Y0).front(), flex(S), 0, budget);
}

}  // namespace

BdpoPlan block_deorder(const PartialOrderPlan& pop, const FdrTask& task, DeorderStats* stats) {
  BdpoPlan cur = BdpoPlan::from_pop(pop, task);
  if (cur.num_ops() < 2) return cur;
  for (;;) {
    std::vector<std::pair<int, int>> edges;
    for (int L : std::vector<int>{kRootElem})
      for (auto e : cur.level_basic_orderings(L)) edges.push_back(e);
    for (int b : cur.blocks())
      for (auto e : cur.level_basic_orderings(b)) edges.push_back(e);
    std::erase_if(edges, [](auto e) { return is_terminal(e.first) || is_terminal(e.second); });
    std::sort(edges.begin(), edges.end(), [&](auto a, auto b) {
      return std::pair(cur.first_position(a.first), cur.first_position(a.second)) <
             std::pair(cur.first_position(b.first), cur.first_position(b.second));
    });
    bool progress = false;
    for (auto [X, Y] : edges) {
      if (stats) ++stats->attempts;
      if (auto next = try_remove(cur, X, Y)) {
        cur = std::move(*next);
        if (stats) ++stats->removed;
        progress = true;
        break;
      }
    }
    if (!progress) break;
  }
  cur.dissolve_singletons();
  return cur;
}

namespace {

/// Children of a block in the order the witness linearization visits them.
std::vector<int> level_order(const BdpoPlan& p, int block) {
  std::vector<int> rest = p.elems[block].children, out;
  while (!rest.empty()) {
    int pick = -1;
    for (int c : rest) {
      bool ready = true;
      for (int o : rest) ready = ready && (o == c || !p.before(o, c));
      if (ready && (pick < 0 || p.first_position(c) < p.first_position(pick))) pick = c;
    }
    if (pick < 0) throw InternalError("ordering cycle");
    out.push_back(pick);
    rest.erase(std::find(rest.begin(), rest.end(), pick));
  }
  return out;
}

void emit(const BdpoPlan& p, int e, std::vector<int>& out) {
  const Element& el = p.elems[e];
  if (!el.is_block()) {
    if (p.nodes[el.node].kind == NodeKind::Op) out.push_back(el.node);
    return;
  }
  for (int c : level_order(p, e)) emit(p, c, out);
}

}  // namespace

std::vector<int> witness_nodes(const BdpoPlan& plan) {
  std::vector<int> out;
  emit(plan, kRootElem, out);
  return out;
}

SequentialPlan witness_linearization(const BdpoPlan& plan) {
  SequentialPlan out;
  for (int n : witness_nodes(plan)) out.steps.push_back({plan.nodes[n].instance, plan.nodes[n].op});
  return out;
}

PartialOrderPlan expand(const BdpoPlan& plan, bool order_blocks) {
  PartialOrderPlan pop;
  std::vector<int> index(plan.nodes.size(), -1);
  std::vector<int> keep;
  for (int n : plan.members(kRootElem))
    if (plan.nodes[n].kind == NodeKind::Init) index[n] = 0;
    else if (plan.nodes[n].kind == NodeKind::Goal) index[n] = 1;
  pop.nodes.push_back(plan.nodes[plan.elems[kInitElem].node]);
  pop.nodes.push_back(plan.nodes[plan.elems[kGoalElem].node]);
  for (int n : plan.op_nodes()) {
    index[n] = static_cast<int>(pop.nodes.size());
    pop.nodes.push_back(plan.nodes[n]);
    keep.push_back(n);
  }

  const size_t m = keep.size();
  BitMatrix rel(m);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j)
      if (plan.node_before(keep[i], keep[j])) rel.set(i, j);
  if (order_blocks) {
    std::vector<int> rank(plan.nodes.size(), 0);
    SequentialPlan w = witness_linearization(plan);
    std::map<int, int> by_instance;
    for (size_t k = 0; k < w.steps.size(); ++k) by_instance[w.steps[k].instance] = static_cast<int>(k);
    for (int n : keep) rank[n] = by_instance[plan.nodes[n].instance];
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < m; ++j) {
        if (i == j || rel.get(i, j) || rel.get(j, i)) continue;
        int A = -1, B = -1;
        plan.lca(keep[i], keep[j], &A, &B);
        bool compound = plan.elems[A].is_block() || plan.elems[B].is_block();
        if (compound && rank[keep[i]] < rank[keep[j]]) rel.set(i, j);
      }
    rel.close();
  }

  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j) {
      if (!rel.get(i, j)) continue;
      bool implied = false;
      for (size_t k = 0; k < m && !implied; ++k) implied = k != i && k != j && rel.get(i, k) && rel.get(k, j);
      if (implied) continue;
      int A = -1, B = -1;
      plan.lca(keep[i], keep[j], &A, &B);
      std::set<Reason> rs;
      for (const auto& [e, r] : plan.orderings) {
        if (!plan.contains(A, e.first) || !plan.contains(B, e.second)) continue;
        rs.insert(r.begin(), r.end());
      }
      pop.orderings[{index[keep[i]], index[keep[j]]}] = rs;
    }
  for (const CausalLink& l : plan.links) {
    if (index[l.producer] < 0 || index[l.consumer] < 0) continue;
    pop.links.push_back({index[l.producer], index[l.consumer], l.fact});
  }
  std::sort(pop.links.begin(), pop.links.end());
  return pop;
}

}  // namespace cibs
