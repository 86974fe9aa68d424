#include "cibs/concurrency.h"

#include <algorithm>
#include <functional>

namespace cibs {

std::set<int> op_conflict_vars(const Operator& a, const Operator& b) {
  std::set<int> out;
  auto differ = [&](const PartialState& x, const PartialState& y) {
    for (auto [v, d] : x) {
      auto it = y.find(v);
      if (it != y.end() && it->second != d) out.insert(v);
    }
  };
  differ(a.pre, b.pre);
  differ(a.eff, b.eff);
  differ(a.pre, b.eff);
  differ(b.pre, a.eff);
  return out;
}

PbdPlan make_pbd(BdpoPlan plan) {
  PbdPlan pbd{std::move(plan), {}};
  refresh_nonconcurrency(pbd);
  return pbd;
}

void refresh_nonconcurrency(PbdPlan& pbd) {
  const BdpoPlan& p = pbd.plan;
  const auto ops = p.op_nodes();
  const std::set<int> alive(ops.begin(), ops.end());
  std::erase_if(pbd.nc, [&](const auto& kv) { return !alive.count(kv.first.first) || !alive.count(kv.first.second); });
  std::set<int> covered;
  for (const auto& [k, _] : pbd.nc) {
    covered.insert(k.first);
    covered.insert(k.second);
  }
  // A node with no stored pair may simply be conflict free, so recheck every
  // pair that has an uncovered end.
  for (size_t i = 0; i < ops.size(); ++i)
    for (size_t j = i + 1; j < ops.size(); ++j) {
      int a = std::min(ops[i], ops[j]), b = std::max(ops[i], ops[j]);
      if (covered.count(a) && covered.count(b)) continue;
      auto vars = op_conflict_vars(p.task().operators[p.nodes[a].op], p.task().operators[p.nodes[b].op]);
      if (!vars.empty()) pbd.nc[{a, b}] = std::move(vars);
    }
}

std::set<int> block_conflict_vars(const PbdPlan& pbd, int a, int b) {
  const BdpoPlan& p = pbd.plan;
  if (p.elem_contains(a, b) || p.elem_contains(b, a)) throw std::invalid_argument("elements overlap");
  std::set<int> out;
  for (int x : p.members(a))
    for (int y : p.members(b)) {
      auto it = pbd.nc.find({std::min(x, y), std::max(x, y)});
      if (it != pbd.nc.end()) out.insert(it->second.begin(), it->second.end());
    }
  return out;
}

namespace {

bool terminal(int e) { return e == kInitElem || e == kGoalElem; }

/// Memoised conflict test between sibling elements.
class LevelConflicts {
 public:
  explicit LevelConflicts(const PbdPlan& pbd) : pbd_(pbd) {}
  bool conflict(int a, int b) {
    auto key = std::minmax(a, b);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    return memo_[key] = !block_conflict_vars(pbd_, a, b).empty();
  }
  /// Operator nodes x, y are concurrent: unordered, and the children of their
  /// common block holding them do not conflict.
  bool concurrent(int x, int y) {
    const BdpoPlan& p = pbd_.plan;
    if (p.node_before(x, y) || p.node_before(y, x)) return false;
    int A = -1, B = -1;
    p.lca(x, y, &A, &B);
    return !conflict(A, B);
  }

 private:
  const PbdPlan& pbd_;
  std::map<std::pair<int, int>, bool> memo_;
};

}  // namespace

std::vector<std::pair<int, int>> necessary_nonconcurrency(const PbdPlan& pbd) {
  const BdpoPlan& p = pbd.plan;
  std::vector<int> levels{kRootElem};
  for (int b : p.blocks()) levels.push_back(b);
  LevelConflicts lc(pbd);
  std::vector<std::pair<int, int>> out;
  for (int L : levels) {
    const auto& ch = p.elems[L].children;
    for (size_t i = 0; i < ch.size(); ++i)
      for (size_t j = i + 1; j < ch.size(); ++j) {
        int a = ch[i], b = ch[j];
        if (terminal(a) || terminal(b) || p.before(a, b) || p.before(b, a)) continue;
        if (!lc.conflict(a, b)) continue;
        if (p.first_position(b) < p.first_position(a)) std::swap(a, b);
        out.push_back({a, b});
      }
  }
  std::sort(out.begin(), out.end(), [&](auto x, auto y) {
    return std::pair(p.first_position(x.first), p.first_position(x.second)) <
           std::pair(p.first_position(y.first), p.first_position(y.second));
  });
  return out;
}

Rational cflex(const PbdPlan& pbd) {
  const auto ops = pbd.plan.op_nodes();
  const int64_t m = static_cast<int64_t>(ops.size());
  if (m < 2) throw std::domain_error("cflex needs at least two operators");
  LevelConflicts lc(pbd);
  int64_t free_pairs = 0;
  for (size_t i = 0; i < ops.size(); ++i)
    for (size_t j = i + 1; j < ops.size(); ++j)
      if (lc.concurrent(ops[i], ops[j])) ++free_pairs;
  return Rational::make(free_pairs, m * (m - 1) / 2);
}

std::optional<bool> parallel_soundness_oracle(const PbdPlan& pbd, size_t bound) {
  const BdpoPlan& p = pbd.plan;
  const FdrTask& task = p.task();
  const auto ops = p.op_nodes();
  const size_t m = ops.size();
  if (m > bound || m > 30) return std::nullopt;
  using Mask = uint32_t;
  const Mask full = m == 32 ? ~Mask{0} : (Mask{1} << m) - 1;

  std::vector<Mask> preds(m, 0);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j)
      if (p.node_before(ops[j], ops[i])) preds[i] |= Mask{1} << j;
  std::vector<Mask> block_masks;
  for (int b : p.blocks()) {
    Mask bm = 0;
    for (size_t i = 0; i < m; ++i)
      if (p.contains(b, ops[i])) bm |= Mask{1} << i;
    block_masks.push_back(bm);
  }
  auto op_of = [&](size_t i) -> const Operator& { return task.operators[p.nodes[ops[i]].op]; };

  std::map<std::pair<Mask, State>, bool> memo;
  std::function<bool(Mask, const State&)> completable = [&](Mask done, const State& s) -> bool {
    if (done == full) return satisfies(s, task.goal);
    auto key = std::pair(done, s);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    bool ok = false;
    for (size_t i = 0; i < m && !ok; ++i) {
      if ((done >> i) & 1 || (preds[i] & ~done) || !applicable(op_of(i), s)) continue;
      ok = completable(done | Mask{1} << i, apply(task, op_of(i), s));
    }
    return memo[key] = ok;
  };

  LevelConflicts lc(pbd);
  std::set<std::pair<Mask, State>> seen;
  std::function<bool(Mask, const State&)> explore = [&](Mask done, const State& s) -> bool {
    if (!seen.insert({done, s}).second) return true;
    std::vector<size_t> enabled;
    for (size_t i = 0; i < m; ++i)
      if (!((done >> i) & 1) && !(preds[i] & ~done) && applicable(op_of(i), s)) enabled.push_back(i);
    for (size_t a = 0; a < enabled.size(); ++a)
      for (size_t b = a + 1; b < enabled.size(); ++b) {
        size_t i = enabled[a], j = enabled[b];
        if (!lc.concurrent(ops[i], ops[j])) continue;
        State s1 = apply(task, op_of(i), s);
        State s2 = apply(task, op_of(j), s);
        if (!applicable(op_of(j), s1) || !applicable(op_of(i), s2)) return false;
        State sij = apply(task, op_of(j), s1);
        if (sij != apply(task, op_of(i), s2)) return false;
        if (!completable(done | Mask{1} << i | Mask{1} << j, sij)) return false;
      }
    for (size_t i : enabled) {
      const Mask next = done | Mask{1} << i;
      bool legal = true;
      for (Mask bm : block_masks) {
        bool open = (done & bm) && (~done & bm);
        if (open && !((bm >> i) & 1)) legal = false;
      }
      if (legal && !explore(next, apply(task, op_of(i), s))) return false;
    }
    return true;
  };
  return explore(0, task.init);
}

}  // namespace cibs
