#include "cibs/report.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace cibs {

using json = nlohmann::json;

std::optional<Phase> parse_phase(const std::string& s) {
  if (s == "validate") return Phase::Validate;
  if (s == "eog") return Phase::Eog;
  if (s == "bd") return Phase::Bd;
  if (s == "cibs") return Phase::Cibs;
  return std::nullopt;
}

std::string phase_name(Phase p) {
  switch (p) {
    case Phase::Validate: return "validate";
    case Phase::Eog: return "eog";
    case Phase::Bd: return "bd";
    case Phase::Cibs: return "cibs";
  }
  return "?";
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

PhaseMetrics measure(const std::string& name, const PbdPlan& pbd, double seconds, bool valid,
                     const PipelineOptions& opts) {
  PhaseMetrics m;
  m.name = name;
  m.n_ops = pbd.plan.num_ops();
  m.cost = pbd.plan.cost();
  if (m.n_ops >= 2) {
    m.flex = flex(pbd.plan);
    m.cflex = cflex(pbd);
  }
  m.seconds = seconds;
  m.valid = valid;
  if (opts.oracle_bound > 0) m.oracle = parallel_soundness_oracle(pbd, opts.oracle_bound);
  return m;
}

bool bdpo_sound(const BdpoPlan& p) { return is_valid_bdpo(p) && is_valid_pop(expand(p, true), p.task()); }

json rational_json(const std::optional<Rational>& r) {
  if (!r) return nullptr;
  return {{"num", r->num}, {"den", r->den}, {"value", r->value()}};
}

std::string fmt(const std::optional<Rational>& r) {
  if (!r) return "n/a";
  std::ostringstream os;
  os << r->str() << " (" << std::fixed << std::setprecision(4) << r->value() << ")";
  return os.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

PipelineReport run_pipeline(const FdrTask& task, const SequentialPlan& plan, const PipelineOptions& opts) {
  PipelineReport r;
  const ValidationReport vr = validate_sequential(plan, task);
  r.plan_valid = vr.valid;
  r.input_cost = vr.cost;
  if (!vr.valid) {
    r.validation = vr.reason;
    return r;
  }
  if (opts.phase == Phase::Validate) return r;

  auto t = Clock::now();
  const PartialOrderPlan pop = eog(plan, task);
  PbdPlan pbd = make_pbd(BdpoPlan::from_pop(pop, task));
  r.phases.push_back(measure("eog", pbd, since(t), is_valid_pop(pop, task), opts));
  if (opts.phase == Phase::Eog) {
    r.result = std::move(pbd);
    return r;
  }

  t = Clock::now();
  pbd = make_pbd(block_deorder(pop, task, &r.deorder));
  r.phases.push_back(measure("bd", pbd, since(t), bdpo_sound(pbd.plan), opts));
  if (opts.phase == Phase::Bd) {
    r.result = std::move(pbd);
    return r;
  }

  t = Clock::now();
  if (pbd.plan.num_ops() >= 2) {
    ScResult sc = substitution_for_concurrency(pbd, opts.planner);
    r.attempts = std::move(sc.attempts);
    r.accepted = sc.accepted;
    pbd = std::move(sc.plan);
  }
  r.phases.push_back(measure("sc", pbd, since(t), bdpo_sound(pbd.plan), opts));
  r.result = std::move(pbd);
  return r;
}

std::string report_text(const PipelineReport& r) {
  std::ostringstream os;
  if (!r.plan_valid) {
    os << "invalid: " << r.validation << "\n";
    return os.str();
  }
  os << "valid, cost " << r.input_cost << "\n";
  for (const PhaseMetrics& m : r.phases) {
    os << m.name << ": ops " << m.n_ops << ", cost " << m.cost << ", flex " << fmt(m.flex) << ", cflex "
       << fmt(m.cflex) << (m.valid ? "" : ", INVALID");
    if (m.oracle) os << ", oracle " << (*m.oracle ? "sound" : "UNSOUND");
    os << "\n";
  }
  if (!r.attempts.empty())
    os << "substitutions: " << r.accepted << " accepted of " << r.attempts.size() << " attempts\n";
  return os.str();
}

namespace {

json report_object(const PipelineReport& r, bool with_timing) {
  json j;
  j["report_version"] = 1;
  j["plan_valid"] = r.plan_valid;
  j["input_cost"] = r.input_cost;
  if (!r.plan_valid) j["validation_error"] = r.validation;
  json phases = json::array();
  for (const PhaseMetrics& m : r.phases) {
    json p;
    p["phase"] = m.name;
    p["n_ops"] = m.n_ops;
    p["cost"] = m.cost;
    p["flex"] = rational_json(m.flex);
    p["cflex"] = rational_json(m.cflex);
    if (m.flex && m.cflex && m.flex->num != 0) p["cflex_over_flex"] = m.cflex->value() / m.flex->value();
    else p["cflex_over_flex"] = nullptr;
    p["valid"] = m.valid;
    p["oracle"] = m.oracle ? json(*m.oracle) : json(nullptr);
    if (with_timing) p["seconds"] = m.seconds;
    phases.push_back(p);
  }
  j["phases"] = phases;
  j["deorder"] = {{"removed", r.deorder.removed}, {"attempts", r.deorder.attempts}};
  json attempts = json::array();
  for (const ScAttempt& a : r.attempts)
    attempts.push_back({{"replaced", a.first},
                        {"partner", a.second},
                        {"success", a.success},
                        {"cflex_after", rational_json(a.cflex_after)},
                        {"trace", a.trace}});
  j["substitution"] = {{"accepted", r.accepted}, {"attempts", attempts}};
  return j;
}

}  // namespace

std::string report_json(const PipelineReport& r, bool with_timing) {
  return report_object(r, with_timing).dump(2) + "\n";
}

std::string plan_json(const PbdPlan& pbd) {
  const BdpoPlan& p = pbd.plan;
  const FdrTask& task = p.task();
  auto node_name = [&](int n) {
    const PlanNode& pn = p.nodes[n];
    if (pn.kind == NodeKind::Init) return std::string("INIT");
    if (pn.kind == NodeKind::Goal) return std::string("GOAL");
    return task.operators[pn.op].name;
  };
  json j;
  j["report_version"] = 1;
  json nodes = json::array();
  for (int n : p.members(kRootElem))
    nodes.push_back({{"id", n}, {"name", node_name(n)}, {"instance", p.nodes[n].instance}});
  j["nodes"] = nodes;
  json ords = json::array();
  for (const auto& [e, rs] : p.orderings) {
    json reasons = json::array();
    for (const Reason& r : rs) {
      json rj = {{"kind", reason_kind_name(r.kind)}};
      if (r.kind != ReasonKind::Anchor) rj["fact"] = fact_name(task, r.fact);
      reasons.push_back(rj);
    }
    ords.push_back({{"from", e.first}, {"to", e.second}, {"reasons", reasons}});
  }
  j["orderings"] = ords;
  json links = json::array();
  for (const CausalLink& l : p.links)
    links.push_back({{"producer", l.producer}, {"consumer", l.consumer}, {"fact", fact_name(task, l.fact)}});
  j["links"] = links;
  json blocks = json::array();
  for (int b : p.blocks()) {
    int parent = p.elems[b].parent;
    blocks.push_back({{"id", b}, {"parent", parent == kRootElem ? json(nullptr) : json(parent)}, {"nodes", p.members(b)}});
  }
  j["blocks"] = blocks;
  json nc = json::array();
  for (const auto& [k, vars] : pbd.nc) {
    std::vector<std::string> names;
    for (int v : vars) names.push_back(task.variables[v].name);
    nc.push_back({{"a", k.first}, {"b", k.second}, {"vars", names}});
  }
  j["nonconcurrency"] = nc;
  return j.dump(2) + "\n";
}

std::vector<std::pair<std::string, std::string>> parse_manifest(const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path base = fs::path(path).parent_path();
  std::istringstream in(slurp(path));
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string task, plan;
    if (!(ls >> task) || task[0] == '#') continue;
    if (!(ls >> plan)) throw std::runtime_error("manifest line without plan: " + line);
    auto resolve = [&](const std::string& s) { return fs::path(s).is_absolute() ? s : (base / s).string(); };
    out.push_back({resolve(task), resolve(plan)});
  }
  return out;
}

BatchReport run_batch(const std::vector<std::pair<std::string, std::string>>& pairs, const PipelineOptions& opts,
                      int parallel) {
  BatchReport b;
  b.rows.resize(pairs.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i; (i = next++) < pairs.size();) {
      BatchRow& row = b.rows[i];
      row.task = pairs[i].first;
      row.plan = pairs[i].second;
      try {
        const FdrTask task = parse_sas(slurp(row.task));
        const SequentialPlan plan = parse_plan(slurp(row.plan), task);
        row.report = run_pipeline(task, plan, opts);
        row.report.result.reset();
        row.ok = row.report.plan_valid;
        if (!row.ok) row.error = "invalid plan: " + row.report.validation;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int k = 0; k < std::max(1, parallel); ++k) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  for (BatchRow& row : b.rows) {
    if (!row.ok) continue;
    if (b.phases.empty())
      for (const auto& m : row.report.phases) b.phases.push_back(m.name);
    std::vector<double> vals;
    for (const auto& m : row.report.phases)
      if (m.cflex) vals.push_back(m.cflex->value());
    if (vals.empty() || vals.size() != row.report.phases.size()) continue;
    const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    for (double v : vals) row.normalized.push_back(*hi == *lo ? 1.0 : (v - *lo) / (*hi - *lo));
    const auto& ph = row.report.phases;
    if (ph.size() >= 2 && *ph[0].cflex < *ph[1].cflex) ++b.improved_bd;
    if (ph.size() >= 3 && *ph[1].cflex < *ph[2].cflex) ++b.improved_sc;
  }
  b.mean_normalized.assign(b.phases.size(), 0.0);
  int counted = 0;
  for (const BatchRow& row : b.rows) {
    if (row.normalized.size() != b.phases.size()) continue;
    ++counted;
    for (size_t k = 0; k < b.phases.size(); ++k) b.mean_normalized[k] += row.normalized[k];
  }
  for (double& v : b.mean_normalized) v = counted ? v / counted : 0.0;
  return b;
}

std::string batch_json(const BatchReport& b, bool with_timing) {
  json j;
  j["report_version"] = 1;
  json rows = json::array();
  for (const BatchRow& row : b.rows) {
    json r = {{"task", row.task}, {"plan", row.plan}, {"ok", row.ok}};
    if (!row.ok) r["error"] = row.error;
    else r["report"] = report_object(row.report, with_timing);
    r["normalized_cflex"] = row.normalized;
    rows.push_back(r);
  }
  j["rows"] = rows;
  json agg = {{"pairs", b.rows.size()},
              {"failed", std::count_if(b.rows.begin(), b.rows.end(), [](const BatchRow& r) { return !r.ok; })},
              {"improved_bd", b.improved_bd},
              {"improved_sc", b.improved_sc}};
  json mean = json::object();
  for (size_t k = 0; k < b.phases.size(); ++k) mean[b.phases[k]] = b.mean_normalized[k];
  agg["mean_normalized_cflex"] = mean;
  j["aggregate"] = agg;
  return j.dump(2) + "\n";
}

std::string batch_text(const BatchReport& b) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  for (const BatchRow& row : b.rows) {
    os << row.task << " " << row.plan << ": ";
    if (!row.ok) {
      os << "FAILED " << row.error << "\n";
      continue;
    }
    for (size_t k = 0; k < row.report.phases.size(); ++k)
      os << (k ? "  " : "") << row.report.phases[k].name << " " << fmt(row.report.phases[k].cflex);
    os << "\n";
  }
  os << "pairs " << b.rows.size() << ", improved by bd " << b.improved_bd << ", improved by sc " << b.improved_sc;
  for (size_t k = 0; k < b.phases.size(); ++k) os << ", mean normalized " << b.phases[k] << " " << b.mean_normalized[k];
  os << "\n";
  return os.str();
}

}  // namespace cibs
