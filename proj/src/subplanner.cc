#include "cibs/subplanner.h"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <queue>
#include <sstream>
#include <thread>
#include <tuple>
#include <unordered_set>

namespace cibs {

namespace {

using Clock = std::chrono::steady_clock;

std::string node_key(const State& s, const std::vector<int>& ms) {
  std::string k;
  k.reserve((s.size() + ms.size() + 1) * sizeof(int));
  auto put = [&](int x) { k.append(reinterpret_cast<const char*>(&x), sizeof x); };
  for (int v : s) put(v);
  put(-1);
  for (int o : ms) put(o);
  return k;
}

}  // namespace

PlannerResult internal_search(const SubplanRequest& req, size_t node_budget) {
  const FdrTask& task = req.subtask;
  struct Node {
    State state;
    std::vector<int> ms;
    int parent;
    int op;
    int64_t g;
  };
  PlannerResult res;
  const auto deadline = Clock::now() + std::chrono::duration<double>(req.time_bound);
  std::vector<Node> nodes;
  nodes.push_back({task.init, {}, -1, -1, 0});
  using Entry = std::tuple<int64_t, uint64_t, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  uint64_t counter = 0;
  open.push({0, counter++, 0});
  std::unordered_set<std::string> closed;
  std::vector<std::vector<int>> found;
  auto covers_solution = [&](const std::vector<int>& ms) {
    for (const auto& sol : found)
      if (std::includes(ms.begin(), ms.end(), sol.begin(), sol.end())) return true;
    return false;
  };

  size_t pops = 0;
  while (!open.empty()) {
    if ((++pops & 255) == 0 && Clock::now() > deadline) {
      res.timed_out = true;
      res.diagnostic = "time bound reached";
      break;
    }
    const int idx = std::get<2>(open.top());
    open.pop();
    if (!closed.insert(node_key(nodes[idx].state, nodes[idx].ms)).second) continue;
    if (covers_solution(nodes[idx].ms)) continue;
    if (satisfies(nodes[idx].state, task.goal)) {
      found.push_back(nodes[idx].ms);
      std::vector<int> ops;
      for (int n = idx; nodes[n].parent >= 0; n = nodes[n].parent) ops.push_back(nodes[n].op);
      std::reverse(ops.begin(), ops.end());
      res.plans.push_back(make_plan(ops));
      if (static_cast<int>(res.plans.size()) >= req.max_solutions) break;
      continue;
    }
    for (int o = 0; o < static_cast<int>(task.operators.size()); ++o) {
      const Node& cur = nodes[idx];
      const Operator& op = task.operators[o];
      if (!applicable(op, cur.state)) continue;
      const int64_t g = cur.g + task.cost(o);
      if (g > req.cost_bound) continue;
      State next = apply(task, op, cur.state);
      bool revisit = false;
      for (int n = idx; n >= 0 && !revisit; n = nodes[n].parent) revisit = nodes[n].state == next;
      if (revisit) continue;
      std::vector<int> ms = cur.ms;
      ms.insert(std::upper_bound(ms.begin(), ms.end(), o), o);
      if (covers_solution(ms)) continue;
      if (res.generated >= node_budget) {
        res.diagnostic = "node budget exhausted";
        open = {};
        break;
      }
      ++res.generated;
      nodes.push_back({std::move(next), std::move(ms), idx, o, g});
      open.push({g, counter++, static_cast<int>(nodes.size()) - 1});
    }
  }
  return res;
}

PlannerResult external_search(const SubplanRequest& req, const std::string& command) {
  namespace fs = std::filesystem;
  PlannerResult res;
  std::string tmpl = (fs::temp_directory_path() / "cibs-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) {
    res.diagnostic = "cannot create temporary directory";
    return res;
  }
  const fs::path dir = tmpl;
  const fs::path task_path = dir / "task.sas";
  const fs::path plan_path = dir / "plan";
  std::ofstream(task_path) << serialize_sas(req.subtask);

  std::string cmd = command;
  auto replace_all = [&](const std::string& from, const std::string& to) {
    for (size_t pos = 0; (pos = cmd.find(from, pos)) != std::string::npos; pos += to.size()) cmd.replace(pos, from.size(), to);
  };
  replace_all("{task}", task_path.string());
  replace_all("{plan}", plan_path.string());

  pid_t pid = fork();
  if (pid < 0) {
    res.diagnostic = "fork failed";
    fs::remove_all(dir);
    return res;
  }
  if (pid == 0) {
    setpgid(0, 0);
    if (chdir(dir.c_str()) != 0) _exit(127);
    FILE* log = fopen("planner.log", "w");
    if (log) {
      dup2(fileno(log), 1);
      dup2(fileno(log), 2);
    }
    execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  const auto deadline = Clock::now() + std::chrono::duration<double>(req.time_bound);
  int status = 0;
  bool exited = false;
  while (!exited) {
    pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) {
      exited = true;
    } else if (Clock::now() > deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      res.timed_out = true;
      break;
    } else {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }

  std::vector<fs::path> files;
  if (fs::exists(plan_path)) files.push_back(plan_path);
  for (int k = 1; k < 100000; ++k) {
    fs::path p = plan_path.string() + "." + std::to_string(k);
    if (!fs::exists(p)) break;
    files.push_back(p);
  }
  std::vector<std::string> notes;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      SequentialPlan p = parse_plan(ss.str(), req.subtask);
      ValidationReport vr = validate_sequential(p, req.subtask);
      if (!vr.valid) {
        notes.push_back(f.filename().string() + ": " + vr.reason);
        continue;
      }
      if (vr.cost > req.cost_bound) continue;
      res.plans.push_back(std::move(p));
    } catch (const std::exception& e) {
      notes.push_back(f.filename().string() + ": " + e.what());
    }
  }
  std::stable_sort(res.plans.begin(), res.plans.end(), [&](const auto& a, const auto& b) {
    return plan_cost(a, req.subtask) < plan_cost(b, req.subtask);
  });
  if (static_cast<int>(res.plans.size()) > req.max_solutions) res.plans.resize(req.max_solutions);

  if (res.timed_out) notes.insert(notes.begin(), "planner killed after time bound");
  else if (WIFEXITED(status) && WEXITSTATUS(status) != 0)
    notes.insert(notes.begin(), "planner exited with status " + std::to_string(WEXITSTATUS(status)));
  else if (WIFSIGNALED(status))
    notes.insert(notes.begin(), "planner terminated by signal " + std::to_string(WTERMSIG(status)));
  for (size_t i = 0; i < notes.size(); ++i) res.diagnostic += (i ? "; " : "") + notes[i];
  std::error_code ec;
  fs::remove_all(dir, ec);
  return res;
}

PlannerResult generate_plans(const SubplanRequest& req, const PlannerConfig& cfg) {
  if (cfg.command.empty()) return internal_search(req, cfg.node_budget);
  return external_search(req, cfg.command);
}

}  // namespace cibs
