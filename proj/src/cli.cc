#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cibs/dtg.h"
#include "cibs/report.h"

namespace cibs {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitUnsupported = 2;
constexpr int kExitInternal = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct PlannerFlags {
  std::string command;
  double time_bound = 5.0;
  int max_solutions = 10;
  size_t oracle_bound = 0;
  std::string phase = "cibs";
};

void add_planner_flags(CLI::App* app, PlannerFlags& f) {
  app->add_option("--phase", f.phase, "Last phase to run")
      ->check(CLI::IsMember({"validate", "eog", "bd", "cibs"}))
      ->envname("CIBS_PHASE")
      ->capture_default_str();
  app->add_option("--planner-cmd", f.command, "External planner, {task} and {plan} are substituted")
      ->envname("CIBS_PLANNER_CMD");
  app->add_option("--time-bound", f.time_bound, "Seconds per subtask")
      ->check(CLI::PositiveNumber)
      ->envname("CIBS_TIME_BOUND")
      ->capture_default_str();
  app->add_option("--max-solutions", f.max_solutions, "Candidate plans per subtask")
      ->check(CLI::PositiveNumber)
      ->envname("CIBS_MAX_SOLUTIONS")
      ->capture_default_str();
  app->add_option("--oracle-bound", f.oracle_bound, "Run the exhaustive soundness check up to this many operators")
      ->envname("CIBS_ORACLE_BOUND")
      ->capture_default_str();
}

PipelineOptions to_options(const PlannerFlags& f) {
  PipelineOptions o;
  o.phase = *parse_phase(f.phase);
  o.planner.command = f.command;
  o.planner.time_bound = f.time_bound;
  o.planner.max_solutions = f.max_solutions;
  o.oracle_bound = f.oracle_bound;
  return o;
}

std::string dot_file_name(const FdrTask& task, int v) {
  std::string name = task.variables[v].name;
  for (char& c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return std::to_string(v) + "_" + name + ".dot";
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Parallel block-decomposed plans from sequential plans"};
  app.require_subcommand(1);

  PlannerFlags rf;
  std::string task_path, plan_path, json_path, out_plan, dot_dir;
  CLI::App* run = app.add_subcommand("run", "Run the pipeline on one task and plan");
  run->add_option("--task", task_path, "Task in SAS format")->required();
  run->add_option("--plan", plan_path, "Sequential plan")->required();
  add_planner_flags(run, rf);
  run->add_option("--json", json_path, "Write the JSON report here");
  run->add_option("--out-plan", out_plan, "Write PREFIX.json and PREFIX.plan for the final plan");
  run->add_option("--emit-dtg-dot", dot_dir, "Write one DOT file per variable into this directory");

  PlannerFlags bf;
  std::string manifest, batch_json_path;
  int parallel = 1;
  CLI::App* batch = app.add_subcommand("batch", "Run the pipeline over a manifest of task/plan pairs");
  batch->add_option("--manifest", manifest, "Lines of 'task plan' paths")->required();
  batch->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  add_planner_flags(batch, bf);
  batch->add_option("--json", batch_json_path, "Write the JSON aggregate here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*batch) {
      const auto pairs = parse_manifest(manifest);
      const BatchReport b = run_batch(pairs, to_options(bf), parallel);
      std::cout << batch_text(b);
      if (!batch_json_path.empty()) write_file(batch_json_path, batch_json(b));
      return kExitOk;
    }

    const FdrTask task = parse_sas(read_file(task_path));
    const SequentialPlan plan = parse_plan(read_file(plan_path), task);
    if (!dot_dir.empty()) {
      std::filesystem::create_directories(dot_dir);
      for (int v = 0; v < task.num_vars(); ++v)
        write_file((std::filesystem::path(dot_dir) / dot_file_name(task, v)).string(),
                   dtg_to_dot(task, build_dtg(task, v)));
    }
    const PipelineReport r = run_pipeline(task, plan, to_options(rf));
    std::cout << report_text(r);
    if (!json_path.empty()) write_file(json_path, report_json(r));
    if (!r.plan_valid) return kExitInvalid;
    if (!out_plan.empty() && r.result) {
      write_file(out_plan + ".json", plan_json(*r.result));
      write_file(out_plan + ".plan", format_plan(witness_linearization(r.result->plan), task));
    }
    return kExitOk;
  } catch (const UnsupportedFeature& e) {
    std::cerr << "unsupported: " << e.what() << "\n";
    return kExitUnsupported;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

}  // namespace cibs
