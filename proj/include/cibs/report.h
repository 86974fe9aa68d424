#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cibs/substitution.h"

namespace cibs {

enum class Phase { Validate, Eog, Bd, Cibs };

std::optional<Phase> parse_phase(const std::string& s);
std::string phase_name(Phase p);

struct PipelineOptions {
  Phase phase = Phase::Cibs;
  PlannerConfig planner;
  size_t oracle_bound = 0;  // 0 disables the exhaustive soundness check
};

struct PhaseMetrics {
  std::string name;  // "eog", "bd" or "sc"
  size_t n_ops = 0;
  int64_t cost = 0;
  std::optional<Rational> flex, cflex;
  double seconds = 0;
  bool valid = false;
  std::optional<bool> oracle;
};

struct PipelineReport {
  bool plan_valid = false;
  std::string validation;  // failure reason when the input plan is invalid
  int64_t input_cost = 0;
  std::vector<PhaseMetrics> phases;
  std::vector<ScAttempt> attempts;
  int accepted = 0;
  DeorderStats deorder;
  std::optional<PbdPlan> result;  // plan after the last phase run
};

/// Run the pipeline up to opts.phase. The returned plan refers to `task`.
PipelineReport run_pipeline(const FdrTask& task, const SequentialPlan& plan, const PipelineOptions& opts);

std::string report_text(const PipelineReport& r);
/// JSON report. Timing fields are left out when with_timing is false.
std::string report_json(const PipelineReport& r, bool with_timing = true);
/// Nodes, orderings with reasons, links, blocks and non-concurrency pairs.
std::string plan_json(const PbdPlan& pbd);

struct BatchRow {
  std::string task, plan;
  bool ok = false;
  std::string error;
  PipelineReport report;
  std::vector<double> normalized;  // cflex per phase scaled to [0, 1]
};

struct BatchReport {
  std::vector<BatchRow> rows;
  std::vector<std::string> phases;
  std::vector<double> mean_normalized;
  int improved_bd = 0;  // rows where BD raised cflex over EOG
  int improved_sc = 0;  // rows where substitution raised cflex over BD
};

/// Manifest lines hold a task path and a plan path, relative to the
/// manifest's directory. Blank lines and lines starting with '#' are skipped.
std::vector<std::pair<std::string, std::string>> parse_manifest(const std::string& path);

BatchReport run_batch(const std::vector<std::pair<std::string, std::string>>& pairs, const PipelineOptions& opts,
                      int parallel);
std::string batch_json(const BatchReport& b, bool with_timing = true);
std::string batch_text(const BatchReport& b);

/// Entry point of the command-line tool.
int run_cli(int argc, char** argv);

}  // namespace cibs
