// SPDX-License-Identifier: Apache-2.0
//
// Single-run orchestration: strict JSON configuration, the step loop with
// JSONL trajectory recording, summaries, and optimizer checkpointing.
//
// Determinism contract: identical config + seed reproduces the JSONL output
// byte for byte. Per-step wall time (t_ns) is therefore 0 unless
// record_time is set; summaries carry whole-run wall time instead and are
// excluded from the byte-identical guarantee.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mtopt/baselines.hpp"
#include "mtopt/famo.hpp"
#include "mtopt/problem.hpp"
#include "mtopt/quadratic_bank.hpp"

namespace mtopt {

struct ProblemConfig {
  std::string kind = "toy2d";  // "toy2d" | "quadratic_bank"
  QuadraticBankSpec bank;      // quadratic_bank only
};

struct RunConfig {
  ProblemConfig problem;
  Method method = Method::kLs;
  Eigen::VectorXd theta0;
  std::int64_t steps = 1000;
  double alpha = 1e-3;
  ModelUpdater model_updater = ModelUpdater::kPlainGd;
  // famo-only knobs
  double beta = 0.025;
  double gamma = 0.001;
  double epsilon = 1e-8;
  LogitMode logit_mode = LogitMode::kMoment;
  // baseline knobs
  double cagrad_c = 0.5;
  double solver_tol = 1e-8;
  int solver_max_iter = 1000;
  int update_every = 1;
  std::uint64_t seed = 0;
  Eigen::VectorXd fixed_weights;  // fixed_weights method only
  // output
  std::string output_path;  // JSONL trajectory; empty = none
  bool record_time = false;
};

// Strict parsing: unknown keys anywhere in the document are an error.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);

std::string method_name(Method m);
Method method_from_name(const std::string& name);

std::unique_ptr<MultiTaskProblem> make_problem(const ProblemConfig& pc);

struct RunSummary {
  std::int64_t steps_completed = 0;
  Eigen::VectorXd final_losses;
  Eigen::VectorXd final_theta;
  EvalCounters counters;
  std::int64_t peak_live_vectors = 0;
  double wall_seconds = 0.0;  // sum of per-step optimizer time
  bool failed = false;
  std::string failure;
};

nlohmann::ordered_json run_summary_to_json(const RunSummary& s);

// Execute cfg.steps optimizer steps, streaming one JSONL line per step to
// cfg.output_path (if set) plus a <output>.summary.json. A NumericalError
// mid-run stops the loop and is reported in the summary, not thrown.
RunSummary run(const RunConfig& cfg);

// Checkpointing: full optimizer state (parameters, logits, loss shadows,
// moment buffers, step counter) as JSON. Restoring into an optimizer built
// with the same options resumes bit-identically.
nlohmann::ordered_json famo_checkpoint(const FamoOptimizer& opt);
void famo_restore(FamoOptimizer& opt, const nlohmann::json& j);

}  // namespace mtopt
