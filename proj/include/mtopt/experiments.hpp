// SPDX-License-Identifier: Apache-2.0
//
// Prepackaged experiments: the 2-D toy benchmark against its Pareto front,
// a logit-decay sweep on a scale-imbalanced quadratic bank, and per-step
// cost scaling across task counts. Each writes CSV/JSON artifacts into an
// output directory (skipped when the directory is empty).
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtopt/metrics.hpp"
#include "mtopt/quadratic_bank.hpp"

namespace mtopt {

// -------------------------------------------------------------- Pareto front
// Non-dominated set of toy losses over an inclusive grid_n x grid_n grid of
// parameters in [lo, hi]^2, sorted by the first loss. `max_gap` is the
// largest Euclidean distance between consecutive front points; `threshold`
// (2 * max_gap) is the proximity bound below which a run counts as having
// reached the front.
struct ParetoFront {
  Eigen::MatrixX2d points;
  double max_gap = 0.0;
  double threshold = 0.0;
  int grid_n = 0;
  double lo = 0.0;
  double hi = 0.0;
};

ParetoFront build_toy_pareto_front(int grid_n = 2000, double lo = -12.0,
                                   double hi = 12.0);
void save_pareto_front(const ParetoFront& f, const std::string& path);
ParetoFront load_pareto_front(const std::string& path);
// Load from cache_path when present (unless rebuild), else build and save.
ParetoFront toy_pareto_front_cached(const std::string& cache_path,
                                    bool rebuild = false, int grid_n = 2000);
// Euclidean distance from `losses` to the nearest front point.
double pareto_proximity(const ParetoFront& f, const Eigen::Vector2d& losses);

// ------------------------------------------------------------ toy benchmark
struct ToyRunResult {
  std::string method;
  Eigen::Vector2d init;
  Eigen::Vector2d final_losses;
  double proximity = 0.0;
  bool reached = false;
  double wall_seconds = 0.0;  // optimizer time only, recorder excluded
  bool failed = false;
};

struct ToyExperimentResult {
  std::vector<ToyRunResult> runs;  // method-major, 5 inits each
  std::vector<std::string> methods;
  std::map<std::string, double> wall_seconds;
  std::map<std::string, int> reached_count;
  int init_count = 0;
  double threshold = 0.0;
  double nash_famo_time_ratio = 0.0;
};

// Six methods (famo, ls, mgda, pcgrad, cagrad, nashmtl) from five fixed
// starts, all driven by the moment updater at alpha = 2e-3. Writes
// toy_runs.csv and toy_summary.json into out_dir.
ToyExperimentResult toy_experiment(const ParetoFront& front,
                                   std::int64_t steps = 50000,
                                   const std::string& out_dir = "");

// --------------------------------------------------------------- gamma sweep
struct GammaSweepRow {
  double gamma = 0.0;
  Eigen::VectorXd final_losses;
  double delta_m_percent = 0.0;
  double final_d_norm = 0.0;  // last step's combined-direction norm
};

struct GammaSweepResult {
  QuadraticBankSpec bank;  // seed spec; centers are then shrunk (below)
  // Centers are contracted toward their mean by this factor, so the tasks
  // share most of their optimum and joint training can approach every
  // single-task reference; the residual conflict across the 100x loss-scale
  // spread is what the adaptive weighting has to manage.
  double center_spread = 0.05;
  Eigen::VectorXd reference;  // single-task finals, same budget
  std::vector<GammaSweepRow> rows;
  MetricTable table;
};

// Logit weight-decay sensitivity on a 3-task bank with loss scales
// {1, 10, 100}: reruns the adaptive optimizer per gamma and scores final
// losses against fixed single-task reference runs. The optimizer is given
// zero as each task's loss lower bound rather than the exact infimum — the
// bound is loose the way it is on any real workload. Writes gamma_sweep.csv.
GammaSweepResult gamma_sweep(const std::vector<double>& gammas = {1e-4, 1e-3,
                                                                  1e-2},
                             std::int64_t steps = 20000,
                             const std::string& out_dir = "");

// ------------------------------------------------------------- cost scaling
struct TimingCell {
  std::string method;
  Eigen::Index tasks = 0;
  double median_step_ns = 0.0;
  double grad_evals_per_step = 0.0;
  double loss_evals_per_step = 0.0;
  std::int64_t peak_live_vectors = 0;
};

struct TimingScalingResult {
  std::vector<TimingCell> cells;
  std::vector<Eigen::Index> ks;
  Eigen::Index dim = 0;
  std::map<std::string, double> slope_ns_per_task;  // least-squares over k
  double famo_mgda_slope_ratio = 0.0;
};

// Median per-step wall time on diagonal quadratic banks (dim parameters)
// for k in ks, per method, after a short warmup. Also certifies evaluation
// counts per step and the peak number of live parameter-sized vectors.
// Writes timing.csv and timing_summary.json.
TimingScalingResult timing_scaling(
    const std::vector<Eigen::Index>& ks = {2, 4, 8, 16, 32, 64},
    Eigen::Index dim = 1000, int timed_steps = 200, int warmup_steps = 10,
    const std::string& out_dir = "");

}  // namespace mtopt
