// SPDX-License-Identifier: Apache-2.0
// Command-line harness: single runs from JSON configs, the prepackaged
// experiments, gradient checking, and Pareto front maintenance.
//
// Exit codes: 0 success, 1 configuration/usage error, 2 numerical failure,
// 3 assertion failure (--assert modes only).

#include <cstdint>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtopt/errors.hpp"
#include "mtopt/experiments.hpp"
#include "mtopt/gradient_check.hpp"
#include "mtopt/rng.hpp"
#include "mtopt/run.hpp"
#include "mtopt/toy2d.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNumericalFailure = 2;
constexpr int kAssertFailure = 3;

int cmd_run(const std::string& config_path) {
  const mtopt::RunConfig cfg = mtopt::load_run_config(config_path);
  const mtopt::RunSummary s = mtopt::run(cfg);
  std::cout << mtopt::run_summary_to_json(s).dump(2) << '\n';
  return s.failed ? kNumericalFailure : kOk;
}

int cmd_toy(const std::string& out_dir, std::int64_t steps,
            const std::string& front_path, bool rebuild_front,
            bool assert_outcomes) {
  const mtopt::ParetoFront front =
      mtopt::toy_pareto_front_cached(front_path, rebuild_front);
  const mtopt::ToyExperimentResult r =
      mtopt::toy_experiment(front, steps, out_dir);
  std::cout << "front points: " << front.points.rows()
            << "  proximity threshold: " << front.threshold << '\n';
  for (const auto& m : r.methods) {
    std::cout << m << ": reached " << r.reached_count.at(m) << "/"
              << r.init_count << " in " << r.wall_seconds.at(m) << " s\n";
  }
  std::cout << "nashmtl/famo time ratio: " << r.nash_famo_time_ratio << '\n';
  if (assert_outcomes) {
    bool ok = r.reached_count.at("famo") == r.init_count &&
              r.reached_count.at("ls") < r.init_count;
    for (const auto& m : {"mgda", "pcgrad", "cagrad", "nashmtl"}) {
      ok = ok && r.reached_count.at(m) == r.init_count;
    }
    if (!ok) {
      std::cerr << "toy outcome assertion failed\n";
      return kAssertFailure;
    }
  }
  return kOk;
}

int cmd_gamma(const std::string& out_dir, const std::vector<double>& gammas,
              std::int64_t steps) {
  const mtopt::GammaSweepResult r =
      gammas.empty() ? mtopt::gamma_sweep({1e-4, 1e-3, 1e-2}, steps, out_dir)
                     : mtopt::gamma_sweep(gammas, steps, out_dir);
  std::cout << "single-task references: " << r.reference.transpose() << '\n';
  for (const auto& row : r.rows) {
    std::cout << "gamma " << row.gamma << ": losses "
              << row.final_losses.transpose() << "  delta_m% "
              << row.delta_m_percent << '\n';
  }
  return kOk;
}

int cmd_timing(const std::string& out_dir, const std::vector<std::int64_t>& ks,
               Eigen::Index dim, int steps, bool assert_slope) {
  std::vector<Eigen::Index> kk(ks.begin(), ks.end());
  if (kk.empty()) kk = {2, 4, 8, 16, 32, 64};
  const mtopt::TimingScalingResult r =
      mtopt::timing_scaling(kk, dim, steps, 10, out_dir);
  for (const auto& [m, s] : r.slope_ns_per_task) {
    std::cout << m << ": slope " << s << " ns/task\n";
  }
  std::cout << "famo/mgda slope ratio: " << r.famo_mgda_slope_ratio << '\n';
  if (assert_slope && !(r.famo_mgda_slope_ratio <= 0.3)) {
    std::cerr << "timing slope assertion failed\n";
    return kAssertFailure;
  }
  return kOk;
}

int cmd_check_gradients(const std::string& config_path, int points,
                        std::uint64_t seed, double h, bool assert_pass) {
  std::unique_ptr<mtopt::MultiTaskProblem> problem;
  if (config_path.empty()) {
    problem = std::make_unique<mtopt::Toy2d>();
  } else {
    problem = mtopt::make_problem(
        mtopt::load_run_config(config_path).problem);
  }
  std::mt19937_64 rng(seed);
  bool all_pass = true;
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const Eigen::VectorXd theta =
        mtopt::gaussian_vector(rng, problem->dim()) * 3.0;
    const auto rep = mtopt::check_gradients(*problem, theta, h);
    all_pass = all_pass && rep.pass;
    worst = std::max(worst, rep.max_err);
  }
  std::cout << problem->name() << ": " << points
            << " random points, worst relative error " << worst
            << (all_pass ? " [ok]" : " [FAIL]") << '\n';
  if (assert_pass && !all_pass) return kAssertFailure;
  return kOk;
}

int cmd_front(const std::string& path, bool rebuild, int grid_n) {
  const mtopt::ParetoFront f =
      mtopt::toy_pareto_front_cached(path, rebuild, grid_n);
  std::cout << "front: " << f.points.rows() << " points, max gap "
            << f.max_gap << ", threshold " << f.threshold << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multitask optimization harness"};
  app.require_subcommand(1);

  std::string config_path;
  auto* c_run = app.add_subcommand("run", "single run from a JSON config");
  c_run->add_option("--config", config_path, "JSON run config")->required();

  std::string out_dir = "out";
  std::string front_path = "out/pareto_front.json";
  std::int64_t toy_steps = 50000;
  bool rebuild_front = false;
  bool assert_mode = false;
  auto* c_toy = app.add_subcommand("toy", "toy benchmark, 6 methods");
  c_toy->add_option("--out", out_dir, "output directory");
  c_toy->add_option("--steps", toy_steps, "steps per run");
  c_toy->add_option("--front", front_path, "Pareto front cache file");
  c_toy->add_flag("--rebuild-front", rebuild_front, "ignore the cache");
  c_toy->add_flag("--assert", assert_mode, "exit 3 unless expected outcomes");

  std::vector<double> gammas;
  std::int64_t gamma_steps = 20000;
  auto* c_gamma = app.add_subcommand("gamma-sweep", "logit decay sweep");
  c_gamma->add_option("--out", out_dir, "output directory");
  c_gamma->add_option("--gammas", gammas, "decay values");
  c_gamma->add_option("--steps", gamma_steps, "steps per run");

  std::vector<std::int64_t> ks;
  std::int64_t timing_dim = 1000;
  int timing_steps = 200;
  auto* c_timing = app.add_subcommand("timing", "per-step cost scaling");
  c_timing->add_option("--out", out_dir, "output directory");
  c_timing->add_option("--k", ks, "task counts");
  c_timing->add_option("--dim", timing_dim, "parameter count");
  c_timing->add_option("--steps", timing_steps, "timed steps per cell");
  c_timing->add_flag("--assert", assert_mode, "exit 3 unless slope ratio ok");

  std::string cg_config;
  int cg_points = 100;
  std::uint64_t cg_seed = 0;
  double cg_h = 1e-6;
  auto* c_cg = app.add_subcommand("check-gradients",
                                  "finite-difference Jacobian check");
  c_cg->add_option("--config", cg_config,
                   "run config supplying the problem (default: toy)");
  c_cg->add_option("--points", cg_points, "random evaluation points");
  c_cg->add_option("--seed", cg_seed, "point stream seed");
  c_cg->add_option("--fd-step", cg_h, "finite-difference step");
  c_cg->add_flag("--assert", assert_mode, "exit 3 on failure");

  bool rebuild = false;
  int grid_n = 2000;
  auto* c_front = app.add_subcommand("pareto-front", "build or load the front");
  c_front->add_option("--out", front_path, "front cache file");
  c_front->add_flag("--rebuild", rebuild, "rebuild even if cached");
  c_front->add_option("--grid", grid_n, "grid resolution per axis");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_run->parsed()) return cmd_run(config_path);
    if (c_toy->parsed()) {
      return cmd_toy(out_dir, toy_steps, front_path, rebuild_front,
                     assert_mode);
    }
    if (c_gamma->parsed()) return cmd_gamma(out_dir, gammas, gamma_steps);
    if (c_timing->parsed()) {
      return cmd_timing(out_dir, ks, timing_dim, timing_steps, assert_mode);
    }
    if (c_cg->parsed()) {
      return cmd_check_gradients(cg_config, cg_points, cg_seed, cg_h,
                                 assert_mode);
    }
    if (c_front->parsed()) return cmd_front(front_path, rebuild, grid_n);
  } catch (const mtopt::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}
