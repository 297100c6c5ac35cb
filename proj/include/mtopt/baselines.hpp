// SPDX-License-Identifier: Apache-2.0
//
// Gradient-manipulation and loss-weighting baselines, each as a pure
// direction function plus one shared stepping driver. All directions follow
// the row-stacked convention d = sum_i w_i row_i.
//
// Per-step evaluation cost (certified by the instrumented counters):
//   LS / SI / RLW / fixed weights: 1 weighted-gradient evaluation
//   MGDA / PCGrad / CAGrad / IMTL-G / NashMTL: k gradient evaluations
// The amortized probes estimate the CAGrad and NashMTL weight-objective
// gradients from loss differences: 2 gradient + 3 loss evaluations instead
// of a k-row Jacobian.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>

#include "mtopt/adam.hpp"
#include "mtopt/jacobian.hpp"
#include "mtopt/min_norm.hpp"
#include "mtopt/problem.hpp"

namespace mtopt {

enum class Method {
  kLs,            // average gradient
  kSi,            // scale-invariant: average log-loss gradient
  kRlw,           // random loss weighting
  kMgda,          // min-norm combination
  kPcgrad,        // pairwise gradient surgery
  kCagrad,        // conflict-averse direction
  kImtlg,         // impartial equal-projection weights
  kNashmtl,       // Nash bargaining weights
  kFixedWeights,  // constant weights (single-task references)
  kFamo,          // handled by FamoOptimizer
  kFamoExactDual  // handled by FamoOptimizer
};

// d = (1/k) sum_i row_i.
Eigen::VectorXd ls_direction(const TaskJacobian& jac);

// d = sum_i row_i / shifted_losses_i (gradient of sum_i log ell~_i).
Eigen::VectorXd si_direction(const Eigen::VectorXd& shifted_losses,
                             const TaskJacobian& jac);

// softmax of k fresh standard normals from the stream.
Eigen::VectorXd rlw_weights(Eigen::Index tasks, std::mt19937_64& rng);

// Min-norm combination of the raw rows (z*, d* = J^T z*).
MinNormResult mgda_direction(const TaskJacobian& jac, double tol = 1e-8,
                             int max_iter = 1000);

// Gradient surgery: each task gradient is projected off the normal cone of
// every conflicting other gradient, others visited in random order; the
// projected gradients are averaged.
Eigen::VectorXd pcgrad_direction(const TaskJacobian& jac,
                                 std::mt19937_64& rng);

struct CagradResult {
  Eigen::VectorXd d;
  Eigen::VectorXd w_star;   // minimizer of the weight objective
  Eigen::VectorXd weights;  // implied total combination d = J^T weights
  double gap = 0.0;
  bool converged = true;
};

// Conflict-averse direction: d = g0 + (c ||g0|| / ||g_w*||) g_w* with
// w* = argmin_{w in simplex} g_w . g0 + c ||g0|| ||g_w||, g0 the average
// gradient. c = 0 returns g0 exactly.
CagradResult cagrad_direction(const TaskJacobian& jac, double c,
                              double tol = 1e-8, int max_iter = 1000);

struct ImtlgResult {
  Eigen::VectorXd weights;  // solves equal-projection system, sum w = 1
  Eigen::VectorXd d;
  bool outside_simplex = false;  // some w_i < 0 (reported, not an error)
  bool singular = false;         // system rank-deficient; least-squares used
};

// Impartial weighting: d = sum w_i row_i has equal inner product with every
// unit task gradient, weights summing to 1. Requires nonzero rows.
ImtlgResult imtlg_direction(const TaskJacobian& jac);

struct NashResult {
  Eigen::VectorXd weights;  // positive, solves (J J^T) w = 1/w
  Eigen::VectorXd d;
  double residual = 0.0;    // ||G w - 1/w|| at exit
  int iterations = 0;
  bool converged = true;
};

// Nash bargaining weights: solve G w = 1/w, w > 0, by damped Newton on the
// residual with a fraction-to-boundary step (started at w_i = G_ii^{-1/2},
// the exact solution for diagonal G). Non-convergence returns the best
// iterate, flagged.
NashResult nashmtl_direction(const TaskJacobian& jac, double tol = 1e-8,
                             int max_iter = 1000);

struct ProbeResult {
  Eigen::VectorXd grad;   // estimate of dF/dw
  bool rejected = false;  // negative radicand in a norm estimate
};

// Finite-difference estimate of the CAGrad weight-objective gradient:
//   dF/dw ~= eta0 + c (||g0|| / ||g_w||) eta_w,
// with eta0, eta_w probed via loss differences along -alpha_probe * g0 and
// -alpha_probe * g_w. Costs 2 gradient + 3 loss evaluations.
ProbeResult amortized_cagrad_probe(InstrumentedProblem& prob,
                                   const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& w, double c,
                                   double alpha_probe);

// Finite-difference estimate of the NashMTL residual-objective gradient:
//   dF/dw ~= 2 G r + 2 r / w^2,  r = G w - 1/w,
// with G w and G r probed via loss differences. Costs 2 gradient + 3 loss
// evaluations.
ProbeResult amortized_nashmtl_probe(InstrumentedProblem& prob,
                                    const Eigen::VectorXd& theta,
                                    const Eigen::VectorXd& w,
                                    double alpha_probe);

struct BaselineOptions {
  Method method = Method::kLs;
  double alpha = 1e-3;
  ModelUpdater model_updater = ModelUpdater::kPlainGd;
  double epsilon = 1e-8;  // loss shift for SI
  double cagrad_c = 0.5;
  double solver_tol = 1e-8;
  int solver_max_iter = 1000;
  std::uint64_t seed = 0;  // RLW / PCGrad stream
  int update_every = 1;    // CAGrad/NashMTL weight refresh cadence
  Eigen::VectorXd fixed_weights;  // kFixedWeights only
};

struct BaselineStepInfo {
  Eigen::VectorXd weights;  // combination recorded for this step
  double d_norm = 0.0;
  bool solver_converged = true;
};

class BaselineOptimizer {
 public:
  BaselineOptimizer(const Eigen::VectorXd& theta0, Eigen::Index tasks,
                    const BaselineOptions& opts);

  BaselineStepInfo step(InstrumentedProblem& prob);

  const Eigen::VectorXd& theta() const { return theta_.v(); }
  std::int64_t step_count() const { return step_; }
  const BaselineOptions& options() const { return opts_; }
  AdamUpdater* model_adam() { return model_adam_ ? &*model_adam_ : nullptr; }

  void restore(const Eigen::VectorXd& theta, std::int64_t step);

 private:
  void apply_update(InstrumentedProblem& prob);

  BaselineOptions opts_;
  Eigen::Index k_;
  TrackedVector theta_;
  TrackedVector dir_;
  std::optional<AdamUpdater> model_adam_;
  std::mt19937_64 rng_;
  std::int64_t step_ = 0;
  TaskJacobian jac_;               // persistent buffer for Jacobian methods
  Eigen::VectorXd losses_, shifted_;
  Eigen::VectorXd cached_weights_;  // CAGrad/NashMTL reuse across steps
};

}  // namespace mtopt
