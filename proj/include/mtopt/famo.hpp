// SPDX-License-Identifier: Apache-2.0
//
// Fast adaptive multitask optimization. Per step, with shifted losses
// ell~_i = ell_i - ell_i* + eps > 0 and task weights z = softmax(xi):
//
//   w_i = c * z_i / ell~_i,   c = 1 / sum_i (z_i / ell~_i)     (so sum w = 1)
//   theta' = theta - alpha * sum_i w_i grad ell_i(theta)       (1 gradient)
//   delta  = A(xi)^T (log ell~(theta) - log ell~(theta'))      (2 loss evals)
//   xi'    = xi - beta * (delta + gamma * xi)                  (plain mode)
//            or an Adam step on delta with weight decay gamma  (moment mode)
//
// delta amortizes the dual min-norm objective's gradient: one weighted
// backward pass and two loss evaluations per step, O(1) model-sized state.
// Note delta is realized under the c-scaled update while the ideal dual
// gradient assumes a unit-scale log-gradient step; the induced scale factor
// is benign for the direction and is accepted as-is here.
//
// The exact-dual variant solves the min-norm problem on the log-loss
// Jacobian each step (k gradients) and overwrites xi with log z*; it is the
// oracle FAMO tracks.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "mtopt/adam.hpp"
#include "mtopt/jacobian.hpp"
#include "mtopt/problem.hpp"
#include "mtopt/simplex.hpp"

namespace mtopt {

enum class LogitMode { kPlainGd, kMoment };

struct FamoOptions {
  double alpha = 1e-3;    // model step size
  double beta = 0.025;    // logit step size
  double gamma = 0.001;   // logit weight decay
  double epsilon = 1e-8;  // loss-shift regularizer
  LogitMode logit_mode = LogitMode::kMoment;
  ModelUpdater model_updater = ModelUpdater::kPlainGd;
  double dual_tol = 1e-8;  // exact-dual solver settings
  int dual_max_iter = 1000;
};

struct FamoWeighted {
  Eigen::VectorXd d;  // sum_i w_i * row_i
  double c = 0.0;     // renormalization constant
  Eigen::VectorXd w;  // convex combination weights
};

// Combination weights and direction from shifted losses, a raw Jacobian and
// simplex weights z. Requires strictly positive losses.
FamoWeighted famo_weighted_direction(const Eigen::VectorXd& shifted_losses,
                                     const TaskJacobian& jac_raw,
                                     const SimplexWeights& z);

// Weights-only version (no Jacobian needed): w_i = c z_i / ell~_i.
// Returns {w, c}.
std::pair<Eigen::VectorXd, double> famo_task_weights(
    const Eigen::VectorXd& shifted_losses, const Eigen::VectorXd& z);

// Closed-form EMA expansion of the plain-gd logit recursion
//   xi_{t+1} = (1 - beta*gamma) xi_t - beta * delta_t,  xi_1 = 0:
//   xi_{T+1} = -beta * sum_s (1 - beta*gamma)^{T-s} delta_s.
Eigen::VectorXd famo_ema_expansion_check(
    const std::vector<Eigen::VectorXd>& delta_history, double beta,
    double gamma);

// Stationarity residuals of the continuous-time limit at (theta, xi):
// first = || sum_i z_i grad log ell~_i ||, second = || xi ||.
std::pair<double, double> continuous_limit_residual(
    const Eigen::VectorXd& theta, const Eigen::VectorXd& xi,
    const MultiTaskProblem& problem, double epsilon = 1e-8);

struct FamoStepInfo {
  Eigen::VectorXd weights;      // w applied this step
  Eigen::VectorXd losses;       // raw losses at theta_t
  Eigen::VectorXd new_losses;   // raw losses at theta_{t+1}
  double d_norm = 0.0;          // norm of the combined direction
};

class FamoOptimizer {
 public:
  FamoOptimizer(const Eigen::VectorXd& theta0, Eigen::Index tasks,
                const FamoOptions& opts);

  // One amortized step: 1 weighted-gradient + 2 loss-vector evaluations.
  // Throws NumericalError (theta left at theta_t) if the candidate update
  // produces non-finite parameters or losses.
  FamoStepInfo step(InstrumentedProblem& prob);

  // One oracle step: full Jacobian + min-norm solve on log-loss rows; xi is
  // overwritten with centered log z*. Non-convergence of the dual solve
  // propagates as NumericalError.
  FamoStepInfo exact_dual_step(InstrumentedProblem& prob);

  const Eigen::VectorXd& theta() const { return theta_.v(); }
  const Eigen::VectorXd& logits() const { return xi_; }
  Eigen::VectorXd weights() const { return softmax(xi_); }
  const Eigen::VectorXd& prev_shifted_losses() const { return prev_shifted_; }
  std::int64_t step_count() const { return step_; }
  const FamoOptions& options() const { return opts_; }
  Eigen::Index tasks() const { return k_; }

  // Checkpoint access (harness serializes through these).
  void restore(const Eigen::VectorXd& theta, const Eigen::VectorXd& xi,
               const Eigen::VectorXd& prev_shifted, std::int64_t step);
  AdamUpdater* model_adam() { return model_adam_ ? &*model_adam_ : nullptr; }
  AdamUpdater* logit_adam() { return logit_adam_ ? &*logit_adam_ : nullptr; }
  const AdamUpdater* model_adam() const {
    return model_adam_ ? &*model_adam_ : nullptr;
  }
  const AdamUpdater* logit_adam() const {
    return logit_adam_ ? &*logit_adam_ : nullptr;
  }

 private:
  void shift_losses(const Eigen::VectorXd& raw, const Eigen::VectorXd& mins,
                    Eigen::VectorXd& out) const;

  FamoOptions opts_;
  Eigen::Index k_;
  TrackedVector theta_;
  TrackedVector grad_;  // direction scratch, doubles as the candidate buffer
  Eigen::VectorXd xi_;
  Eigen::VectorXd prev_shifted_;
  std::int64_t step_ = 0;
  std::optional<AdamUpdater> model_adam_;
  std::optional<AdamUpdater> logit_adam_;
  // k-sized scratch, persistent to keep steps allocation-free
  Eigen::VectorXd loss_t_, loss_t1_, shifted_t_, shifted_t1_, z_, w_, delta_;
};

}  // namespace mtopt
