// SPDX-License-Identifier: Apache-2.0

#include "mtopt/famo.hpp"

#include <cmath>
#include <sstream>

#include "mtopt/errors.hpp"
#include "mtopt/min_norm.hpp"

namespace mtopt {

std::pair<Eigen::VectorXd, double> famo_task_weights(
    const Eigen::VectorXd& shifted_losses, const Eigen::VectorXd& z) {
  if (shifted_losses.size() != z.size())
    throw std::invalid_argument("famo_task_weights: size mismatch");
  if (shifted_losses.minCoeff() <= 0.0)
    throw std::invalid_argument(
        "famo_task_weights: shifted losses must be positive");
  if (z.size() == 1 && z[0] == 1.0) {
    // single task: w = 1 and c = the shifted loss, exactly — the generic
    // normalization below would round w to 1 +- one ulp
    return {Eigen::VectorXd::Ones(1), shifted_losses[0]};
  }
  Eigen::VectorXd w = z.cwiseQuotient(shifted_losses);
  const double c = 1.0 / w.sum();
  w *= c;
  return {std::move(w), c};
}

FamoWeighted famo_weighted_direction(const Eigen::VectorXd& shifted_losses,
                                     const TaskJacobian& jac_raw,
                                     const SimplexWeights& z) {
  if (jac_raw.kind() != GradientKind::kRaw)
    throw std::invalid_argument("famo_weighted_direction: raw Jacobian required");
  auto [w, c] = famo_task_weights(shifted_losses, z.v());
  FamoWeighted out;
  out.d = jac_raw.combine(w);
  out.c = c;
  out.w = std::move(w);
  return out;
}

Eigen::VectorXd famo_ema_expansion_check(
    const std::vector<Eigen::VectorXd>& delta_history, double beta,
    double gamma) {
  if (delta_history.empty())
    throw std::invalid_argument("famo_ema_expansion_check: empty history");
  const Eigen::Index k = delta_history.front().size();
  const double decay = 1.0 - beta * gamma;
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(k);
  const std::size_t T = delta_history.size();
  for (std::size_t s = 0; s < T; ++s) {
    if (delta_history[s].size() != k)
      throw std::invalid_argument("famo_ema_expansion_check: ragged history");
    xi -= beta * std::pow(decay, double(T - 1 - s)) * delta_history[s];
  }
  return xi;
}

std::pair<double, double> continuous_limit_residual(
    const Eigen::VectorXd& theta, const Eigen::VectorXd& xi,
    const MultiTaskProblem& problem, double epsilon) {
  Eigen::VectorXd losses(problem.tasks());
  problem.eval_losses(theta, losses);
  Eigen::VectorXd shifted = losses - problem.min_losses();
  shifted.array() += epsilon;
  if (shifted.minCoeff() <= 0.0)
    throw NumericalError("continuous_limit_residual: nonpositive shifted loss");
  TaskJacobian jac(problem.tasks(), problem.dim());
  problem.eval_jacobian(theta, jac);
  const TaskJacobian jac_log = jac.to_log(shifted);
  const Eigen::VectorXd z = softmax(xi);
  return {jac_log.combine(z).norm(), xi.norm()};
}

FamoOptimizer::FamoOptimizer(const Eigen::VectorXd& theta0, Eigen::Index tasks,
                             const FamoOptions& opts)
    : opts_(opts), k_(tasks) {
  if (tasks < 1) throw std::invalid_argument("FamoOptimizer: tasks >= 1");
  if (opts.alpha <= 0 || opts.beta < 0 || opts.gamma < 0 || opts.epsilon <= 0)
    throw std::invalid_argument("FamoOptimizer: bad hyperparameters");
  theta_.resize(theta0.size());
  theta_.v() = theta0;
  grad_.resize(theta0.size());
  grad_.v().setZero();
  xi_ = Eigen::VectorXd::Zero(k_);
  prev_shifted_ = Eigen::VectorXd::Zero(k_);
  if (opts.model_updater == ModelUpdater::kMoment)
    model_adam_.emplace(theta0.size(), AdamConfig{.lr = opts.alpha});
  if (opts.logit_mode == LogitMode::kMoment)
    logit_adam_.emplace(k_, AdamConfig{.lr = opts.beta,
                                       .weight_decay = opts.gamma});
}

void FamoOptimizer::shift_losses(const Eigen::VectorXd& raw,
                                 const Eigen::VectorXd& mins,
                                 Eigen::VectorXd& out) const {
  out = raw - mins;
  out.array() += opts_.epsilon;
  if (!(out.minCoeff() > 0.0)) {
    std::ostringstream msg;
    msg << "FamoOptimizer: nonpositive shifted loss at step " << step_
        << " (loss below its declared infimum?)";
    throw NumericalError(msg.str());
  }
}

FamoStepInfo FamoOptimizer::step(InstrumentedProblem& prob) {
  FamoStepInfo info;
  prob.losses(theta_.v(), loss_t_);  // loss eval 1
  shift_losses(loss_t_, prob.min_losses(), shifted_t_);

  z_ = softmax(xi_);
  w_ = famo_task_weights(shifted_t_, z_).first;

  prob.weighted_gradient(theta_.v(), w_, grad_.v());  // the one gradient eval
  info.d_norm = grad_.v().norm();

  // build the candidate theta in the gradient scratch, then evaluate before
  // committing: a bad step never touches theta
  if (model_adam_) {
    model_adam_->step_to(theta_.v(), grad_.v(), grad_.v());
  } else {
    grad_.v() = theta_.v() - opts_.alpha * grad_.v();
  }
  if (!grad_.v().allFinite()) {
    std::ostringstream msg;
    msg << "FamoOptimizer: non-finite parameters at step " << step_;
    throw NumericalError(msg.str());
  }
  prob.losses(grad_.v(), loss_t1_);  // loss eval 2, at the candidate
  if (!loss_t1_.allFinite()) {
    Eigen::Index worst = 0;
    for (Eigen::Index i = 0; i < k_; ++i)
      if (!std::isfinite(loss_t1_[i])) worst = i;
    std::ostringstream msg;
    msg << "FamoOptimizer: non-finite loss for task " << worst << " at step "
        << step_ << "; step rolled back";
    throw NumericalError(msg.str());
  }
  shift_losses(loss_t1_, prob.min_losses(), shifted_t1_);
  theta_.v().swap(grad_.v());  // commit

  // amortized dual gradient: delta = A(xi)^T (log l~_t - log l~_{t+1})
  delta_ = softmax_jvp_transpose_at(
      z_, (shifted_t_.array().log() - shifted_t1_.array().log()).matrix());
  if (logit_adam_) {
    logit_adam_->step(xi_, delta_);
  } else {
    xi_ -= opts_.beta * (delta_ + opts_.gamma * xi_);
  }
  if (!xi_.allFinite())
    throw NumericalError("FamoOptimizer: non-finite logits");

  prev_shifted_ = shifted_t1_;
  ++step_;
  info.weights = w_;
  info.losses = loss_t_;
  info.new_losses = loss_t1_;
  return info;
}

FamoStepInfo FamoOptimizer::exact_dual_step(InstrumentedProblem& prob) {
  FamoStepInfo info;
  prob.losses(theta_.v(), loss_t_);  // loss eval 1
  shift_losses(loss_t_, prob.min_losses(), shifted_t_);

  TaskJacobian jac(k_, theta_.size());
  prob.jacobian(theta_.v(), jac);  // k gradient evals
  const TaskJacobian jac_log = jac.to_log(shifted_t_);
  const MinNormResult mn = solve_min_norm_on_simplex(
      jac_log.rows(), opts_.dual_tol, opts_.dual_max_iter);
  if (!mn.converged) {
    std::ostringstream msg;
    msg << "FamoOptimizer: dual solve did not converge at step " << step_
        << " (gap " << mn.duality_gap << ")";
    throw NumericalError(msg.str());
  }

  // same raw-gradient combination the amortized step uses, with z = z*
  w_ = famo_task_weights(shifted_t_, mn.z).first;
  grad_.v() = jac.combine(w_);
  info.d_norm = grad_.v().norm();

  if (model_adam_) {
    model_adam_->step_to(theta_.v(), grad_.v(), grad_.v());
  } else {
    grad_.v() = theta_.v() - opts_.alpha * grad_.v();
  }
  prob.losses(grad_.v(), loss_t1_);  // loss eval 2
  if (!grad_.v().allFinite() || !loss_t1_.allFinite())
    throw NumericalError("FamoOptimizer: non-finite exact-dual step");
  shift_losses(loss_t1_, prob.min_losses(), shifted_t1_);
  theta_.v().swap(grad_.v());

  // xi tracks the oracle weights: centered log z* (clamped away from 0)
  xi_ = mn.z.array().max(1e-300).log().matrix();
  xi_.array() -= xi_.mean();

  prev_shifted_ = shifted_t1_;
  ++step_;
  info.weights = w_;
  info.losses = loss_t_;
  info.new_losses = loss_t1_;
  return info;
}

void FamoOptimizer::restore(const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& xi,
                            const Eigen::VectorXd& prev_shifted,
                            std::int64_t step) {
  if (theta.size() != theta_.size() || xi.size() != k_ ||
      prev_shifted.size() != k_)
    throw std::invalid_argument("FamoOptimizer::restore: size mismatch");
  theta_.v() = theta;
  xi_ = xi;
  prev_shifted_ = prev_shifted;
  step_ = step;
}

}  // namespace mtopt
