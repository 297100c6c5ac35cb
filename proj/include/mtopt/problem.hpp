// SPDX-License-Identifier: Apache-2.0
//
// Multi-task problem interface. Problems are immutable after construction
// and evaluation is reentrant; per-run cost accounting lives in the
// InstrumentedProblem wrapper, one per run, so shared problem instances
// stay thread-safe.
//
// Three evaluation entry points with distinct costs:
//   losses(theta)                 -> all k losses        (1 loss-vector eval)
//   weighted_gradient(theta, w)   -> sum_i w_i grad_i    (1 gradient eval)
//   jacobian(theta)               -> all task gradients  (k gradient evals)
// A weighted-loss gradient costs one backward pass regardless of k; that
// asymmetry is the whole point of the instrumented counters.
#pragma once

#include <Eigen/Dense>
#include <string>

#include "mtopt/instrument.hpp"
#include "mtopt/jacobian.hpp"

namespace mtopt {

class MultiTaskProblem {
 public:
  virtual ~MultiTaskProblem() = default;

  virtual Eigen::Index tasks() const = 0;
  virtual Eigen::Index dim() const = 0;
  virtual const std::string& name() const = 0;

  // Per-task infima in loss units, ell_i* = inf_theta ell_i(theta).
  virtual const Eigen::VectorXd& min_losses() const = 0;

  // out: k losses at theta.
  virtual void eval_losses(const Eigen::VectorXd& theta,
                           Eigen::VectorXd& out) const = 0;

  // out: sum_i coeffs_i * grad ell_i(theta), computed in one pass.
  virtual void eval_weighted_gradient(const Eigen::VectorXd& theta,
                                      const Eigen::VectorXd& coeffs,
                                      Eigen::VectorXd& out) const = 0;

  // out: raw task Jacobian at theta (k rows).
  virtual void eval_jacobian(const Eigen::VectorXd& theta,
                             TaskJacobian& out) const = 0;
};

// Counting facade bound to one run. All optimizer code evaluates through
// this wrapper; the counters then certify per-step complexity contracts.
class InstrumentedProblem {
 public:
  explicit InstrumentedProblem(const MultiTaskProblem& p) : p_(p) {}

  Eigen::Index tasks() const { return p_.tasks(); }
  Eigen::Index dim() const { return p_.dim(); }
  const Eigen::VectorXd& min_losses() const { return p_.min_losses(); }
  const MultiTaskProblem& problem() const { return p_; }

  void losses(const Eigen::VectorXd& theta, Eigen::VectorXd& out) {
    ++counters_.loss_evals;
    p_.eval_losses(theta, out);
  }

  void weighted_gradient(const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& coeffs, Eigen::VectorXd& out) {
    ++counters_.grad_evals;
    p_.eval_weighted_gradient(theta, coeffs, out);
  }

  void jacobian(const Eigen::VectorXd& theta, TaskJacobian& out) {
    counters_.grad_evals += p_.tasks();
    p_.eval_jacobian(theta, out);
  }

  const EvalCounters& counters() const { return counters_; }
  void reset_counters() { counters_.reset(); }

 private:
  const MultiTaskProblem& p_;
  EvalCounters counters_;
};

}  // namespace mtopt
