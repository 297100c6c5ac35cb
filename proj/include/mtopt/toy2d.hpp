// SPDX-License-Identifier: Apache-2.0
//
// Two-task toy objective on R^2. Each loss blends a sharp log-valley term
// (active above the theta_2 = 0 switching line) with a flat quadratic bowl
// (active below it); the two bowls disagree on theta_1, so the tasks
// conflict and the scale gap between L1 and L2 is 10x by construction.
#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "mtopt/problem.hpp"

namespace mtopt {

// Infima, located numerically once (dense grid + bounded 1-D refinement of
// the section h(t) = tanh(-t/2) * (0.01 (t+8)^2 - 20) at theta_1 = +/-7,
// where both objectives reduce to 0.1*h and h). Regeneration script:
// tools/toy_minima_oracle.py. A test re-derives these to guard regressions.
inline constexpr double kToy2dMin1 = -1.9989425136960859;
inline constexpr double kToy2dMin2 = -19.989425136960858;
// argmin theta_2 shared by both tasks (theta_1 = +7 and -7 respectively)
inline constexpr double kToy2dArgminTheta2 = -8.434459855516095;

Eigen::Vector2d toy2d_loss(const Eigen::Vector2d& theta);

struct Toy2dGrad {
  Eigen::Matrix2d jacobian;  // row i = gradient of loss i
  bool at_kink = false;      // evaluated exactly on a non-smooth set
};

// Analytic gradients. On the measure-zero non-smooth sets (the switching
// line theta_2 = 0 and the log-clamp boundary) the one-sided derivative of
// the clamped branch is returned and at_kink is set.
Toy2dGrad toy2d_grad(const Eigen::Vector2d& theta);

class Toy2d final : public MultiTaskProblem {
 public:
  Toy2d();

  Eigen::Index tasks() const override { return 2; }
  Eigen::Index dim() const override { return 2; }
  const std::string& name() const override { return name_; }
  const Eigen::VectorXd& min_losses() const override { return min_losses_; }

  void eval_losses(const Eigen::VectorXd& theta,
                   Eigen::VectorXd& out) const override;
  void eval_weighted_gradient(const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& coeffs,
                              Eigen::VectorXd& out) const override;
  void eval_jacobian(const Eigen::VectorXd& theta,
                     TaskJacobian& out) const override;

 private:
  std::string name_ = "toy2d";
  Eigen::VectorXd min_losses_;
};

}  // namespace mtopt
