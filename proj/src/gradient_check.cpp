// SPDX-License-Identifier: Apache-2.0

#include "mtopt/gradient_check.hpp"

#include <cmath>
#include <stdexcept>

namespace mtopt {

GradientCheckReport check_gradients(const MultiTaskProblem& p,
                                    const Eigen::VectorXd& theta, double h,
                                    double tol, double abs_floor) {
  if (h <= 0.0) throw std::invalid_argument("check_gradients: h must be > 0");
  if (theta.size() != p.dim())
    throw std::invalid_argument("check_gradients: theta dim mismatch");

  const Eigen::Index k = p.tasks(), m = p.dim();
  GradientCheckReport rep;

  TaskJacobian jac(k, m);
  p.eval_jacobian(theta, jac);
  rep.analytic = jac.rows();

  rep.numeric.resize(k, m);
  Eigen::VectorXd tp = theta, tm = theta, lp(k), lm(k);
  for (Eigen::Index j = 0; j < m; ++j) {
    tp[j] = theta[j] + h;
    tm[j] = theta[j] - h;
    p.eval_losses(tp, lp);
    p.eval_losses(tm, lm);
    rep.numeric.col(j) = (lp - lm) / (2.0 * h);
    tp[j] = theta[j];
    tm[j] = theta[j];
  }

  rep.max_err = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double a = rep.analytic(i, j), n = rep.numeric(i, j);
      const double denom = std::max(std::abs(a), std::abs(n));
      const double err = denom < abs_floor ? std::abs(a - n)
                                           : std::abs(a - n) / denom;
      if (err > rep.max_err) {
        rep.max_err = err;
        rep.worst_task = i;
        rep.worst_coord = j;
      }
    }
  }
  rep.pass = rep.max_err <= tol;
  return rep;
}

}  // namespace mtopt
