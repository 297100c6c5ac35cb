// SPDX-License-Identifier: Apache-2.0
//
// Central-difference validation of analytic task gradients.
#pragma once

#include <Eigen/Dense>

#include "mtopt/problem.hpp"

namespace mtopt {

struct GradientCheckReport {
  bool pass = false;
  double max_err = 0.0;          // worst relative (or small-scale absolute) error
  Eigen::Index worst_task = -1;
  Eigen::Index worst_coord = -1;
  Eigen::MatrixXd analytic;      // k x m
  Eigen::MatrixXd numeric;       // k x m central differences
};

// Compares the problem's Jacobian at theta against (ell(theta+h e_j) -
// ell(theta-h e_j)) / 2h. Entries with magnitude below `abs_floor` are
// compared absolutely, the rest relatively. Throws std::invalid_argument
// for h <= 0.
GradientCheckReport check_gradients(const MultiTaskProblem& p,
                                    const Eigen::VectorXd& theta,
                                    double h = 1e-6, double tol = 1e-4,
                                    double abs_floor = 1e-6);

}  // namespace mtopt
