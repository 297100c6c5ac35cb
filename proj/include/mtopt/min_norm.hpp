// SPDX-License-Identifier: Apache-2.0
//
// Min-norm point of the convex hull of k row vectors: solve
//   min_{z in simplex} 1/2 || J^T z ||^2
// by projected gradient descent on the k x k Gram matrix, with a
// Frank-Wolfe duality-gap certificate as the stopping rule. This is the
// dual program behind MGDA-style gradient combination; d* = J^T z* is the
// common descent direction.
#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "mtopt/simplex.hpp"

namespace mtopt {

struct MinNormResult {
  Eigen::VectorXd z;       // combination weights on the simplex
  Eigen::VectorXd d;       // d = J^T z, the min-norm hull point
  double objective = 0;    // 1/2 ||d||^2
  double duality_gap = 0;  // z^T G z - min_i (G z)_i at exit (FW certificate)
  int iterations = 0;
  bool converged = false;
};

// Largest eigenvalue bound for the PSD Gram matrix: a few power iterations,
// floored by the largest diagonal entry (a valid lower bound that keeps the
// step size finite on degenerate inputs).
template <typename Derived>
double gram_lipschitz_bound(const Eigen::MatrixBase<Derived>& gram) {
  const Eigen::Index k = gram.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(k, 1.0 / std::sqrt(double(k)));
  double lam = 0;
  for (int it = 0; it < 20; ++it) {
    Eigen::VectorXd y = gram * x;
    double n = y.norm();
    if (n <= 0) break;
    lam = x.dot(y);
    x = y / n;
  }
  // small headroom: power iteration approaches lambda_max from below
  return std::max(1.01 * lam, gram.diagonal().maxCoeff());
}

// rows: k x m, one task gradient per row. tol is the duality-gap threshold;
// on exhaustion the best (lowest-objective) iterate is returned with
// converged = false.
template <typename Derived>
MinNormResult solve_min_norm_on_simplex(const Eigen::MatrixBase<Derived>& rows,
                                        double tol = 1e-8,
                                        int max_iter = 1000) {
  if (rows.rows() == 0) throw std::invalid_argument("min_norm: no rows");
  if (!rows.allFinite()) throw std::invalid_argument("min_norm: non-finite rows");
  if (tol < 0 || max_iter < 1)
    throw std::invalid_argument("min_norm: bad tol/max_iter");
  const Eigen::Index k = rows.rows();

  MinNormResult res;
  if (k == 1) {
    res.z = Eigen::VectorXd::Ones(1);
    res.d = rows.row(0).transpose();
    res.objective = 0.5 * res.d.squaredNorm();
    res.converged = true;
    return res;
  }

  const Eigen::MatrixXd gram = rows * rows.transpose();
  double lip = gram_lipschitz_bound(gram);
  if (lip <= 0) lip = 1.0;  // zero Gram: any simplex point is optimal

  Eigen::VectorXd z = Eigen::VectorXd::Constant(k, 1.0 / double(k));
  Eigen::VectorXd best_z = z;
  double best_obj = 0.5 * z.dot(gram * z);
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    Eigen::VectorXd g = gram * z;  // gradient of 1/2 z^T G z
    double obj = 0.5 * z.dot(g);
    if (obj < best_obj) {
      best_obj = obj;
      best_z = z;
    }
    // FW gap: z^T G z - min_i (G z)_i >= primal-dual gap at z
    res.duality_gap = z.dot(g) - g.minCoeff();
    if (res.duality_gap <= tol) {
      res.converged = true;
      break;
    }
    z = project_simplex(z - g / lip);
  }

  if (!res.converged) {
    z = best_z;
    Eigen::VectorXd g = gram * z;
    res.duality_gap = z.dot(g) - g.minCoeff();
    res.converged = res.duality_gap <= tol;
  }
  res.z = z;
  res.d = rows.transpose() * z;
  res.objective = 0.5 * res.d.squaredNorm();
  return res;
}

}  // namespace mtopt
