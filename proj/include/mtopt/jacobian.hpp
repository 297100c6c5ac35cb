// SPDX-License-Identifier: Apache-2.0
//
// Row-stacked task Jacobian: row i holds the gradient of task i's loss
// (raw kind) or of its log-shifted loss (log kind). The combination
// convention throughout the library is d = sum_i w_i * row_i = J^T w.
#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "mtopt/instrument.hpp"

namespace mtopt {

enum class GradientKind { kRaw, kLog };

class TaskJacobian {
 public:
  TaskJacobian() = default;
  TaskJacobian(Eigen::Index tasks, Eigen::Index dim,
               GradientKind kind = GradientKind::kRaw)
      : rows_(tasks, dim), kind_(kind) {
    rows_.m().setZero();
  }

  Eigen::Index tasks() const { return rows_.m().rows(); }
  Eigen::Index dim() const { return rows_.m().cols(); }
  GradientKind kind() const { return kind_; }

  Eigen::MatrixXd& rows() { return rows_.m(); }
  const Eigen::MatrixXd& rows() const { return rows_.m(); }
  auto row(Eigen::Index i) { return rows_.m().row(i); }
  auto row(Eigen::Index i) const { return rows_.m().row(i); }

  void resize(Eigen::Index tasks, Eigen::Index dim, GradientKind kind) {
    rows_.resize(tasks, dim);
    kind_ = kind;
  }

  // d = sum_i w_i * row_i.
  template <typename Derived>
  Eigen::VectorXd combine(const Eigen::MatrixBase<Derived>& w) const {
    if (w.size() != tasks())
      throw std::invalid_argument("TaskJacobian::combine: weight size mismatch");
    return rows_.m().transpose() * w;
  }

  // Gram matrix G_ij = row_i . row_j (k x k).
  Eigen::MatrixXd gram() const { return rows_.m() * rows_.m().transpose(); }

  // Log-kind Jacobian: row_i / shifted_loss_i. Requires raw kind and strictly
  // positive shifted losses.
  template <typename Derived>
  TaskJacobian to_log(const Eigen::MatrixBase<Derived>& shifted_losses) const {
    if (kind_ != GradientKind::kRaw)
      throw std::invalid_argument("TaskJacobian::to_log: already log kind");
    if (shifted_losses.size() != tasks())
      throw std::invalid_argument("TaskJacobian::to_log: loss size mismatch");
    if (shifted_losses.minCoeff() <= 0.0)
      throw std::invalid_argument(
          "TaskJacobian::to_log: shifted losses must be positive");
    TaskJacobian out(tasks(), dim(), GradientKind::kLog);
    out.rows() = shifted_losses.derived().cwiseInverse().asDiagonal() * rows_.m();
    return out;
  }

 private:
  TrackedMatrix rows_;
  GradientKind kind_ = GradientKind::kRaw;
};

}  // namespace mtopt
