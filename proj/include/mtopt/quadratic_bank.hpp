// SPDX-License-Identifier: Apache-2.0
//
// Bank of k convex quadratic tasks on R^m:
//   ell_i(theta) = s_i * (1/2 (theta - a_i)^T B_i (theta - a_i) + c_i),
// with per-task PSD curvature B_i, center a_i, offset c_i >= 0 and scale
// s_i > 0. All randomness (curvature, centers) is fixed by the spec seed.
// Curvature is either dense (B = Q diag(lambda) Q^T, Q from the QR of a
// seeded Gaussian matrix) or diagonal (lambda only) — the latter keeps
// per-gradient cost O(m) so large-m timing sweeps measure optimizer
// scaling, not matvec cost. Eigenvalues are drawn from U[0.1, 10] in both.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mtopt/problem.hpp"

namespace mtopt {

enum class Curvature { kDense, kDiagonal };

struct QuadraticBankSpec {
  Eigen::Index tasks = 2;
  Eigen::Index dim = 2;
  std::uint64_t seed = 0;
  std::vector<double> scales;   // s_i > 0; empty = all ones
  std::vector<double> offsets;  // c_i >= 0; empty = all zeros
  Curvature curvature = Curvature::kDense;
};

// One explicit task, for tests and hand-built problems.
struct QuadraticTask {
  Eigen::MatrixXd curvature;     // dense PSD B (ignored in diagonal mode)
  Eigen::VectorXd eigenvalues;   // diagonal curvature (ignored in dense mode)
  Eigen::VectorXd center;        // a_i
  double offset = 0.0;           // c_i >= 0
  double scale = 1.0;            // s_i > 0
  bool diagonal = false;
};

class QuadraticBank final : public MultiTaskProblem {
 public:
  // Generate from a spec; deterministic in spec.seed.
  explicit QuadraticBank(const QuadraticBankSpec& spec);
  // Build from explicit tasks. Rejects non-PSD curvature, negative offsets,
  // non-positive scales.
  QuadraticBank(std::string name, std::vector<QuadraticTask> tasks);

  Eigen::Index tasks() const override { return k_; }
  Eigen::Index dim() const override { return m_; }
  const std::string& name() const override { return name_; }
  const Eigen::VectorXd& min_losses() const override { return min_losses_; }

  void eval_losses(const Eigen::VectorXd& theta,
                   Eigen::VectorXd& out) const override;
  void eval_weighted_gradient(const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& coeffs,
                              Eigen::VectorXd& out) const override;
  void eval_jacobian(const Eigen::VectorXd& theta,
                     TaskJacobian& out) const override;

  const QuadraticTask& task(Eigen::Index i) const { return tasks_[size_t(i)]; }
  const QuadraticBankSpec& spec() const { return spec_; }

 private:
  void validate_and_finalize();

  QuadraticBankSpec spec_;  // empty/default when built from explicit tasks
  std::string name_;
  Eigen::Index k_ = 0, m_ = 0;
  std::vector<QuadraticTask> tasks_;
  Eigen::VectorXd min_losses_;
};

std::unique_ptr<QuadraticBank> make_quadratic_bank(const QuadraticBankSpec& s);

}  // namespace mtopt
