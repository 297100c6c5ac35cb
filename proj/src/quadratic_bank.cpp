// SPDX-License-Identifier: Apache-2.0

#include "mtopt/quadratic_bank.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <stdexcept>

#include "mtopt/rng.hpp"

namespace mtopt {
namespace {

// Draw order per task is fixed: Gaussian m x m (dense mode only), then m
// eigenvalue uniforms, then m center Gaussians. Changing this order changes
// every seeded bank, so it is part of the format.
QuadraticTask generate_task(std::mt19937_64& rng, Eigen::Index m,
                            Curvature curv, double scale, double offset) {
  QuadraticTask t;
  t.scale = scale;
  t.offset = offset;
  t.diagonal = curv == Curvature::kDiagonal;
  if (t.diagonal) {
    t.eigenvalues.resize(m);
    for (Eigen::Index i = 0; i < m; ++i)
      t.eigenvalues[i] = uniform(rng, 0.1, 10.0);
  } else {
    Eigen::MatrixXd g = gaussian_matrix(rng, m, m);
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    Eigen::VectorXd lam(m);
    for (Eigen::Index i = 0; i < m; ++i) lam[i] = uniform(rng, 0.1, 10.0);
    t.curvature = q * lam.asDiagonal() * q.transpose();
    t.curvature = 0.5 * (t.curvature + t.curvature.transpose());  // symmetrize
  }
  t.center = gaussian_vector(rng, m);
  return t;
}

}  // namespace

QuadraticBank::QuadraticBank(const QuadraticBankSpec& spec)
    : spec_(spec), k_(spec.tasks), m_(spec.dim) {
  if (k_ < 1 || m_ < 1)
    throw std::invalid_argument("QuadraticBank: need tasks >= 1, dim >= 1");
  std::vector<double> scales = spec.scales.empty()
                                   ? std::vector<double>(size_t(k_), 1.0)
                                   : spec.scales;
  std::vector<double> offsets = spec.offsets.empty()
                                    ? std::vector<double>(size_t(k_), 0.0)
                                    : spec.offsets;
  if (Eigen::Index(scales.size()) != k_ || Eigen::Index(offsets.size()) != k_)
    throw std::invalid_argument("QuadraticBank: scales/offsets length != tasks");

  name_ = "quadratic_bank_k" + std::to_string(k_) + "_m" + std::to_string(m_) +
          "_s" + std::to_string(spec.seed);
  std::mt19937_64 rng(spec.seed);
  tasks_.reserve(size_t(k_));
  for (Eigen::Index i = 0; i < k_; ++i)
    tasks_.push_back(generate_task(rng, m_, spec.curvature,
                                   scales[size_t(i)], offsets[size_t(i)]));
  validate_and_finalize();
}

QuadraticBank::QuadraticBank(std::string name, std::vector<QuadraticTask> tasks)
    : name_(std::move(name)),
      k_(Eigen::Index(tasks.size())),
      tasks_(std::move(tasks)) {
  if (tasks_.empty()) throw std::invalid_argument("QuadraticBank: no tasks");
  m_ = tasks_[0].diagonal ? tasks_[0].eigenvalues.size()
                          : tasks_[0].curvature.rows();
  validate_and_finalize();
}

void QuadraticBank::validate_and_finalize() {
  min_losses_.resize(k_);
  for (Eigen::Index i = 0; i < k_; ++i) {
    QuadraticTask& t = tasks_[size_t(i)];
    if (t.scale <= 0.0)
      throw std::invalid_argument("QuadraticBank: scale must be > 0");
    if (t.offset < 0.0)
      throw std::invalid_argument("QuadraticBank: offset must be >= 0");
    if (t.center.size() != m_)
      throw std::invalid_argument("QuadraticBank: center dim mismatch");
    if (t.diagonal) {
      if (t.eigenvalues.size() != m_ || t.eigenvalues.minCoeff() < 0.0)
        throw std::invalid_argument(
            "QuadraticBank: diagonal curvature must be nonnegative");
    } else {
      if (t.curvature.rows() != m_ || t.curvature.cols() != m_)
        throw std::invalid_argument("QuadraticBank: curvature shape mismatch");
      if (!t.curvature.isApprox(t.curvature.transpose(), 1e-12))
        throw std::invalid_argument("QuadraticBank: curvature not symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          t.curvature, Eigen::EigenvaluesOnly);
      const double scale_ref = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
      if (es.eigenvalues().minCoeff() < -1e-10 * scale_ref)
        throw std::invalid_argument("QuadraticBank: curvature not PSD");
    }
    // infimum s_i * c_i is attained at the center
    min_losses_[i] = t.scale * t.offset;
  }
}

void QuadraticBank::eval_losses(const Eigen::VectorXd& theta,
                                Eigen::VectorXd& out) const {
  out.resize(k_);
  Eigen::VectorXd q(m_);
  for (Eigen::Index i = 0; i < k_; ++i) {
    const QuadraticTask& t = tasks_[size_t(i)];
    q = theta - t.center;
    const double quad = t.diagonal
                            ? q.dot(t.eigenvalues.cwiseProduct(q))
                            : q.dot(t.curvature * q);
    out[i] = t.scale * (0.5 * quad + t.offset);
  }
}

void QuadraticBank::eval_weighted_gradient(const Eigen::VectorXd& theta,
                                           const Eigen::VectorXd& coeffs,
                                           Eigen::VectorXd& out) const {
  if (coeffs.size() != k_)
    throw std::invalid_argument("QuadraticBank: coeffs size mismatch");
  out.setZero(m_);
  for (Eigen::Index i = 0; i < k_; ++i) {
    const QuadraticTask& t = tasks_[size_t(i)];
    const double w = coeffs[i] * t.scale;
    if (t.diagonal)
      out.array() += w * t.eigenvalues.array() * (theta - t.center).array();
    else
      out.noalias() += w * (t.curvature * (theta - t.center));
  }
}

void QuadraticBank::eval_jacobian(const Eigen::VectorXd& theta,
                                  TaskJacobian& out) const {
  if (out.tasks() != k_ || out.dim() != m_ || out.kind() != GradientKind::kRaw)
    out.resize(k_, m_, GradientKind::kRaw);
  for (Eigen::Index i = 0; i < k_; ++i) {
    const QuadraticTask& t = tasks_[size_t(i)];
    if (t.diagonal)
      out.row(i) =
          (t.scale * t.eigenvalues.array() * (theta - t.center).array())
              .matrix()
              .transpose();
    else
      out.row(i).noalias() =
          (t.scale * (t.curvature * (theta - t.center))).transpose();
  }
}

std::unique_ptr<QuadraticBank> make_quadratic_bank(const QuadraticBankSpec& s) {
  return std::make_unique<QuadraticBank>(s);
}

}  // namespace mtopt
