// SPDX-License-Identifier: Apache-2.0

#include "mtopt/toy2d.hpp"

#include <cmath>
#include <stdexcept>

namespace mtopt {
namespace {

constexpr double kClamp = 5e-6;  // floor inside the log terms

struct Pieces {
  double h1, h2;      // log-valley arguments
  double f1, f2;      // log terms (clamped)
  double g1, g2;      // quadratic bowls
  double c1, c2;      // switching coefficients, c1 active for theta_2 > 0
};

Pieces eval_pieces(double t1, double t2) {
  Pieces p;
  // The tanh terms enter the two log valleys with opposite signs: the first
  // valley tracks theta_1 = 2*tanh(theta_2) - 7, the second
  // theta_1 = 7 - 2*tanh(theta_2), so the two valleys converge onto the
  // switching line from opposite sides and meet the bowls at theta_1 = -+7.
  p.h1 = 0.5 * (-t1 - 7.0) - std::tanh(-t2);
  p.h2 = 0.5 * (-t1 + 3.0) + std::tanh(-t2) + 2.0;
  p.f1 = std::log(std::max(std::abs(p.h1), kClamp)) + 6.0;
  p.f2 = std::log(std::max(std::abs(p.h2), kClamp)) + 6.0;
  p.g1 = ((-t1 + 7.0) * (-t1 + 7.0) + 0.1 * (-t2 - 8.0) * (-t2 - 8.0)) / 10.0 -
         20.0;
  p.g2 = ((-t1 - 7.0) * (-t1 - 7.0) + 0.1 * (-t2 - 8.0) * (-t2 - 8.0)) / 10.0 -
         20.0;
  p.c1 = std::max(std::tanh(0.5 * t2), 0.0);
  p.c2 = std::max(std::tanh(-0.5 * t2), 0.0);
  return p;
}

}  // namespace

Eigen::Vector2d toy2d_loss(const Eigen::Vector2d& theta) {
  if (!theta.allFinite())
    throw std::invalid_argument("toy2d_loss: non-finite theta");
  const Pieces p = eval_pieces(theta[0], theta[1]);
  return {0.1 * (p.c1 * p.f1 + p.c2 * p.g1), p.c1 * p.f2 + p.c2 * p.g2};
}

Toy2dGrad toy2d_grad(const Eigen::Vector2d& theta) {
  if (!theta.allFinite())
    throw std::invalid_argument("toy2d_grad: non-finite theta");
  const double t1 = theta[0], t2 = theta[1];
  const Pieces p = eval_pieces(t1, t2);
  Toy2dGrad out;

  // log-valley gradients: d/dx log|h| = h'/h on the live branch, 0 where the
  // clamp flattens the term (boundary inclusive, as clamp autodiff has it).
  // sech^2(-t2) = sech^2(t2).
  const double sech2 = 1.0 / (std::cosh(t2) * std::cosh(t2));
  Eigen::Vector2d df1 = Eigen::Vector2d::Zero();
  Eigen::Vector2d df2 = Eigen::Vector2d::Zero();
  if (std::abs(p.h1) >= kClamp) df1 << -0.5 / p.h1, sech2 / p.h1;
  if (std::abs(p.h2) >= kClamp) df2 << -0.5 / p.h2, -sech2 / p.h2;
  if (std::abs(p.h1) == kClamp || std::abs(p.h2) == kClamp)
    out.at_kink = true;  // exactly on a clamp boundary

  const Eigen::Vector2d dg1((t1 - 7.0) / 5.0, (t2 + 8.0) / 50.0);
  const Eigen::Vector2d dg2((t1 + 7.0) / 5.0, (t2 + 8.0) / 50.0);

  // switching coefficients: max(tanh, 0) passes the tanh derivative wherever
  // tanh >= 0 (clamp boundary inclusive, as autodiff has it), so on the line
  // t2 = 0 BOTH coefficients are live — this is what lets optimizers leave
  // the otherwise loss-flat ridge at theta = (0, 0)
  const double th = std::tanh(0.5 * t2);
  const double s2h = 1.0 - th * th;  // sech^2(0.5 t2)
  Eigen::Vector2d dc1 = Eigen::Vector2d::Zero();
  Eigen::Vector2d dc2 = Eigen::Vector2d::Zero();
  if (t2 >= 0.0) dc1[1] = 0.5 * s2h;
  if (t2 <= 0.0) dc2[1] = -0.5 * s2h;
  if (t2 == 0.0) out.at_kink = true;

  out.jacobian.row(0) =
      0.1 * (p.c1 * df1 + p.f1 * dc1 + p.c2 * dg1 + p.g1 * dc2).transpose();
  out.jacobian.row(1) =
      (p.c1 * df2 + p.f2 * dc1 + p.c2 * dg2 + p.g2 * dc2).transpose();
  return out;
}

Toy2d::Toy2d() {
  min_losses_ = Eigen::Vector2d(kToy2dMin1, kToy2dMin2);
}

void Toy2d::eval_losses(const Eigen::VectorXd& theta,
                        Eigen::VectorXd& out) const {
  out = toy2d_loss(Eigen::Vector2d(theta[0], theta[1]));
}

void Toy2d::eval_weighted_gradient(const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& coeffs,
                                   Eigen::VectorXd& out) const {
  const Toy2dGrad g = toy2d_grad(Eigen::Vector2d(theta[0], theta[1]));
  out = g.jacobian.transpose() * coeffs;
}

void Toy2d::eval_jacobian(const Eigen::VectorXd& theta,
                          TaskJacobian& out) const {
  if (out.tasks() != 2 || out.dim() != 2 || out.kind() != GradientKind::kRaw)
    out.resize(2, 2, GradientKind::kRaw);
  out.rows() = toy2d_grad(Eigen::Vector2d(theta[0], theta[1])).jacobian;
}

}  // namespace mtopt
