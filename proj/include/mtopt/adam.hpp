// SPDX-License-Identifier: Apache-2.0
//
// Adam moment updater with L2 weight decay folded into the gradient before
// moment accumulation (torch.optim.Adam semantics, not AdamW). Used both for
// model parameters and for task-weight logits.
#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "mtopt/errors.hpp"
#include "mtopt/instrument.hpp"

namespace mtopt {

// How an optimizer moves the model parameters along its direction: a plain
// gradient-descent step or an Adam step on the combined direction.
enum class ModelUpdater { kPlainGd, kMoment };

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;          // added after the square root
  double weight_decay = 0.0;  // coupled: g <- g + weight_decay * param
};

// First/second-moment state for one parameter vector. Moments are tracked
// by the live-buffer gauge, so optimizers pay for what they hold.
class AdamUpdater {
 public:
  AdamUpdater(Eigen::Index n, const AdamConfig& cfg) : cfg_(cfg) {
    m_.resize(n);
    v_.resize(n);
    m_.v().setZero();
    v_.v().setZero();
  }

  // Advance the moments with grad and write the updated parameters to out
  // (out may alias param or grad; param itself is read-only here). Throws
  // NumericalError on a non-finite gradient; all state is untouched then.
  void step_to(const Eigen::VectorXd& param, const Eigen::VectorXd& grad,
               Eigen::VectorXd& out) {
    if (param.size() != m_.size() || grad.size() != m_.size())
      throw std::invalid_argument("AdamUpdater: size mismatch");
    if (!grad.allFinite())
      throw NumericalError("AdamUpdater: non-finite gradient, update skipped");

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    auto g = (grad.array() + cfg_.weight_decay * param.array()).eval();
    m_.v().array() = cfg_.beta1 * m_.v().array() + (1.0 - cfg_.beta1) * g;
    v_.v().array() = cfg_.beta2 * v_.v().array() + (1.0 - cfg_.beta2) * g * g;
    out.resizeLike(param);
    out.array() = param.array() -
                  cfg_.lr * (m_.v().array() / bc1) /
                      ((v_.v().array() / bc2).sqrt() + cfg_.eps);
  }

  // In-place update of param from grad.
  void step(Eigen::VectorXd& param, const Eigen::VectorXd& grad) {
    step_to(param, grad, param);
  }

  std::int64_t step_count() const { return t_; }
  const Eigen::VectorXd& exp_avg() const { return m_.v(); }
  const Eigen::VectorXd& exp_avg_sq() const { return v_.v(); }
  const AdamConfig& config() const { return cfg_; }

  // Checkpoint support: load moments and step counter verbatim.
  void restore(const Eigen::VectorXd& m, const Eigen::VectorXd& v,
               std::int64_t t) {
    if (m.size() != m_.size() || v.size() != v_.size())
      throw std::invalid_argument("AdamUpdater::restore: size mismatch");
    m_.v() = m;
    v_.v() = v;
    t_ = t;
  }

 private:
  AdamConfig cfg_;
  TrackedVector m_;
  TrackedVector v_;
  std::int64_t t_ = 0;
};

}  // namespace mtopt
