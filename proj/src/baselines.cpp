// SPDX-License-Identifier: Apache-2.0

#include "mtopt/baselines.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <sstream>

#include "mtopt/errors.hpp"
#include "mtopt/rng.hpp"
#include "mtopt/simplex.hpp"

namespace mtopt {

Eigen::VectorXd ls_direction(const TaskJacobian& jac) {
  return jac.rows().colwise().mean().transpose();
}

Eigen::VectorXd si_direction(const Eigen::VectorXd& shifted_losses,
                             const TaskJacobian& jac) {
  if (shifted_losses.size() != jac.tasks())
    throw std::invalid_argument("si_direction: loss size mismatch");
  if (shifted_losses.minCoeff() <= 0.0)
    throw std::invalid_argument("si_direction: losses must be positive");
  return jac.combine(shifted_losses.cwiseInverse());
}

Eigen::VectorXd rlw_weights(Eigen::Index tasks, std::mt19937_64& rng) {
  if (tasks < 1) throw std::invalid_argument("rlw_weights: tasks >= 1");
  return softmax(gaussian_vector(rng, tasks));
}

MinNormResult mgda_direction(const TaskJacobian& jac, double tol,
                             int max_iter) {
  return solve_min_norm_on_simplex(jac.rows(), tol, max_iter);
}

Eigen::VectorXd pcgrad_direction(const TaskJacobian& jac,
                                 std::mt19937_64& rng) {
  const Eigen::Index k = jac.tasks();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(jac.dim());
  Eigen::VectorXd v(jac.dim());
  for (Eigen::Index i = 0; i < k; ++i) {
    v = jac.row(i).transpose();
    // visit the other tasks in random order, deflecting on conflict
    for (Eigen::Index j : shuffled_indices(rng, k)) {
      if (j == i) continue;
      const double dot = v.dot(jac.row(j));
      if (dot < 0.0) {
        const double nj = jac.row(j).squaredNorm();
        if (nj > 0.0) v -= (dot / nj) * jac.row(j).transpose();
      }
    }
    d += v;
  }
  return d / double(k);
}

namespace {

// FW gap of a convex objective over the simplex at w with gradient g.
double simplex_fw_gap(const Eigen::VectorXd& w, const Eigen::VectorXd& g) {
  return w.dot(g) - g.minCoeff();
}

}  // namespace

CagradResult cagrad_direction(const TaskJacobian& jac, double c, double tol,
                              int max_iter) {
  if (c < 0.0) throw std::invalid_argument("cagrad_direction: c must be >= 0");
  const Eigen::Index k = jac.tasks();
  CagradResult res;
  const Eigen::VectorXd w0 = Eigen::VectorXd::Constant(k, 1.0 / double(k));
  if (c == 0.0) {  // plain averaging, exactly
    res.d = jac.combine(w0);
    res.w_star = w0;
    res.weights = w0;
    return res;
  }

  const Eigen::MatrixXd gram = jac.gram();
  const Eigen::VectorXd gw0 = gram * w0;         // G w0
  const double n0 = std::sqrt(std::max(w0.dot(gw0), 0.0));  // ||g0||

  // minimize F(w) = w.Gw0 + c*n0*sqrt(w.Gw) over the simplex by projected
  // gradient with backtracking; F is convex, so the FW gap certifies exit
  Eigen::VectorXd w = w0;
  double lip = gram_lipschitz_bound(gram);
  if (lip <= 0) lip = 1.0;
  auto value = [&](const Eigen::VectorXd& x) {
    return x.dot(gw0) + c * n0 * std::sqrt(std::max(x.dot(gram * x), 0.0));
  };
  auto gradient = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd gx = gram * x;
    const double nx = std::sqrt(std::max(x.dot(gx), 1e-300));
    return (gw0 + (c * n0 / nx) * gx).eval();
  };
  double fw = value(w);
  res.converged = false;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd g = gradient(w);
    res.gap = simplex_fw_gap(w, g);
    if (res.gap <= tol) {
      res.converged = true;
      break;
    }
    double stepsz = 1.0 / lip;
    Eigen::VectorXd cand;
    for (int bt = 0; bt < 60; ++bt) {
      cand = project_simplex(w - stepsz * g);
      if (value(cand) <= fw) break;
      stepsz *= 0.5;
    }
    w = cand;
    fw = value(w);
  }
  res.w_star = w;

  const Eigen::VectorXd gw = jac.combine(w);
  const double nw = gw.norm();
  if (nw < 1e-15 || n0 == 0.0) {
    // degenerate: fall back to the average direction
    res.weights = w0;
    res.d = jac.combine(w0);
    return res;
  }
  const double scale = c * n0 / nw;
  res.weights = w0 + scale * w;
  res.d = jac.combine(w0) + scale * gw;
  return res;
}

ImtlgResult imtlg_direction(const TaskJacobian& jac) {
  const Eigen::Index k = jac.tasks();
  ImtlgResult res;
  Eigen::MatrixXd units(k, jac.dim());
  for (Eigen::Index i = 0; i < k; ++i) {
    const double n = jac.row(i).norm();
    if (n == 0.0)
      throw std::invalid_argument("imtlg_direction: zero task gradient");
    units.row(i) = jac.row(i) / n;
  }

  // P(j,i) = row_j . u_i; equal-projection equations d.u_0 = d.u_i with
  // d = sum_j w_j row_j, plus sum w = 1
  const Eigen::MatrixXd proj = jac.rows() * units.transpose();
  Eigen::MatrixXd sys(k, k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 1; i < k; ++i)
    sys.row(i - 1) = (proj.col(0) - proj.col(i)).transpose();
  sys.row(k - 1).setOnes();
  rhs[k - 1] = 1.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
  if (lu.isInvertible()) {
    res.weights = lu.solve(rhs);
  } else {
    res.singular = true;
    res.weights = sys.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV)
                      .solve(rhs);
  }
  res.outside_simplex = res.weights.minCoeff() < 0.0;
  res.d = jac.combine(res.weights);
  return res;
}

NashResult nashmtl_direction(const TaskJacobian& jac, double tol,
                             int max_iter) {
  const Eigen::Index k = jac.tasks();
  const Eigen::MatrixXd gram = jac.gram();
  NashResult res;

  // Solve the bargaining first-order condition G w = 1/w, w > 0, by damped
  // Newton on phi(w) = G w - 1/w. Its Jacobian G + diag(1/w^2) is positive
  // definite whenever G is PSD, so the Newton step is a descent direction
  // for ||phi||^2 and plain backtracking suffices. Note the system has no
  // positive solution when the tasks admit no common descent direction
  // (e.g. exactly opposing gradients); the best iterate is returned then
  // with converged = false.
  auto residual = [&](const Eigen::VectorXd& x) {
    return (gram * x - x.cwiseInverse()).eval();
  };
  // Scale-aware start: for a diagonal Gram the exact solution is
  // w_i = G_ii^{-1/2}, which also handles badly scaled task gradients.
  Eigen::VectorXd w(k);
  for (Eigen::Index i = 0; i < k; ++i)
    w[i] = 1.0 / std::sqrt(std::max(gram(i, i), 1e-300));
  Eigen::VectorXd r = residual(w);
  double fr = r.squaredNorm();
  Eigen::VectorXd best_w = w;
  double best_norm = std::sqrt(fr);
  res.converged = false;
  Eigen::MatrixXd newton_sys(k, k);
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    if (best_norm <= tol) {
      res.converged = true;
      break;
    }
    newton_sys = gram;
    newton_sys.diagonal() += w.array().square().inverse().matrix();
    const Eigen::VectorXd dw = newton_sys.ldlt().solve(-r);
    if (!dw.allFinite()) break;
    // fraction-to-boundary: keep every component strictly positive
    double stepsz = 1.0;
    for (Eigen::Index i = 0; i < k; ++i)
      if (dw[i] < 0.0) stepsz = std::min(stepsz, -0.9 * w[i] / dw[i]);
    Eigen::VectorXd cand;
    double fc = fr;
    for (int bt = 0; bt < 60; ++bt) {
      cand = w + stepsz * dw;
      fc = residual(cand).squaredNorm();
      if (fc < fr) break;
      stepsz *= 0.5;
    }
    if (fc >= fr) break;  // line search stalled; keep the best iterate
    w = cand;
    r = residual(w);
    fr = r.squaredNorm();
    if (std::sqrt(fr) < best_norm) {
      best_norm = std::sqrt(fr);
      best_w = w;
    }
  }
  res.weights = best_w;
  res.residual = best_norm;
  res.converged = best_norm <= tol;
  res.d = jac.combine(best_w);
  return res;
}

ProbeResult amortized_cagrad_probe(InstrumentedProblem& prob,
                                   const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& w, double c,
                                   double alpha_probe) {
  if (alpha_probe <= 0.0)
    throw std::invalid_argument("amortized_cagrad_probe: alpha_probe > 0");
  const Eigen::Index k = prob.tasks();
  if (w.size() != k)
    throw std::invalid_argument("amortized_cagrad_probe: weight size");
  const Eigen::VectorXd w0 = Eigen::VectorXd::Constant(k, 1.0 / double(k));

  Eigen::VectorXd l0(k), lp(k), g(prob.dim());
  prob.losses(theta, l0);                       // shared base point

  prob.weighted_gradient(theta, w0, g);         // g0
  prob.losses(theta - alpha_probe * g, lp);
  const Eigen::VectorXd eta0 = (l0 - lp) / alpha_probe;  // ~ G^T g0

  prob.weighted_gradient(theta, w, g);          // g_w
  prob.losses(theta - alpha_probe * g, lp);
  const Eigen::VectorXd etaw = (l0 - lp) / alpha_probe;  // ~ G^T g_w

  ProbeResult res;
  const double n0sq = w0.dot(eta0);  // ~ ||g0||^2
  const double nwsq = w.dot(etaw);   // ~ ||g_w||^2
  if (n0sq < 0.0 || nwsq <= 0.0) {
    res.rejected = true;
    res.grad = Eigen::VectorXd::Zero(k);
    return res;
  }
  res.grad = eta0 + c * std::sqrt(n0sq / nwsq) * etaw;
  return res;
}

ProbeResult amortized_nashmtl_probe(InstrumentedProblem& prob,
                                    const Eigen::VectorXd& theta,
                                    const Eigen::VectorXd& w,
                                    double alpha_probe) {
  if (alpha_probe <= 0.0)
    throw std::invalid_argument("amortized_nashmtl_probe: alpha_probe > 0");
  const Eigen::Index k = prob.tasks();
  if (w.size() != k || w.minCoeff() <= 0.0)
    throw std::invalid_argument("amortized_nashmtl_probe: w must be positive");

  Eigen::VectorXd l0(k), lp(k), g(prob.dim());
  prob.losses(theta, l0);                       // shared base point

  prob.weighted_gradient(theta, w, g);          // g_w
  prob.losses(theta - alpha_probe * g, lp);
  const Eigen::VectorXd gw_probe = (l0 - lp) / alpha_probe;  // ~ G w

  const Eigen::VectorXd r = gw_probe - w.cwiseInverse();
  prob.weighted_gradient(theta, r, g);          // J^T r
  prob.losses(theta - alpha_probe * g, lp);
  const Eigen::VectorXd gr_probe = (l0 - lp) / alpha_probe;  // ~ G r

  ProbeResult res;
  res.grad = 2.0 * gr_probe + 2.0 * r.cwiseQuotient(w.cwiseProduct(w));
  return res;
}

BaselineOptimizer::BaselineOptimizer(const Eigen::VectorXd& theta0,
                                     Eigen::Index tasks,
                                     const BaselineOptions& opts)
    : opts_(opts), k_(tasks), rng_(opts.seed) {
  if (tasks < 1) throw std::invalid_argument("BaselineOptimizer: tasks >= 1");
  if (opts.alpha <= 0)
    throw std::invalid_argument("BaselineOptimizer: alpha must be > 0");
  if (opts.update_every < 1)
    throw std::invalid_argument("BaselineOptimizer: update_every >= 1");
  if (opts.method == Method::kFamo || opts.method == Method::kFamoExactDual)
    throw std::invalid_argument(
        "BaselineOptimizer: FAMO methods use FamoOptimizer");
  if (opts.method == Method::kFixedWeights &&
      opts.fixed_weights.size() != tasks)
    throw std::invalid_argument("BaselineOptimizer: fixed_weights size");
  theta_.resize(theta0.size());
  theta_.v() = theta0;
  dir_.resize(theta0.size());
  dir_.v().setZero();
  if (opts.model_updater == ModelUpdater::kMoment)
    model_adam_.emplace(theta0.size(), AdamConfig{.lr = opts.alpha});
}

void BaselineOptimizer::apply_update(InstrumentedProblem&) {
  if (!dir_.v().allFinite()) {
    std::ostringstream msg;
    msg << "BaselineOptimizer: non-finite direction at step " << step_;
    throw NumericalError(msg.str());
  }
  if (model_adam_) {
    model_adam_->step(theta_.v(), dir_.v());
  } else {
    theta_.v() -= opts_.alpha * dir_.v();
  }
  if (!theta_.v().allFinite()) {
    std::ostringstream msg;
    msg << "BaselineOptimizer: non-finite parameters at step " << step_;
    throw NumericalError(msg.str());
  }
}

BaselineStepInfo BaselineOptimizer::step(InstrumentedProblem& prob) {
  BaselineStepInfo info;
  const bool refresh =
      cached_weights_.size() == 0 || step_ % opts_.update_every == 0;

  switch (opts_.method) {
    case Method::kLs: {
      info.weights = Eigen::VectorXd::Constant(k_, 1.0 / double(k_));
      prob.weighted_gradient(theta_.v(), info.weights, dir_.v());
      break;
    }
    case Method::kSi: {
      prob.losses(theta_.v(), losses_);
      shifted_ = losses_ - prob.min_losses();
      shifted_.array() += opts_.epsilon;
      if (shifted_.minCoeff() <= 0.0)
        throw NumericalError("BaselineOptimizer: nonpositive shifted loss");
      info.weights = shifted_.cwiseInverse();
      prob.weighted_gradient(theta_.v(), info.weights, dir_.v());
      break;
    }
    case Method::kRlw: {
      info.weights = rlw_weights(k_, rng_);
      prob.weighted_gradient(theta_.v(), info.weights, dir_.v());
      break;
    }
    case Method::kFixedWeights: {
      info.weights = opts_.fixed_weights;
      prob.weighted_gradient(theta_.v(), info.weights, dir_.v());
      break;
    }
    case Method::kMgda: {
      prob.jacobian(theta_.v(), jac_);
      const MinNormResult mn =
          mgda_direction(jac_, opts_.solver_tol, opts_.solver_max_iter);
      info.weights = mn.z;
      info.solver_converged = mn.converged;
      dir_.v() = mn.d;
      break;
    }
    case Method::kPcgrad: {
      prob.jacobian(theta_.v(), jac_);
      dir_.v() = pcgrad_direction(jac_, rng_);
      // surgery has no convex-combination weights; record the averaging ones
      info.weights = Eigen::VectorXd::Constant(k_, 1.0 / double(k_));
      break;
    }
    case Method::kCagrad: {
      prob.jacobian(theta_.v(), jac_);
      if (refresh) {
        const CagradResult cg =
            cagrad_direction(jac_, opts_.cagrad_c, opts_.solver_tol,
                             opts_.solver_max_iter);
        cached_weights_ = cg.w_star;
        info.solver_converged = cg.converged;
      }
      // re-apply the cached inner weights to the current Jacobian
      const Eigen::VectorXd w0 =
          Eigen::VectorXd::Constant(k_, 1.0 / double(k_));
      const Eigen::VectorXd g0 = jac_.combine(w0);
      const Eigen::VectorXd gw = jac_.combine(cached_weights_);
      const double n0 = g0.norm(), nw = gw.norm();
      if (opts_.cagrad_c == 0.0 || nw < 1e-15) {
        info.weights = w0;
        dir_.v() = g0;
      } else {
        const double scale = opts_.cagrad_c * n0 / nw;
        info.weights = w0 + scale * cached_weights_;
        dir_.v() = g0 + scale * gw;
      }
      break;
    }
    case Method::kImtlg: {
      prob.jacobian(theta_.v(), jac_);
      const ImtlgResult im = imtlg_direction(jac_);
      info.weights = im.weights;
      info.solver_converged = !im.singular;
      dir_.v() = im.d;
      break;
    }
    case Method::kNashmtl: {
      prob.jacobian(theta_.v(), jac_);
      if (refresh) {
        const NashResult nr = nashmtl_direction(jac_, opts_.solver_tol,
                                                opts_.solver_max_iter);
        cached_weights_ = nr.weights;
        info.solver_converged = nr.converged;
      }
      info.weights = cached_weights_;
      dir_.v() = jac_.combine(cached_weights_);
      break;
    }
    default:
      throw std::invalid_argument("BaselineOptimizer: unsupported method");
  }

  info.d_norm = dir_.v().norm();
  apply_update(prob);
  ++step_;
  return info;
}

void BaselineOptimizer::restore(const Eigen::VectorXd& theta,
                                std::int64_t step) {
  if (theta.size() != theta_.size())
    throw std::invalid_argument("BaselineOptimizer::restore: size mismatch");
  theta_.v() = theta;
  step_ = step;
}

}  // namespace mtopt
