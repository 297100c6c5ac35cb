// SPDX-License-Identifier: Apache-2.0
//
// Adaptive task weighting: weight formulas, the amortized step's cost and
// state contracts, logit dynamics, rollback safety, and the exact-dual
// oracle it tracks.
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "mtopt/adam.hpp"
#include "mtopt/errors.hpp"
#include "mtopt/famo.hpp"
#include "mtopt/instrument.hpp"
#include "mtopt/min_norm.hpp"
#include "mtopt/problem.hpp"
#include "mtopt/quadratic_bank.hpp"
#include "mtopt/rng.hpp"
#include "mtopt/simplex.hpp"

using namespace mtopt;

namespace {

QuadraticTask diag_task(std::initializer_list<double> lam,
                        std::initializer_list<double> center, double offset,
                        double scale = 1.0) {
  QuadraticTask t;
  t.diagonal = true;
  t.eigenvalues = Eigen::VectorXd(Eigen::Index(lam.size()));
  Eigen::Index i = 0;
  for (double x : lam) t.eigenvalues[i++] = x;
  t.center = Eigen::VectorXd(Eigen::Index(center.size()));
  i = 0;
  for (double x : center) t.center[i++] = x;
  t.offset = offset;
  t.scale = scale;
  return t;
}

// Forwards to an inner problem, but poisons the n-th losses call with a NaN.
class PoisonNthLosses final : public MultiTaskProblem {
 public:
  PoisonNthLosses(const MultiTaskProblem& inner, int poison_call)
      : inner_(inner), poison_call_(poison_call) {}

  Eigen::Index tasks() const override { return inner_.tasks(); }
  Eigen::Index dim() const override { return inner_.dim(); }
  const std::string& name() const override { return name_; }
  const Eigen::VectorXd& min_losses() const override {
    return inner_.min_losses();
  }
  void eval_losses(const Eigen::VectorXd& theta,
                   Eigen::VectorXd& out) const override {
    inner_.eval_losses(theta, out);
    if (++calls_ == poison_call_)
      out[0] = std::numeric_limits<double>::quiet_NaN();
  }
  void eval_weighted_gradient(const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& coeffs,
                              Eigen::VectorXd& out) const override {
    inner_.eval_weighted_gradient(theta, coeffs, out);
  }
  void eval_jacobian(const Eigen::VectorXd& theta,
                     TaskJacobian& out) const override {
    inner_.eval_jacobian(theta, out);
  }

 private:
  const MultiTaskProblem& inner_;
  int poison_call_;
  mutable int calls_ = 0;
  std::string name_ = "poisoned";
};

// Claims infima far above the true ones, making shifted losses negative.
class InflatedMinima final : public MultiTaskProblem {
 public:
  explicit InflatedMinima(const MultiTaskProblem& inner)
      : inner_(inner),
        mins_((inner.min_losses().array() + 10.0).matrix()) {}

  Eigen::Index tasks() const override { return inner_.tasks(); }
  Eigen::Index dim() const override { return inner_.dim(); }
  const std::string& name() const override { return name_; }
  const Eigen::VectorXd& min_losses() const override { return mins_; }
  void eval_losses(const Eigen::VectorXd& theta,
                   Eigen::VectorXd& out) const override {
    inner_.eval_losses(theta, out);
  }
  void eval_weighted_gradient(const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& coeffs,
                              Eigen::VectorXd& out) const override {
    inner_.eval_weighted_gradient(theta, coeffs, out);
  }
  void eval_jacobian(const Eigen::VectorXd& theta,
                     TaskJacobian& out) const override {
    inner_.eval_jacobian(theta, out);
  }

 private:
  const MultiTaskProblem& inner_;
  Eigen::VectorXd mins_;
  std::string name_ = "inflated";
};

FamoOptions plain_options(double alpha) {
  FamoOptions fo;
  fo.alpha = alpha;
  fo.logit_mode = LogitMode::kPlainGd;
  fo.model_updater = ModelUpdater::kPlainGd;
  return fo;
}

}  // namespace

TEST_CASE("famo weights: documented closed forms") {
  // equal losses leave the simplex point unchanged, c = 1
  {
    auto [w, c] = famo_task_weights(Eigen::Vector2d(1.0, 1.0),
                                    Eigen::Vector2d(0.5, 0.5));
    CHECK(c == 1.0);
    CHECK(w[0] == 0.5);
    CHECK(w[1] == 0.5);
  }
  // losses (1, 0.1): the task nearer its optimum gets the large weight
  {
    auto [w, c] = famo_task_weights(Eigen::Vector2d(1.0, 0.1),
                                    Eigen::Vector2d(0.5, 0.5));
    CHECK(c == doctest::Approx(2.0 / 11.0).epsilon(1e-14));
    CHECK(w[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-14));
    CHECK(w[1] == doctest::Approx(10.0 / 11.0).epsilon(1e-14));
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-15));
  }
  // vertex z collapses to the single task, c = its loss
  {
    TaskJacobian jac(2, 3, GradientKind::kRaw);
    jac.row(0) << 1.0, -2.0, 0.5;
    jac.row(1) << 9.0, 9.0, 9.0;
    const FamoWeighted out = famo_weighted_direction(
        Eigen::Vector2d(2.0, 0.5), jac, SimplexWeights(Eigen::Vector2d(1, 0)));
    CHECK(out.w[0] == 1.0);
    CHECK(out.w[1] == 0.0);
    CHECK(out.c == 2.0);
    CHECK(out.d == jac.row(0).transpose());
  }
}

TEST_CASE("famo weights: input validation") {
  CHECK_THROWS_AS((void)famo_task_weights(Eigen::Vector2d(1.0, 0.0),
                                          Eigen::Vector2d(0.5, 0.5)),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)famo_task_weights(Eigen::Vector2d(1.0, -1.0),
                                          Eigen::Vector2d(0.5, 0.5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      (void)famo_task_weights(Eigen::Vector3d(1, 1, 1), Eigen::Vector2d(1, 0)),
      std::invalid_argument);

  TaskJacobian jac(2, 2, GradientKind::kRaw);
  jac.rows().setOnes();
  const TaskJacobian log_jac = jac.to_log(Eigen::Vector2d(1.0, 1.0));
  CHECK_THROWS_AS(
      (void)famo_weighted_direction(Eigen::Vector2d(1.0, 1.0), log_jac,
                                    SimplexWeights::uniform(2)),
      std::invalid_argument);
}

TEST_CASE("famo: single task reduces to plain gradient descent") {
  QuadraticBankSpec spec;
  spec.tasks = 1;
  spec.dim = 3;
  spec.seed = 2;
  spec.offsets = {0.5};
  const auto bank = make_quadratic_bank(spec);
  InstrumentedProblem prob(*bank);

  Eigen::VectorXd theta0(3);
  theta0 << 2.0, -1.0, 0.5;
  FamoOptions fo = plain_options(1e-2);
  FamoOptimizer opt(theta0, 1, fo);

  Eigen::VectorXd gd = theta0, wg(3);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  for (int t = 0; t < 100; ++t) {
    const FamoStepInfo info = opt.step(prob);
    CHECK(info.weights[0] == 1.0);
    bank->eval_weighted_gradient(gd, one, wg);
    gd = gd - fo.alpha * wg;
  }
  CHECK(opt.theta() == gd);  // same update arithmetic, same trajectory
  CHECK(opt.logits().size() == 1);
}

TEST_CASE("famo: duplicated tasks pin the logits at zero") {
  const QuadraticTask t = diag_task({1.0, 3.0}, {0.5, -0.5}, 0.25);
  QuadraticBank bank("twins", {t, t});
  Eigen::VectorXd theta0(2);
  theta0 << 3.0, 2.0;

  for (const LogitMode mode : {LogitMode::kPlainGd, LogitMode::kMoment}) {
    const bool moment = mode == LogitMode::kMoment;
    CAPTURE(moment);
    FamoOptions fo = plain_options(1e-2);
    fo.logit_mode = mode;
    FamoOptimizer opt(theta0, 2, fo);
    InstrumentedProblem prob(bank);
    for (int s = 0; s < 50; ++s) {
      const FamoStepInfo info = opt.step(prob);
      CHECK(opt.logits().norm() == 0.0);  // exactly, every step
      CHECK(opt.weights()[0] == 0.5);     // softmax of zero logits
      CHECK(info.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
      CHECK(info.weights[0] == info.weights[1]);
    }
  }
}

TEST_CASE("famo: one gradient and two loss evaluations per step, any k") {
  for (const Eigen::Index k : {Eigen::Index(2), Eigen::Index(5)}) {
    QuadraticBankSpec spec;
    spec.tasks = k;
    spec.dim = 6;
    spec.seed = 4;
    spec.offsets = std::vector<double>(std::size_t(k), 1.0);
    const auto bank = make_quadratic_bank(spec);
    InstrumentedProblem prob(*bank);

    FamoOptimizer opt(Eigen::VectorXd::Constant(6, 2.0), k,
                      plain_options(1e-3));
    const int steps = 7;
    for (int s = 0; s < steps; ++s) (void)opt.step(prob);
    CHECK(prob.counters().grad_evals == steps);
    CHECK(prob.counters().loss_evals == 2 * steps);

    // the oracle pays k gradients per step instead
    prob.reset_counters();
    FamoOptions oracle_fo = plain_options(1e-3);
    oracle_fo.dual_max_iter = 200000;  // ill-conditioned Grams need room
    FamoOptimizer oracle(Eigen::VectorXd::Constant(6, 2.0), k, oracle_fo);
    for (int s = 0; s < 3; ++s) (void)oracle.exact_dual_step(prob);
    CHECK(prob.counters().grad_evals == 3 * k);
    CHECK(prob.counters().loss_evals == 6);
  }
}

TEST_CASE("famo: amortized step holds O(1) model-sized buffers") {
  QuadraticBankSpec spec;
  spec.tasks = 3;
  spec.dim = 17;
  spec.seed = 9;
  spec.offsets = {1.0, 1.0, 1.0};
  const auto bank = make_quadratic_bank(spec);

  VecGauge& gauge = VecGauge::instance();

  {
    gauge.track(17);
    InstrumentedProblem prob(*bank);
    FamoOptions fo = plain_options(1e-3);
    FamoOptimizer opt(Eigen::VectorXd::Constant(17, 1.0), 3, fo);
    CHECK(gauge.live() == 2);  // parameters + direction scratch
    for (int s = 0; s < 5; ++s) (void)opt.step(prob);
    CHECK(gauge.peak() == 2);
  }
  {
    gauge.track(17);
    InstrumentedProblem prob(*bank);
    FamoOptions fo = plain_options(1e-3);
    fo.model_updater = ModelUpdater::kMoment;
    fo.logit_mode = LogitMode::kMoment;  // k-sized state: not model-sized
    FamoOptimizer opt(Eigen::VectorXd::Constant(17, 1.0), 3, fo);
    CHECK(gauge.live() == 4);  // + two moment buffers
    for (int s = 0; s < 5; ++s) (void)opt.step(prob);
    CHECK(gauge.peak() == 4);
  }
  {
    // contrast: the exact-dual oracle materializes the k x m Jacobian in
    // both raw and log form while the min-norm problem is set up
    gauge.track(17);
    InstrumentedProblem prob(*bank);
    FamoOptimizer opt(Eigen::VectorXd::Constant(17, 1.0), 3,
                      plain_options(1e-3));
    for (int s = 0; s < 2; ++s) (void)opt.exact_dual_step(prob);
    CHECK(gauge.peak() == 2 + 2 * 3);
  }
  gauge.track(0);
}

TEST_CASE("famo: the slower task gains weight") {
  // task 1 has gentle curvature, task 2 steep: their realized log-loss drops
  // differ, and the logit update must favor whichever improved less
  QuadraticBank bank("uneven", {diag_task({0.1}, {0.0}, 1.0),
                                diag_task({10.0}, {0.0}, 1.0)});
  InstrumentedProblem prob(bank);
  FamoOptions fo = plain_options(1e-2);
  fo.gamma = 0.0;
  FamoOptimizer opt(Eigen::VectorXd::Constant(1, 2.0), 2, fo);

  for (int s = 0; s < 10; ++s) {
    const Eigen::VectorXd xi_before = opt.logits();
    const FamoStepInfo info = opt.step(prob);
    const Eigen::VectorXd dxi = opt.logits() - xi_before;  // -beta * delta
    Eigen::VectorXd shifted_t = info.losses - bank.min_losses();
    shifted_t.array() += fo.epsilon;
    Eigen::VectorXd shifted_t1 = info.new_losses - bank.min_losses();
    shifted_t1.array() += fo.epsilon;
    const double v1 = std::log(shifted_t[0]) - std::log(shifted_t1[0]);
    const double v2 = std::log(shifted_t[1]) - std::log(shifted_t1[1]);
    CAPTURE(s);
    // for k = 2, delta_1 - delta_2 = 2 z_1 z_2 (v_1 - v_2): whichever task's
    // log-loss dropped less gets the larger logit increment, every step
    if (std::abs(v1 - v2) > 1e-12) CHECK((v2 > v1) == (dxi[0] > dxi[1]));
    if (s == 0) CHECK(opt.logits()[0] != opt.logits()[1]);
  }
}

TEST_CASE("famo ema expansion: closed forms and live recursion") {
  const double beta = 0.025, gamma = 0.001;
  std::mt19937_64 rng(55);

  // one step / two steps closed forms
  const Eigen::Vector2d d1(0.3, -0.1), d2(-0.2, 0.4);
  Eigen::VectorXd xi2 = famo_ema_expansion_check({d1}, beta, gamma);
  CHECK((xi2 + beta * d1).norm() == 0.0);
  Eigen::VectorXd xi3 = famo_ema_expansion_check({d1, d2}, beta, gamma);
  const Eigen::Vector2d expect3 = -beta * (d2 + (1.0 - beta * gamma) * d1);
  CHECK((xi3 - expect3).lpNorm<Eigen::Infinity>() <= 1e-16);

  // gamma = 0: a plain sum
  std::vector<Eigen::VectorXd> ds;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < 10; ++i) {
    ds.push_back(gaussian_vector(rng, 3));
    sum += ds.back();
  }
  const Eigen::VectorXd xi0 = famo_ema_expansion_check(ds, beta, 0.0);
  CHECK((xi0 + beta * sum).lpNorm<Eigen::Infinity>() <= 1e-12);

  // 100-step recursion agreement
  ds.clear();
  Eigen::VectorXd xi_rec = Eigen::VectorXd::Zero(4);
  for (int t = 0; t < 100; ++t) {
    ds.push_back(gaussian_vector(rng, 4));
    xi_rec = (1.0 - beta * gamma) * xi_rec - beta * ds.back();
  }
  const Eigen::VectorXd xi_closed = famo_ema_expansion_check(ds, beta, gamma);
  CHECK((xi_closed - xi_rec).lpNorm<Eigen::Infinity>() <= 1e-12);

  CHECK_THROWS_AS((void)famo_ema_expansion_check({}, beta, gamma),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      (void)famo_ema_expansion_check(
          {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)}, beta, gamma),
      std::invalid_argument);
}

TEST_CASE("famo ema expansion: shadows the optimizer's logit trajectory") {
  QuadraticBankSpec spec;
  spec.tasks = 3;
  spec.dim = 4;
  spec.seed = 6;
  spec.scales = {1.0, 5.0, 0.3};
  spec.offsets = {1.0, 1.0, 1.0};
  const auto bank = make_quadratic_bank(spec);
  InstrumentedProblem prob(*bank);

  FamoOptions fo = plain_options(1e-3);
  fo.beta = 0.025;
  fo.gamma = 0.001;
  FamoOptimizer opt(Eigen::VectorXd::Constant(4, 1.5), 3, fo);

  std::vector<Eigen::VectorXd> deltas;
  const double decay = 1.0 - fo.beta * fo.gamma;
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd before = opt.logits();
    (void)opt.step(prob);
    // invert the plain-gd rule xi' = (1-bg) xi - b delta to recover delta
    deltas.push_back((decay * before - opt.logits()) / fo.beta);
  }
  const Eigen::VectorXd closed =
      famo_ema_expansion_check(deltas, fo.beta, fo.gamma);
  CHECK((closed - opt.logits()).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("famo: poisoned loss rolls the step back untouched") {
  QuadraticBankSpec spec;
  spec.tasks = 2;
  spec.dim = 3;
  spec.seed = 12;
  spec.offsets = {1.0, 1.0};
  const auto bank = make_quadratic_bank(spec);
  PoisonNthLosses poisoned(*bank, 4);  // step 2's candidate evaluation
  InstrumentedProblem prob(poisoned);

  FamoOptimizer opt(Eigen::VectorXd::Constant(3, 2.0), 2, plain_options(1e-3));
  (void)opt.step(prob);  // consumes loss calls 1 and 2

  const Eigen::VectorXd theta_snap = opt.theta();
  const Eigen::VectorXd xi_snap = opt.logits();
  const Eigen::VectorXd prev_snap = opt.prev_shifted_losses();
  CHECK_THROWS_AS((void)opt.step(prob), NumericalError);
  CHECK(opt.theta() == theta_snap);
  CHECK(opt.logits() == xi_snap);
  CHECK(opt.prev_shifted_losses() == prev_snap);
  CHECK(opt.step_count() == 1);

  // the poison is spent; the optimizer recovers on the next step
  (void)opt.step(prob);
  CHECK(opt.step_count() == 2);
}

TEST_CASE("famo: overflowing candidate parameters roll back too") {
  QuadraticBank bank("steep", {diag_task({5.0}, {0.0}, 1.0)});
  InstrumentedProblem prob(bank);
  FamoOptimizer opt(Eigen::VectorXd::Constant(1, 2.0), 1,
                    plain_options(1e308));
  const Eigen::VectorXd theta_snap = opt.theta();
  CHECK_THROWS_AS((void)opt.step(prob), NumericalError);
  CHECK(opt.theta() == theta_snap);
  CHECK(opt.step_count() == 0);
}

TEST_CASE("famo exact dual: opposing gradients are recognized as stationary") {
  // two 1-d bowls around -1 and +1; at theta = 0 the log-loss rows cancel
  QuadraticBank bank("tug", {diag_task({2.0}, {1.0}, 0.0),
                             diag_task({2.0}, {-1.0}, 0.0)});
  InstrumentedProblem prob(bank);
  FamoOptions fo = plain_options(1e-2);
  FamoOptimizer opt(Eigen::VectorXd::Zero(1), 2, fo);

  const FamoStepInfo info = opt.exact_dual_step(prob);
  CHECK(info.d_norm == 0.0);
  CHECK(opt.theta()[0] == 0.0);           // Pareto-stationary: no movement
  CHECK(opt.logits().norm() == 0.0);      // z* uniform -> centered log is 0
  CHECK(info.weights[0] == info.weights[1]);
  CHECK(info.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("famo exact dual: logits track the centered log of z*") {
  // log rows at theta=0 are (-1, 2): z* = (2/3, 1/3) zeroes the dual
  QuadraticBank bank("lopsided", {diag_task({1.0}, {2.0}, 0.0),
                                  diag_task({2.0}, {-1.0}, 0.0)});
  InstrumentedProblem prob(bank);
  FamoOptions fo = plain_options(1e-2);
  fo.dual_tol = 1e-14;  // gap 1e-14 puts z* within ~5e-8 of the true argmin
  fo.dual_max_iter = 20000;
  FamoOptimizer opt(Eigen::VectorXd::Zero(1), 2, fo);

  (void)opt.exact_dual_step(prob);
  const double half_log2 = 0.5 * std::log(2.0);
  CHECK(opt.logits()[0] == doctest::Approx(half_log2).epsilon(1e-6));
  CHECK(opt.logits()[1] == doctest::Approx(-half_log2).epsilon(1e-6));
  CHECK(opt.weights()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("famo: amortized logit gradient aligns with the dual gradient") {
  // small alpha: delta ~ alpha c^2 A^T Jlog Jlog^T z, a positive multiple of
  // the exact dual gradient, so their cosine approaches 1
  std::mt19937_64 rng(77);
  FamoOptions fo = plain_options(1e-4);
  fo.gamma = 0.0;  // xi' = xi - beta * delta exactly

  double worst_cos = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    QuadraticBankSpec spec;
    spec.tasks = 3;
    spec.dim = 6;
    spec.seed = 100 + std::uint64_t(trial);
    spec.offsets = {1.0, 1.0, 1.0};
    spec.scales = {1.0, 3.0, 0.5};
    const auto bank = make_quadratic_bank(spec);
    InstrumentedProblem prob(*bank);

    const Eigen::VectorXd theta0 = gaussian_vector(rng, 6) * 2.0;
    Eigen::VectorXd xi0(3);
    xi0 << uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0),
        uniform(rng, -1.0, 1.0);

    FamoOptimizer opt(theta0, 3, fo);
    opt.restore(theta0, xi0, Eigen::VectorXd::Ones(3), 0);

    (void)opt.step(prob);
    const Eigen::VectorXd delta = (xi0 - opt.logits()) / fo.beta;

    // exact dual gradient at (theta0, xi0)
    Eigen::VectorXd losses(3);
    bank->eval_losses(theta0, losses);
    Eigen::VectorXd shifted = losses - bank->min_losses();
    shifted.array() += fo.epsilon;
    TaskJacobian jac(3, 6);
    bank->eval_jacobian(theta0, jac);
    const TaskJacobian jl = jac.to_log(shifted);
    const Eigen::VectorXd z = softmax(xi0);
    const Eigen::VectorXd dual_grad =
        softmax_jvp_transpose_at(z, jl.rows() * jl.combine(z));

    const double cos =
        delta.dot(dual_grad) / (delta.norm() * dual_grad.norm());
    worst_cos = std::min(worst_cos, cos);
  }
  CHECK(worst_cos >= 0.9);
}

TEST_CASE("famo: narrows the improvement-rate spread against equal weights") {
  QuadraticBankSpec spec;
  spec.tasks = 2;
  spec.dim = 4;
  spec.seed = 21;
  spec.scales = {1.0, 100.0};
  const auto bank = make_quadratic_bank(spec);
  const Eigen::VectorXd theta0 = Eigen::VectorXd::Constant(4, 2.0);
  const int steps = 500;
  const double alpha = 1e-2;

  const auto rate_spread = [&](const Eigen::VectorXd& prev,
                               const Eigen::VectorXd& curr) {
    Eigen::VectorXd shifted = prev - bank->min_losses();
    shifted.array() += 1e-8;
    const Eigen::VectorXd r =
        (prev - curr).cwiseQuotient(shifted);  // per-task improvement rate
    const double mean = r.mean();
    return std::sqrt((r.array() - mean).square().mean());
  };

  // adaptive weighting, defaults (moment logits)
  double famo_spread = 0.0;
  int famo_n = 0;
  {
    FamoOptions fo;
    fo.alpha = alpha;
    InstrumentedProblem prob(*bank);
    FamoOptimizer opt(theta0, 2, fo);
    for (int t = 0; t < steps; ++t) {
      const FamoStepInfo info = opt.step(prob);
      const double s = rate_spread(info.losses, info.new_losses);
      if (std::isfinite(s)) {
        famo_spread += s;
        ++famo_n;
      }
    }
  }

  // equal static weights at the same step size
  double ls_spread = 0.0;
  int ls_n = 0;
  {
    Eigen::VectorXd theta = theta0, grad(4), prev(2), curr(2);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(2, 0.5);
    bank->eval_losses(theta, prev);
    for (int t = 0; t < steps && prev.allFinite(); ++t) {
      bank->eval_weighted_gradient(theta, w, grad);
      if (!grad.allFinite()) break;
      theta -= alpha * grad;
      bank->eval_losses(theta, curr);
      if (!curr.allFinite()) break;
      const double s = rate_spread(prev, curr);
      if (std::isfinite(s)) {
        ls_spread += s;
        ++ls_n;
      }
      prev = curr;
    }
  }

  REQUIRE(famo_n == steps);  // adaptive run stays finite throughout
  REQUIRE(ls_n > 0);
  CHECK(famo_spread / famo_n < ls_spread / ls_n);
}

TEST_CASE("famo: continuous-limit residuals") {
  // symmetric two-bowl problem: theta = 0 zeroes the log-gradient sum
  QuadraticBank bank("sym", {diag_task({2.0}, {-1.0}, 0.0),
                             diag_task({2.0}, {1.0}, 0.0)});
  const auto [r1, r2] = continuous_limit_residual(
      Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(2), bank);
  CHECK(r1 == 0.0);
  CHECK(r2 == 0.0);

  // nonzero logits show up verbatim in the second residual
  Eigen::VectorXd xi(2);
  xi << 0.3, -0.2;
  const auto [q1, q2] =
      continuous_limit_residual(Eigen::VectorXd::Zero(1), xi, bank);
  CHECK(q2 == xi.norm());
  (void)q1;

  // a single task at its center: zero gradient, residual exactly zero
  QuadraticBank solo("solo", {diag_task({3.0}, {0.75}, 0.0)});
  const auto [s1, s2] = continuous_limit_residual(
      Eigen::VectorXd::Constant(1, 0.75), Eigen::VectorXd::Zero(1), solo);
  CHECK(s1 == 0.0);
  CHECK(s2 == 0.0);

  // min-loss claims above the realized loss must be rejected
  const InflatedMinima lying(bank);
  CHECK_THROWS_AS((void)continuous_limit_residual(Eigen::VectorXd::Zero(1),
                                                  Eigen::VectorXd::Zero(2),
                                                  lying),
                  NumericalError);
}

TEST_CASE("famo: construction and restore validation") {
  const Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(2);
  FamoOptions fo;
  CHECK_THROWS_AS(FamoOptimizer(theta0, 0, fo), std::invalid_argument);
  fo.alpha = 0.0;
  CHECK_THROWS_AS(FamoOptimizer(theta0, 2, fo), std::invalid_argument);
  fo = FamoOptions{};
  fo.beta = -1.0;
  CHECK_THROWS_AS(FamoOptimizer(theta0, 2, fo), std::invalid_argument);
  fo = FamoOptions{};
  fo.gamma = -0.1;
  CHECK_THROWS_AS(FamoOptimizer(theta0, 2, fo), std::invalid_argument);
  fo = FamoOptions{};
  fo.epsilon = 0.0;
  CHECK_THROWS_AS(FamoOptimizer(theta0, 2, fo), std::invalid_argument);

  FamoOptimizer ok(theta0, 2, FamoOptions{});
  CHECK_THROWS_AS(ok.restore(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(2),
                             Eigen::VectorXd::Zero(2), 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(ok.restore(theta0, Eigen::VectorXd::Zero(1),
                             Eigen::VectorXd::Zero(2), 0),
                  std::invalid_argument);
}

TEST_CASE("famo: checkpoint restore resumes bit-identically") {
  QuadraticBankSpec spec;
  spec.tasks = 3;
  spec.dim = 5;
  spec.seed = 33;
  spec.scales = {1.0, 10.0, 100.0};
  spec.offsets = {1.0, 1.0, 1.0};
  const auto bank = make_quadratic_bank(spec);
  const Eigen::VectorXd theta0 = Eigen::VectorXd::Constant(5, 1.0);

  FamoOptions fo;  // moment logits by default
  fo.alpha = 1e-3;
  fo.model_updater = ModelUpdater::kMoment;  // exercise all four moments

  InstrumentedProblem prob(*bank);
  FamoOptimizer live(theta0, 3, fo);
  for (int t = 0; t < 5; ++t) (void)live.step(prob);

  FamoOptimizer resumed(theta0, 3, fo);
  resumed.restore(live.theta(), live.logits(), live.prev_shifted_losses(),
                  live.step_count());
  resumed.model_adam()->restore(live.model_adam()->exp_avg(),
                                live.model_adam()->exp_avg_sq(),
                                live.model_adam()->step_count());
  resumed.logit_adam()->restore(live.logit_adam()->exp_avg(),
                                live.logit_adam()->exp_avg_sq(),
                                live.logit_adam()->step_count());

  for (int t = 0; t < 5; ++t) {
    (void)live.step(prob);
    (void)resumed.step(prob);
    CHECK(live.theta() == resumed.theta());
    CHECK(live.logits() == resumed.logits());
  }
  CHECK(live.step_count() == resumed.step_count());
}
