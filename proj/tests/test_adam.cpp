// SPDX-License-Identifier: Apache-2.0
//
// Moment updater: closed forms, a scalar shadow recursion, error paths,
// aliasing, and checkpoint restore.
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mtopt/adam.hpp"
#include "mtopt/errors.hpp"

using namespace mtopt;

TEST_CASE("adam: first step is lr * g / (|g| + eps)") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  AdamUpdater opt(3, cfg);
  Eigen::VectorXd p(3), g(3);
  p << 1.0, 2.0, 3.0;
  g << 0.5, -2.0, 0.0;
  opt.step(p, g);
  // bias corrections cancel at t = 1, so the step direction is sign(g)
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * (0.5 / (0.5 + 1e-8)))
                    .epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(2.0 + 0.1 * (2.0 / (2.0 + 1e-8)))
                    .epsilon(1e-15));
  CHECK(p[2] == 3.0);  // zero gradient, zero moments: exactly unchanged
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam: matches a scalar shadow recursion over several steps") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;
  AdamUpdater opt(2, cfg);
  Eigen::VectorXd p(2);
  p << 0.7, -1.3;

  double sp[2] = {0.7, -1.3};
  double sm[2] = {0, 0}, sv[2] = {0, 0};
  const std::vector<Eigen::Vector2d> grads = {
      {0.3, -0.2}, {-1.0, 0.4}, {0.05, 0.0}, {2.0, -2.0}};

  for (std::size_t t = 0; t < grads.size(); ++t) {
    opt.step(p, grads[t]);
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(t + 1));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(t + 1));
    for (int i = 0; i < 2; ++i) {
      const double ge = grads[t][i] + cfg.weight_decay * sp[i];
      sm[i] = cfg.beta1 * sm[i] + (1.0 - cfg.beta1) * ge;
      sv[i] = cfg.beta2 * sv[i] + (1.0 - cfg.beta2) * ge * ge;
      sp[i] -= cfg.lr * (sm[i] / bc1) / (std::sqrt(sv[i] / bc2) + cfg.eps);
    }
  }
  for (int i = 0; i < 2; ++i) {
    CHECK(p[i] == doctest::Approx(sp[i]).epsilon(1e-15));
    CHECK(opt.exp_avg()[i] == doctest::Approx(sm[i]).epsilon(1e-15));
    CHECK(opt.exp_avg_sq()[i] == doctest::Approx(sv[i]).epsilon(1e-15));
  }
  CHECK(opt.step_count() == 4);
}

TEST_CASE("adam: zero gradient without decay is a no-op on parameters") {
  AdamUpdater opt(2, AdamConfig{});
  Eigen::VectorXd p(2);
  p << 4.0, -5.0;
  const Eigen::VectorXd g = Eigen::VectorXd::Zero(2);
  opt.step(p, g);
  opt.step(p, g);
  CHECK(p[0] == 4.0);
  CHECK(p[1] == -5.0);
  CHECK(opt.step_count() == 2);
}

TEST_CASE("adam: coupled decay alone pulls parameters toward zero") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;
  AdamUpdater opt(1, cfg);
  Eigen::VectorXd p(1), g = Eigen::VectorXd::Zero(1);
  p << 1.0;
  double prev = p[0];
  for (int t = 0; t < 50; ++t) {
    opt.step(p, g);
    CHECK(p[0] < prev);  // monotone while far from zero
    prev = p[0];
  }
  for (int t = 0; t < 150; ++t) opt.step(p, g);
  // settled into the +-lr dither band around the origin
  CHECK(std::abs(p[0]) <= 0.05);
}

TEST_CASE("adam: non-finite gradient throws and leaves state untouched") {
  AdamUpdater opt(2, AdamConfig{});
  Eigen::VectorXd p(2), g(2);
  p << 1.0, 2.0;
  g << 0.1, -0.4;
  opt.step(p, g);
  const Eigen::VectorXd p0 = p, m0 = opt.exp_avg(), v0 = opt.exp_avg_sq();

  Eigen::VectorXd bad(2);
  bad << 0.5, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(opt.step(p, bad), NumericalError);
  bad[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(opt.step(p, bad), NumericalError);

  CHECK(p == p0);
  CHECK(opt.exp_avg() == m0);
  CHECK(opt.exp_avg_sq() == v0);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam: size mismatch rejected") {
  AdamUpdater opt(3, AdamConfig{});
  Eigen::VectorXd p3 = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd p2 = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(opt.step(p2, p2), std::invalid_argument);
  CHECK_THROWS_AS(opt.step(p3, p2), std::invalid_argument);
}

TEST_CASE("adam: step_to tolerates out aliasing grad") {
  AdamConfig cfg;
  cfg.lr = 0.05;
  AdamUpdater a(2, cfg), b(2, cfg);
  Eigen::VectorXd p(2), g(2), out(2);
  p << 1.0, -2.0;
  g << 0.3, 0.7;

  Eigen::VectorXd g_copy = g;
  a.step_to(p, g_copy, g_copy);  // out aliases grad
  b.step_to(p, g, out);          // disjoint out
  CHECK(g_copy == out);
  CHECK(a.exp_avg() == b.exp_avg());
  CHECK(a.exp_avg_sq() == b.exp_avg_sq());
}

TEST_CASE("adam: restore resumes bit-identically") {
  AdamConfig cfg;
  cfg.lr = 0.02;
  cfg.weight_decay = 0.01;
  AdamUpdater live(2, cfg);
  Eigen::VectorXd p(2);
  p << 0.4, -0.9;
  Eigen::VectorXd g1(2), g2(2), g3(2);
  g1 << 1.0, -1.0;
  g2 << 0.2, 0.3;
  g3 << -0.7, 0.1;
  live.step(p, g1);
  live.step(p, g2);

  AdamUpdater resumed(2, cfg);
  resumed.restore(live.exp_avg(), live.exp_avg_sq(), live.step_count());
  Eigen::VectorXd p_resumed = p;

  live.step(p, g3);
  resumed.step(p_resumed, g3);
  CHECK(p == p_resumed);
  CHECK(live.exp_avg() == resumed.exp_avg());
  CHECK(live.exp_avg_sq() == resumed.exp_avg_sq());
  CHECK(live.step_count() == resumed.step_count());

  Eigen::VectorXd wrong = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(resumed.restore(wrong, wrong, 1), std::invalid_argument);
}
