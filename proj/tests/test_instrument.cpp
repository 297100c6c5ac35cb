// SPDX-License-Identifier: Apache-2.0
//
// Cost accounting: evaluation counters and the live-buffer gauge.
#include <doctest.h>

#include <Eigen/Dense>
#include <utility>

#include "mtopt/instrument.hpp"
#include "mtopt/jacobian.hpp"
#include "mtopt/problem.hpp"
#include "mtopt/toy2d.hpp"

using namespace mtopt;

TEST_CASE("counters: losses 1, weighted gradient 1, jacobian k") {
  const Toy2d toy;
  InstrumentedProblem prob(toy);
  CHECK(prob.counters().loss_evals == 0);
  CHECK(prob.counters().grad_evals == 0);

  Eigen::VectorXd theta(2), losses(2), grad(2);
  theta << 1.0, 2.0;
  prob.losses(theta, losses);
  CHECK(prob.counters().loss_evals == 1);
  CHECK(prob.counters().grad_evals == 0);

  const Eigen::VectorXd w = Eigen::VectorXd::Constant(2, 0.5);
  prob.weighted_gradient(theta, w, grad);
  CHECK(prob.counters().grad_evals == 1);

  TaskJacobian jac;
  prob.jacobian(theta, jac);
  CHECK(prob.counters().grad_evals == 1 + prob.tasks());
  CHECK(prob.counters().loss_evals == 1);

  prob.reset_counters();
  CHECK(prob.counters().loss_evals == 0);
  CHECK(prob.counters().grad_evals == 0);

  // the facade forwards the underlying problem's identity
  CHECK(prob.tasks() == 2);
  CHECK(prob.dim() == 2);
  CHECK(&prob.problem() == &toy);
}

TEST_CASE("gauge: tracked length filters acquisitions") {
  VecGauge& g = VecGauge::instance();
  g.track(5);
  CHECK(g.live() == 0);
  CHECK(g.peak() == 0);
  CHECK(g.tracked_dim() == 5);

  g.acquire(5);
  g.acquire(5);
  g.acquire(3);  // wrong length: ignored
  CHECK(g.live() == 2);
  CHECK(g.peak() == 2);

  g.release(5);
  g.release(3);  // wrong length: ignored
  CHECK(g.live() == 1);
  CHECK(g.peak() == 2);  // peak is sticky

  g.reset_peak();
  CHECK(g.peak() == 1);

  g.track(0);  // disabled: everything is ignored
  g.acquire(0);
  g.acquire(7);
  CHECK(g.live() == 0);
}

TEST_CASE("gauge: TrackedVector lifetimes are counted once") {
  VecGauge& g = VecGauge::instance();
  g.track(4);
  {
    TrackedVector a(4);
    CHECK(g.live() == 1);
    TrackedVector b(4);
    CHECK(g.live() == 2);
    TrackedVector c(7);  // untracked length
    CHECK(g.live() == 2);

    // move transfers ownership without double counting
    TrackedVector d(std::move(a));
    CHECK(g.live() == 2);
    CHECK(d.size() == 4);
    CHECK(a.size() == 0);

    // move assignment releases the target's old buffer
    b = std::move(d);
    CHECK(g.live() == 1);
    CHECK(g.peak() == 2);

    // resize to a tracked length registers; away from it releases
    c.resize(4);
    CHECK(g.live() == 2);
    c.resize(9);
    CHECK(g.live() == 1);
  }
  CHECK(g.live() == 0);
  CHECK(g.peak() == 2);
  g.track(0);
}

TEST_CASE("gauge: TrackedMatrix counts rows buffers of length cols") {
  VecGauge& g = VecGauge::instance();
  g.track(6);
  {
    TrackedMatrix jac(3, 6);  // 3 gradient rows of model length 6
    CHECK(g.live() == 3);
    TrackedMatrix other(6, 3);  // row length 3: untracked
    CHECK(g.live() == 3);

    TrackedMatrix moved(std::move(jac));
    CHECK(g.live() == 3);

    moved.resize(2, 6);
    CHECK(g.live() == 2);
    CHECK(g.peak() == 3);
  }
  CHECK(g.live() == 0);
  g.track(0);
}

TEST_CASE("gauge: default-constructed wrappers register on first resize") {
  VecGauge& g = VecGauge::instance();
  g.track(3);
  TrackedVector v;
  CHECK(g.live() == 0);
  v.resize(3);
  CHECK(g.live() == 1);
  v.v().setConstant(1.0);
  CHECK(v.v().sum() == 3.0);
  v.resize(3);  // same-length resize: count is stable
  CHECK(g.live() == 1);
  CHECK(g.peak() == 1);
  v = TrackedVector();  // assignment from empty releases
  CHECK(g.live() == 0);
  g.track(0);
}
