// SPDX-License-Identifier: Apache-2.0
//
// Cost accounting. Two instruments back the per-step complexity contracts:
//  - EvalCounters tallies loss-vector and gradient evaluations per run;
//  - VecGauge counts live parameter-length buffers on the optimizer side,
//    so "FAMO keeps O(1) model-sized state" is measured, not asserted.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

namespace mtopt {

struct EvalCounters {
  std::int64_t loss_evals = 0;  // loss-vector evaluations (all k at once)
  std::int64_t grad_evals = 0;  // single-gradient evaluations; a Jacobian is k

  void reset() { *this = EvalCounters{}; }
};

// Thread-local census of live buffers of one tracked length (the model
// dimension m). Optimizer-side storage registers through TrackedVector /
// TrackedMatrix below; anything of a different length is ignored.
class VecGauge {
 public:
  static VecGauge& instance() {
    thread_local VecGauge g;
    return g;
  }

  // Set the tracked length and zero both counters.
  void track(Eigen::Index dim) {
    dim_ = dim;
    live_ = 0;
    peak_ = 0;
  }

  void acquire(Eigen::Index len, std::int64_t count = 1) {
    if (len != dim_ || dim_ <= 0) return;
    live_ += count;
    if (live_ > peak_) peak_ = live_;
  }

  void release(Eigen::Index len, std::int64_t count = 1) {
    if (len != dim_ || dim_ <= 0) return;
    live_ -= count;
  }

  std::int64_t live() const { return live_; }
  std::int64_t peak() const { return peak_; }
  void reset_peak() { peak_ = live_; }
  Eigen::Index tracked_dim() const { return dim_; }

 private:
  Eigen::Index dim_ = 0;
  std::int64_t live_ = 0;
  std::int64_t peak_ = 0;
};

// Dense vector whose lifetime is reported to the gauge. Used for optimizer
// state and scratch that scales with the model dimension.
class TrackedVector {
 public:
  TrackedVector() = default;
  explicit TrackedVector(Eigen::Index n) { resize(n); }
  TrackedVector(const TrackedVector&) = delete;
  TrackedVector& operator=(const TrackedVector&) = delete;
  TrackedVector(TrackedVector&& o) noexcept : v_(std::move(o.v_)) {
    o.v_.resize(0);
  }
  TrackedVector& operator=(TrackedVector&& o) noexcept {
    if (this != &o) {
      release();
      v_ = std::move(o.v_);
      o.v_.resize(0);
    }
    return *this;
  }
  ~TrackedVector() { release(); }

  void resize(Eigen::Index n) {
    release();
    v_.resize(n);
    VecGauge::instance().acquire(n);
  }

  Eigen::VectorXd& v() { return v_; }
  const Eigen::VectorXd& v() const { return v_; }
  Eigen::Index size() const { return v_.size(); }

 private:
  void release() {
    if (v_.size() > 0) VecGauge::instance().release(v_.size());
  }
  Eigen::VectorXd v_;
};

// Dense row-stacked matrix counted as `rows` buffers of length `cols`.
class TrackedMatrix {
 public:
  TrackedMatrix() = default;
  TrackedMatrix(Eigen::Index rows, Eigen::Index cols) { resize(rows, cols); }
  TrackedMatrix(const TrackedMatrix&) = delete;
  TrackedMatrix& operator=(const TrackedMatrix&) = delete;
  TrackedMatrix(TrackedMatrix&& o) noexcept : m_(std::move(o.m_)) {
    o.m_.resize(0, 0);
  }
  TrackedMatrix& operator=(TrackedMatrix&& o) noexcept {
    if (this != &o) {
      release();
      m_ = std::move(o.m_);
      o.m_.resize(0, 0);
    }
    return *this;
  }
  ~TrackedMatrix() { release(); }

  void resize(Eigen::Index rows, Eigen::Index cols) {
    release();
    m_.resize(rows, cols);
    VecGauge::instance().acquire(cols, rows);
  }

  Eigen::MatrixXd& m() { return m_; }
  const Eigen::MatrixXd& m() const { return m_; }

 private:
  void release() {
    if (m_.size() > 0) VecGauge::instance().release(m_.cols(), m_.rows());
  }
  Eigen::MatrixXd m_;
};

}  // namespace mtopt
