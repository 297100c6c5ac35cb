// SPDX-License-Identifier: Apache-2.0
//
// Probability-simplex kernels: softmax, the action of its (symmetric)
// Jacobian, and Euclidean projection onto the simplex. Expression-friendly
// free functions over Eigen vectors, templated on scalar.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mtopt {

template <typename Scalar>
using VectorX = Eigen::Vector<Scalar, Eigen::Dynamic>;

// Convex-combination weights: nonnegative entries summing to 1 within tol.
template <typename Derived>
bool is_on_simplex(const Eigen::MatrixBase<Derived>& z,
                   typename Derived::Scalar tol = typename Derived::Scalar(1e-9)) {
  EIGEN_STATIC_ASSERT_VECTOR_ONLY(Derived);
  using Scalar = typename Derived::Scalar;
  if (z.size() == 0 || !z.allFinite()) return false;
  return z.minCoeff() >= Scalar(0) &&
         std::abs(z.sum() - Scalar(1)) <= tol;
}

// A validated point of the probability simplex. Thin wrapper over a dense
// vector; construction is the only gate, access is free.
class SimplexWeights {
 public:
  template <typename Derived>
  explicit SimplexWeights(const Eigen::MatrixBase<Derived>& z) : z_(z) {
    if (!is_on_simplex(z_))
      throw std::invalid_argument("SimplexWeights: not on the simplex");
  }

  static SimplexWeights uniform(Eigen::Index k) {
    return SimplexWeights(Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)));
  }

  const Eigen::VectorXd& v() const { return z_; }
  double operator[](Eigen::Index i) const { return z_[i]; }
  Eigen::Index size() const { return z_.size(); }

 private:
  Eigen::VectorXd z_;
};

// z_i = exp(xi_i - max xi) / sum_j exp(xi_j - max xi). Max subtraction pins
// the largest exponent at 0, so any finite input yields a finite simplex
// point: no overflow, and the normalizer is >= 1.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& xi) {
  EIGEN_STATIC_ASSERT_VECTOR_ONLY(Derived);
  using Scalar = typename Derived::Scalar;
  if (xi.size() == 0) throw std::invalid_argument("softmax: empty input");
  if (!xi.allFinite()) throw std::invalid_argument("softmax: non-finite input");
  // scalar exp on purpose: Eigen's vectorized exp clamps its argument near
  // -709 and returns a subnormal floor, while libm underflows to an exact 0,
  // which is what extreme logit gaps should produce
  VectorX<Scalar> z = (xi.array() - xi.maxCoeff())
                          .unaryExpr([](Scalar a) {
                            using std::exp;
                            return Scalar(exp(a));
                          })
                          .matrix();
  z /= z.sum();
  return z;
}

// Action v -> A^T v of the softmax Jacobian A = diag(z) - z z^T at logits xi.
// A is symmetric, so this is also A v; computed without forming A:
//   A^T v = z .* (v - (z . v) 1).
template <typename D1, typename D2>
VectorX<typename D1::Scalar> softmax_jvp_transpose(
    const Eigen::MatrixBase<D1>& xi, const Eigen::MatrixBase<D2>& v) {
  EIGEN_STATIC_ASSERT_VECTOR_ONLY(D1);
  EIGEN_STATIC_ASSERT_VECTOR_ONLY(D2);
  using Scalar = typename D1::Scalar;
  if (xi.size() != v.size())
    throw std::invalid_argument("softmax_jvp_transpose: size mismatch");
  if (!v.allFinite())
    throw std::invalid_argument("softmax_jvp_transpose: non-finite input");
  VectorX<Scalar> z = softmax(xi);
  Scalar zv = z.dot(v);
  return (z.array() * (v.array() - zv)).matrix();
}

// Same action given precomputed weights z = softmax(xi).
template <typename D1, typename D2>
VectorX<typename D1::Scalar> softmax_jvp_transpose_at(
    const Eigen::MatrixBase<D1>& z, const Eigen::MatrixBase<D2>& v) {
  using Scalar = typename D1::Scalar;
  Scalar zv = z.dot(v);
  return (z.derived().array() * (v.derived().array() - zv)).matrix();
}

// Euclidean projection onto the probability simplex (sort-and-threshold):
// sort y descending, find the largest j with y_(j) - (sum_{i<=j} y_(i) - 1)/j > 0,
// set tau to that partial-sum expression and clip z = max(y - tau, 0).
// O(k log k); exact up to rounding.
template <typename Derived>
VectorX<typename Derived::Scalar> project_simplex(
    const Eigen::MatrixBase<Derived>& y) {
  EIGEN_STATIC_ASSERT_VECTOR_ONLY(Derived);
  using Scalar = typename Derived::Scalar;
  const Eigen::Index k = y.size();
  if (k == 0) throw std::invalid_argument("project_simplex: empty input");
  if (!y.allFinite())
    throw std::invalid_argument("project_simplex: non-finite input");

  VectorX<Scalar> yv = y;  // materialize: the sort needs contiguous storage
  std::vector<Scalar> u(yv.data(), yv.data() + k);
  std::sort(u.begin(), u.end(), std::greater<Scalar>());
  Scalar cumsum = 0, tau = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    Scalar cand = (cumsum - Scalar(1)) / Scalar(j + 1);
    // keep the threshold from the largest j still above it
    if (u[static_cast<std::size_t>(j)] - cand > Scalar(0)) tau = cand;
  }
  return yv.array().unaryExpr([tau](Scalar yi) {
    return std::max(yi - tau, Scalar(0));
  }).matrix();
}

}  // namespace mtopt
