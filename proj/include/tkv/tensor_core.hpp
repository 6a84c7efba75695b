#pragma once

// Exact tensor-attention kernels.
//
// Row-pair order used everywhere in this library: the pair (a, b) of a left
// row a in [0, n1) and a right row b in [0, n2) lives at flat row a * n2 + b.

#include <Eigen/Dense>

#include <string>
#include <type_traits>

#include "tkv/errors.hpp"

namespace tkv {

template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RowMatrixXd = RowMatrixX<double>;
using VectorXd = VectorX<double>;

namespace detail {

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& x, const char* name) {
  if (!x.allFinite()) throw DomainError(std::string(name) + " has non-finite entries");
}

template <typename A, typename B>
constexpr void require_same_scalar() {
  static_assert(std::is_same_v<typename A::Scalar, typename B::Scalar>,
                "operands must share a scalar type");
}

inline std::string shape(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace detail

/// Column-wise Kronecker product: row a * b.rows() + r of the result is the
/// entrywise product of row a of `a` and row r of `b`.
template <typename DerivedA, typename DerivedB>
RowMatrixX<typename DerivedA::Scalar> kron_colwise(const Eigen::MatrixBase<DerivedA>& a,
                                                   const Eigen::MatrixBase<DerivedB>& b) {
  detail::require_same_scalar<DerivedA, DerivedB>();
  if (a.cols() != b.cols()) {
    throw DimensionError("kron_colwise: column mismatch " + detail::shape(a.rows(), a.cols()) +
                         " vs " + detail::shape(b.rows(), b.cols()));
  }
  const Eigen::Index n2 = b.rows();
  RowMatrixX<typename DerivedA::Scalar> out(a.rows() * n2, a.cols());
  for (Eigen::Index i1 = 0; i1 < a.rows(); ++i1) {
    for (Eigen::Index i2 = 0; i2 < n2; ++i2) {
      out.row(i1 * n2 + i2) = a.row(i1).cwiseProduct(b.row(i2));
    }
  }
  return out;
}

/// Numerically stable softmax of a vector (max-subtracted).
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  if (z.size() == 0) throw EmptyInputError("softmax: empty input");
  detail::require_finite(z, "softmax input");
  VectorX<Scalar> e = (z.derived().reshaped().array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Two-cache tensor attention: vtilde^T * softmax(ktilde * q).
template <typename DerivedQ, typename DerivedK, typename DerivedV>
VectorX<typename DerivedQ::Scalar> attn_two(const Eigen::MatrixBase<DerivedQ>& q,
                                            const Eigen::MatrixBase<DerivedK>& ktilde,
                                            const Eigen::MatrixBase<DerivedV>& vtilde) {
  detail::require_same_scalar<DerivedQ, DerivedK>();
  detail::require_same_scalar<DerivedQ, DerivedV>();
  if (ktilde.rows() != vtilde.rows() || ktilde.cols() != vtilde.cols()) {
    throw DimensionError("attn_two: key cache " + detail::shape(ktilde.rows(), ktilde.cols()) +
                         " vs value cache " + detail::shape(vtilde.rows(), vtilde.cols()));
  }
  if (q.size() != ktilde.cols()) {
    throw DimensionError("attn_two: query length " + std::to_string(q.size()) +
                         " vs embedding dim " + std::to_string(ktilde.cols()));
  }
  if (ktilde.rows() == 0) throw EmptyInputError("attn_two: empty cache");
  detail::require_finite(q, "query");
  detail::require_finite(ktilde, "key cache");
  detail::require_finite(vtilde, "value cache");
  const auto weights = softmax(ktilde * q.derived().reshaped());
  return vtilde.transpose() * weights;
}

/// Four-cache tensor attention. Materializes both Kronecker products, then
/// defers to attn_two.
template <typename DerivedQ, typename D1, typename D2, typename D3, typename D4>
VectorX<typename DerivedQ::Scalar> attn_four(const Eigen::MatrixBase<DerivedQ>& q,
                                             const Eigen::MatrixBase<D1>& k1,
                                             const Eigen::MatrixBase<D2>& k2,
                                             const Eigen::MatrixBase<D3>& v1,
                                             const Eigen::MatrixBase<D4>& v2) {
  const auto same = [&](const auto& m) { return m.rows() == k1.rows() && m.cols() == k1.cols(); };
  if (!same(k2) || !same(v1) || !same(v2)) {
    throw DimensionError("attn_four: the four caches must share one shape, got " +
                         detail::shape(k1.rows(), k1.cols()) + ", " +
                         detail::shape(k2.rows(), k2.cols()) + ", " +
                         detail::shape(v1.rows(), v1.cols()) + ", " +
                         detail::shape(v2.rows(), v2.cols()));
  }
  if (k1.rows() == 0) throw EmptyInputError("attn_four: empty cache");
  return attn_two(q, kron_colwise(k1, k2), kron_colwise(v1, v2));
}

}  // namespace tkv
