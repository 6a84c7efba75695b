#pragma once

// Decoding-session caches for tensor attention.
//
// FourCache keeps the four factor histories (linear memory) and rebuilds both
// Kronecker products on every attend. TwoCache keeps the expanded key/value
// products as an (a, b) grid (quadratic memory) and extends it incrementally,
// so attend is a plain matvec plus weighted sum. PrecombinedCache stores
// already-combined rows as they arrive.
//
// Op counts are multiply-accumulates plus entrywise products; logical bytes
// are stored cache scalars times sizeof(Scalar).

#include <cstdint>
#include <string>
#include <vector>

#include "tkv/tensor_core.hpp"

namespace tkv {

struct StepCost {
  std::uint64_t append_scalar_ops = 0;
  std::uint64_t attend_scalar_ops = 0;
  std::uint64_t logical_bytes = 0;
};

template <typename Scalar>
struct Attended {
  VectorX<Scalar> output;
  StepCost cost;
};

/// One decoding step of the four-cache formulation.
struct Quintuple {
  VectorXd q, k1, k2, v1, v2;
};

/// One decoding step of the pre-combined two-cache formulation.
struct Triple {
  VectorXd q, key, value;
};

enum class Layout { kFour, kTwo };

inline const char* to_string(Layout layout) { return layout == Layout::kFour ? "four" : "two"; }

/// Entrywise products needed to materialize both Kronecker products at length i.
constexpr std::uint64_t kron_materialization_ops(std::uint64_t i, std::uint64_t d) {
  return 2 * i * i * d;
}

/// Logit matvec plus weighted value sum over i * i expanded rows.
constexpr std::uint64_t expanded_attend_ops(std::uint64_t i, std::uint64_t d) {
  return 2 * i * i * d;
}

template <typename Scalar>
constexpr std::uint64_t four_cache_bytes(std::uint64_t i, std::uint64_t d) {
  return 4 * i * d * sizeof(Scalar);
}

template <typename Scalar>
constexpr std::uint64_t two_cache_bytes(std::uint64_t i, std::uint64_t d) {
  return 2 * i * i * d * sizeof(Scalar);
}

namespace detail {

template <typename Derived>
void require_row(const Eigen::MatrixBase<Derived>& row, Eigen::Index dim, const char* name) {
  if (row.size() != dim) {
    throw DimensionError(std::string(name) + ": expected length " + std::to_string(dim) +
                         ", got " + std::to_string(row.size()));
  }
  require_finite(row, name);
}

template <typename Scalar, typename Derived>
void push_row(std::vector<Scalar>& buffer, const Eigen::MatrixBase<Derived>& row) {
  for (Eigen::Index j = 0; j < row.size(); ++j) buffer.push_back(row.derived().reshaped()(j));
}

inline void require_dim(Eigen::Index dim) {
  if (dim < 1) throw DimensionError("cache embedding dim must be >= 1");
}

}  // namespace detail

template <typename Scalar>
class FourCache {
 public:
  using ConstMap = Eigen::Map<const RowMatrixX<Scalar>>;

  explicit FourCache(Eigen::Index dim) : dim_(dim) { detail::require_dim(dim); }

  template <typename A, typename B, typename C, typename D>
  StepCost append(const Eigen::MatrixBase<A>& k1_row, const Eigen::MatrixBase<B>& k2_row,
                  const Eigen::MatrixBase<C>& v1_row, const Eigen::MatrixBase<D>& v2_row) {
    detail::require_row(k1_row, dim_, "k1 row");
    detail::require_row(k2_row, dim_, "k2 row");
    detail::require_row(v1_row, dim_, "v1 row");
    detail::require_row(v2_row, dim_, "v2 row");
    detail::push_row(k1_, k1_row);
    detail::push_row(k2_, k2_row);
    detail::push_row(v1_, v1_row);
    detail::push_row(v2_, v2_row);
    ++length_;
    return {4 * static_cast<std::uint64_t>(dim_), 0, logical_bytes()};
  }

  /// Rebuilds both Kronecker products from the factors on every call.
  template <typename Q>
  Attended<Scalar> attend(const Eigen::MatrixBase<Q>& q) const {
    if (length_ == 0) throw EmptyInputError("FourCache::attend on an empty cache");
    const auto i = static_cast<std::uint64_t>(length_);
    const auto d = static_cast<std::uint64_t>(dim_);
    return {attn_four(q, k1(), k2(), v1(), v2()),
            {0, kron_materialization_ops(i, d) + expanded_attend_ops(i, d), logical_bytes()}};
  }

  Eigen::Index dim() const { return dim_; }
  Eigen::Index length() const { return length_; }
  std::uint64_t logical_bytes() const { return four_cache_bytes<Scalar>(length_, dim_); }

  ConstMap k1() const { return {k1_.data(), length_, dim_}; }
  ConstMap k2() const { return {k2_.data(), length_, dim_}; }
  ConstMap v1() const { return {v1_.data(), length_, dim_}; }
  ConstMap v2() const { return {v2_.data(), length_, dim_}; }

 private:
  Eigen::Index dim_;
  Eigen::Index length_ = 0;
  std::vector<Scalar> k1_, k2_, v1_, v2_;
};

/// Expanded-product cache. Grid row a stores cells (a, 0..i-1) contiguously,
/// so addresses stay stable as the session grows. The factor rows are kept
/// only to compute cross cells for later appends; they are reported by
/// factor_bytes() and are not part of logical_bytes().
template <typename Scalar>
class TwoCache {
 public:
  using ConstVectorMap = Eigen::Map<const VectorX<Scalar>>;

  explicit TwoCache(Eigen::Index dim) : dim_(dim) { detail::require_dim(dim); }

  template <typename A, typename B, typename C, typename D>
  StepCost append(const Eigen::MatrixBase<A>& k1_row, const Eigen::MatrixBase<B>& k2_row,
                  const Eigen::MatrixBase<C>& v1_row, const Eigen::MatrixBase<D>& v2_row) {
    detail::require_row(k1_row, dim_, "k1 row");
    detail::require_row(k2_row, dim_, "k2 row");
    detail::require_row(v1_row, dim_, "v1 row");
    detail::require_row(v2_row, dim_, "v2 row");
    const Eigen::Index i = length_;
    const VectorX<Scalar> nk1 = k1_row.derived().reshaped();
    const VectorX<Scalar> nk2 = k2_row.derived().reshaped();
    const VectorX<Scalar> nv1 = v1_row.derived().reshaped();
    const VectorX<Scalar> nv2 = v2_row.derived().reshaped();

    // New column b = i for every existing row a.
    for (Eigen::Index a = 0; a < i; ++a) {
      detail::push_row(grid_k_[a], factor(k1_, a).cwiseProduct(nk2));
      detail::push_row(grid_v_[a], factor(v1_, a).cwiseProduct(nv2));
    }
    // New row a = i, cells b = 0..i.
    auto& row_k = grid_k_.emplace_back();
    auto& row_v = grid_v_.emplace_back();
    row_k.reserve(static_cast<std::size_t>((i + 1) * dim_));
    row_v.reserve(static_cast<std::size_t>((i + 1) * dim_));
    for (Eigen::Index b = 0; b < i; ++b) {
      detail::push_row(row_k, nk1.cwiseProduct(factor(k2_, b)));
      detail::push_row(row_v, nv1.cwiseProduct(factor(v2_, b)));
    }
    detail::push_row(row_k, nk1.cwiseProduct(nk2));
    detail::push_row(row_v, nv1.cwiseProduct(nv2));

    detail::push_row(k1_, nk1);
    detail::push_row(k2_, nk2);
    detail::push_row(v1_, nv1);
    detail::push_row(v2_, nv2);
    ++length_;
    const auto cells = static_cast<std::uint64_t>(2 * i + 1);
    return {2 * cells * static_cast<std::uint64_t>(dim_), 0, logical_bytes()};
  }

  template <typename Q>
  Attended<Scalar> attend(const Eigen::MatrixBase<Q>& q) const {
    if (length_ == 0) throw EmptyInputError("TwoCache::attend on an empty cache");
    if (q.size() != dim_) {
      throw DimensionError("TwoCache::attend: query length " + std::to_string(q.size()) +
                           " vs embedding dim " + std::to_string(dim_));
    }
    detail::require_finite(q, "query");
    const Eigen::Index i = length_;
    const VectorX<Scalar> query = q.derived().reshaped();
    VectorX<Scalar> logits(i * i);
    for (Eigen::Index a = 0; a < i; ++a) logits.segment(a * i, i).noalias() = grid_row(grid_k_, a) * query;
    const VectorX<Scalar> weights = softmax(logits);
    VectorX<Scalar> out = VectorX<Scalar>::Zero(dim_);
    for (Eigen::Index a = 0; a < i; ++a) {
      out.noalias() += grid_row(grid_v_, a).transpose() * weights.segment(a * i, i);
    }
    const auto n = static_cast<std::uint64_t>(i);
    return {std::move(out), {0, expanded_attend_ops(n, dim_), logical_bytes()}};
  }

  ConstVectorMap key_cell(Eigen::Index a, Eigen::Index b) const { return cell(grid_k_, a, b); }
  ConstVectorMap value_cell(Eigen::Index a, Eigen::Index b) const { return cell(grid_v_, a, b); }

  /// Flat (i*i) x d views in row-pair order a * i + b.
  RowMatrixX<Scalar> flat_keys() const { return flatten(grid_k_); }
  RowMatrixX<Scalar> flat_values() const { return flatten(grid_v_); }

  Eigen::Index dim() const { return dim_; }
  Eigen::Index length() const { return length_; }
  std::uint64_t logical_bytes() const { return two_cache_bytes<Scalar>(length_, dim_); }
  std::uint64_t factor_bytes() const { return four_cache_bytes<Scalar>(length_, dim_); }

 private:
  using Grid = std::vector<std::vector<Scalar>>;

  ConstVectorMap factor(const std::vector<Scalar>& rows, Eigen::Index a) const {
    return {rows.data() + a * dim_, dim_};
  }

  Eigen::Map<const RowMatrixX<Scalar>> grid_row(const Grid& grid, Eigen::Index a) const {
    return {grid[a].data(), length_, dim_};
  }

  ConstVectorMap cell(const Grid& grid, Eigen::Index a, Eigen::Index b) const {
    if (a < 0 || b < 0 || a >= length_ || b >= length_) {
      throw DimensionError("TwoCache cell (" + std::to_string(a) + "," + std::to_string(b) +
                           ") outside a length-" + std::to_string(length_) + " cache");
    }
    return {grid[a].data() + b * dim_, dim_};
  }

  RowMatrixX<Scalar> flatten(const Grid& grid) const {
    RowMatrixX<Scalar> out(length_ * length_, dim_);
    for (Eigen::Index a = 0; a < length_; ++a) out.middleRows(a * length_, length_) = grid_row(grid, a);
    return out;
  }

  Eigen::Index dim_;
  Eigen::Index length_ = 0;
  std::vector<Scalar> k1_, k2_, v1_, v2_;
  Grid grid_k_, grid_v_;
};

/// Two-cache layout fed with rows that arrive already combined.
template <typename Scalar>
class PrecombinedCache {
 public:
  using ConstMap = Eigen::Map<const RowMatrixX<Scalar>>;

  explicit PrecombinedCache(Eigen::Index dim) : dim_(dim) { detail::require_dim(dim); }

  template <typename A, typename B>
  StepCost append(const Eigen::MatrixBase<A>& key_row, const Eigen::MatrixBase<B>& value_row) {
    detail::require_row(key_row, dim_, "key row");
    detail::require_row(value_row, dim_, "value row");
    detail::push_row(keys_, key_row);
    detail::push_row(values_, value_row);
    ++rows_;
    return {2 * static_cast<std::uint64_t>(dim_), 0, logical_bytes()};
  }

  template <typename Q>
  Attended<Scalar> attend(const Eigen::MatrixBase<Q>& q) const {
    if (rows_ == 0) throw EmptyInputError("PrecombinedCache::attend on an empty cache");
    const auto m = static_cast<std::uint64_t>(rows_);
    return {attn_two(q, keys(), values()), {0, 2 * m * static_cast<std::uint64_t>(dim_), logical_bytes()}};
  }

  Eigen::Index dim() const { return dim_; }
  Eigen::Index rows() const { return rows_; }
  std::uint64_t logical_bytes() const { return 2 * static_cast<std::uint64_t>(rows_ * dim_) * sizeof(Scalar); }

  ConstMap keys() const { return {keys_.data(), rows_, dim_}; }
  ConstMap values() const { return {values_.data(), rows_, dim_}; }

 private:
  Eigen::Index dim_;
  Eigen::Index rows_ = 0;
  std::vector<Scalar> keys_, values_;
};

}  // namespace tkv
