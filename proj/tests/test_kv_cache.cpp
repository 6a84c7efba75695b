#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tkv/kv_cache.hpp"

namespace tkv {
namespace {

struct History {
  RowMatrixXd k1, k2, v1, v2, q;
};

History random_history(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  return {oracle::random_matrix(rng, n, d), oracle::random_matrix(rng, n, d), oracle::random_matrix(rng, n, d),
          oracle::random_matrix(rng, n, d), oracle::random_matrix(rng, n, d)};
}

TEST(FourCache, FirstAppend) {
  FourCache<double> cache(5);
  const VectorXd row = VectorXd::Ones(5);
  const StepCost cost = cache.append(row, row, row, row);
  EXPECT_EQ(cache.length(), 1);
  EXPECT_EQ(cost.logical_bytes, 4u * 5u * 8u);
  EXPECT_EQ(cost.append_scalar_ops, 20u);
}

TEST(FourCache, MemoryIsLinear) {
  FourCache<double> cache(3);
  const VectorXd row = VectorXd::Ones(3);
  for (std::uint64_t n = 1; n <= 32; ++n) {
    cache.append(row, row, row, row);
    EXPECT_EQ(cache.logical_bytes(), 4 * n * 3 * 8);
    EXPECT_EQ(cache.logical_bytes() % (n * 3), 0u);
    EXPECT_EQ(cache.logical_bytes() / (n * 3), 32u);
  }
}

TEST(FourCache, FloatScalarBytes) {
  FourCache<float> cache(4);
  const VectorX<float> row = VectorX<float>::Ones(4);
  cache.append(row, row, row, row);
  EXPECT_EQ(cache.logical_bytes(), 4u * 4u * 4u);
}

TEST(FourCache, AttendMatchesOracleAtEveryStep) {
  std::mt19937_64 rng(1);
  const Eigen::Index n = 8, d = 4;
  const History h = random_history(rng, n, d);
  FourCache<double> cache(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    cache.append(h.k1.row(i), h.k2.row(i), h.v1.row(i), h.v2.row(i));
    const VectorXd q = h.q.row(i).transpose();
    const auto expected = oracle::triple_loop_attention(
        oracle::to_std(q), oracle::to_rows(h.k1.topRows(i + 1)), oracle::to_rows(h.k2.topRows(i + 1)),
        oracle::to_rows(h.v1.topRows(i + 1)), oracle::to_rows(h.v2.topRows(i + 1)));
    EXPECT_LE(oracle::max_abs_diff(expected, cache.attend(q).output), 1e-12) << "step " << i + 1;
  }
}

TEST(FourCache, SingleEntryAttend) {
  FourCache<double> cache(3);
  VectorXd v1(3), v2(3);
  v1 << 1, 2, 3;
  v2 << -1, 0.5, 2;
  cache.append(VectorXd::Ones(3), VectorXd::Ones(3), v1, v2);
  EXPECT_EQ(cache.attend(VectorXd::Constant(3, 4.0)).output, v1.cwiseProduct(v2));
}

TEST(FourCache, AttendOpCountCoversKroneckerMaterialization) {
  std::mt19937_64 rng(2);
  const History h = random_history(rng, 4, 2);
  FourCache<double> cache(2);
  for (Eigen::Index i = 0; i < 4; ++i) cache.append(h.k1.row(i), h.k2.row(i), h.v1.row(i), h.v2.row(i));
  EXPECT_GE(cache.attend(h.q.row(0).transpose()).cost.attend_scalar_ops, 2u * 16u * 2u);
}

TEST(FourCache, Errors) {
  FourCache<double> cache(3);
  EXPECT_THROW(cache.attend(VectorXd::Ones(3)), EmptyInputError);
  EXPECT_THROW(cache.append(VectorXd::Ones(2), VectorXd::Ones(3), VectorXd::Ones(3), VectorXd::Ones(3)),
               DimensionError);
  EXPECT_EQ(cache.length(), 0);
  EXPECT_THROW(FourCache<double>(0), DimensionError);
}

TEST(TwoCache, FirstAppend) {
  TwoCache<double> cache(6);
  const VectorXd row = VectorXd::Ones(6);
  const StepCost cost = cache.append(row, row, row, row);
  EXPECT_EQ(cache.length(), 1);
  EXPECT_EQ(cost.logical_bytes, 2u * 6u * 8u);
  EXPECT_EQ(cost.append_scalar_ops, 2u * 1u * 6u);
}

TEST(TwoCache, AppendWritesTwoIPlusOneCellsPerGrid) {
  std::mt19937_64 rng(3);
  const Eigen::Index d = 3;
  const History h = random_history(rng, 10, d);
  TwoCache<double> cache(d);
  for (Eigen::Index i = 0; i < 10; ++i) {
    const StepCost cost = cache.append(h.k1.row(i), h.k2.row(i), h.v1.row(i), h.v2.row(i));
    const auto len = static_cast<std::uint64_t>(i);
    EXPECT_EQ(cost.append_scalar_ops, 2 * (2 * len + 1) * d);
    EXPECT_EQ(cost.logical_bytes, 2 * (len + 1) * (len + 1) * d * 8);
  }
}

TEST(TwoCache, MemoryIsQuadratic) {
  TwoCache<double> cache(2);
  const VectorXd row = VectorXd::Ones(2);
  for (std::uint64_t n = 1; n <= 32; ++n) {
    cache.append(row, row, row, row);
    EXPECT_EQ(cache.logical_bytes() % (n * n * 2), 0u);
    EXPECT_EQ(cache.logical_bytes() / (n * n * 2), 16u);
    EXPECT_EQ(cache.factor_bytes(), 4 * n * 2 * 8);
  }
}

TEST(TwoCache, GridMatchesRebuildFromScratch) {
  std::mt19937_64 rng(4);
  const Eigen::Index d = 5;
  const History h = random_history(rng, 8, d);
  TwoCache<double> cache(d);
  for (Eigen::Index n = 1; n <= 8; ++n) {
    cache.append(h.k1.row(n - 1), h.k2.row(n - 1), h.v1.row(n - 1), h.v2.row(n - 1));
    const RowMatrixXd kt = kron_colwise(h.k1.topRows(n), h.k2.topRows(n));
    const RowMatrixXd vt = kron_colwise(h.v1.topRows(n), h.v2.topRows(n));
    EXPECT_EQ(cache.flat_keys(), kt);
    EXPECT_EQ(cache.flat_values(), vt);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) {
        EXPECT_EQ(VectorXd(cache.key_cell(a, b)), h.k1.row(a).cwiseProduct(h.k2.row(b)).transpose());
      }
    }
  }
  EXPECT_THROW(cache.key_cell(8, 0), DimensionError);
}

TEST(TwoCache, Errors) {
  TwoCache<double> cache(2);
  EXPECT_THROW(cache.attend(VectorXd::Ones(2)), EmptyInputError);
  const VectorXd row = VectorXd::Ones(2);
  EXPECT_THROW(cache.append(row, row, row, VectorXd::Ones(3)), DimensionError);
  cache.append(row, row, row, row);
  EXPECT_THROW(cache.attend(VectorXd::Ones(3)), DimensionError);
}

// Shared token streams: layouts agree at every prefix, and the op-count gap
// is exactly the Kronecker materialization.
TEST(Layouts, AgreeAtEveryPrefix) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 8);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index n = 12, d = dim(rng);
    const History h = random_history(rng, n, d);
    FourCache<double> four(d);
    TwoCache<double> two(d);
    for (Eigen::Index i = 0; i < n; ++i) {
      four.append(h.k1.row(i), h.k2.row(i), h.v1.row(i), h.v2.row(i));
      two.append(h.k1.row(i), h.k2.row(i), h.v1.row(i), h.v2.row(i));
      const VectorXd q = h.q.row(i).transpose();
      const auto a = four.attend(q);
      const auto b = two.attend(q);
      ASSERT_LE((a.output - b.output).cwiseAbs().maxCoeff(), 1e-12);
      ASSERT_LE((b.output - attn_two(q, two.flat_keys(), two.flat_values())).cwiseAbs().maxCoeff(), 1e-12);
      const auto len = static_cast<std::uint64_t>(i + 1);
      ASSERT_GT(a.cost.attend_scalar_ops, b.cost.attend_scalar_ops);
      ASSERT_EQ(a.cost.attend_scalar_ops - b.cost.attend_scalar_ops, kron_materialization_ops(len, d));
      ASSERT_GE(b.cost.attend_scalar_ops, len * len * d);
    }
  }
}

TEST(Layouts, CumulativeGapIsCubic) {
  // Summed per-step gaps 2 i^2 d for i = 1..n; final step alone is 2 n^2 d.
  const Eigen::Index d = 4;
  std::mt19937_64 rng(6);
  for (const Eigen::Index n : {8, 16}) {
    const History h = random_history(rng, n, d);
    FourCache<double> four(d);
    TwoCache<double> two(d);
    std::uint64_t total = 0, last = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      four.append(h.k1.row(i), h.k2.row(i), h.v1.row(i), h.v2.row(i));
      two.append(h.k1.row(i), h.k2.row(i), h.v1.row(i), h.v2.row(i));
      const VectorXd q = h.q.row(i).transpose();
      last = four.attend(q).cost.attend_scalar_ops - two.attend(q).cost.attend_scalar_ops;
      total += last;
    }
    const auto nn = static_cast<std::uint64_t>(n);
    EXPECT_EQ(last, 2 * nn * nn * d);
    EXPECT_EQ(total, 2 * d * nn * (nn + 1) * (2 * nn + 1) / 6);
  }
}

TEST(PrecombinedCache, MatchesAttnTwo) {
  std::mt19937_64 rng(7);
  const RowMatrixXd k = oracle::random_matrix(rng, 9, 3), v = oracle::random_matrix(rng, 9, 3);
  PrecombinedCache<double> cache(3);
  for (Eigen::Index r = 0; r < 9; ++r) cache.append(k.row(r), v.row(r));
  const VectorXd q = oracle::random_vector(rng, 3);
  const auto out = cache.attend(q);
  EXPECT_EQ(out.output, attn_two(q, k, v));
  EXPECT_EQ(out.cost.logical_bytes, 2u * 9u * 3u * 8u);
  EXPECT_EQ(out.cost.attend_scalar_ops, 2u * 9u * 3u);
  EXPECT_LE(oracle::max_abs_diff(oracle::flat_attention(oracle::to_std(q), oracle::to_rows(k), oracle::to_rows(v)),
                                 out.output),
            1e-12);
}

}  // namespace
}  // namespace tkv
