#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "tkv/bench.hpp"
#include "tkv/jl_projection.hpp"

namespace tkv {
namespace {

TEST(GaussianSource, MomentsAndDeterminism) {
  GaussianSource a(42), b(42);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double x = a();
    ASSERT_EQ(x, b());
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(JlDimension, Formula) {
  EXPECT_EQ(jl_dimension(256, 0.3), static_cast<Eigen::Index>(std::ceil(8.0 * std::log(256.0) / 0.09)));
  EXPECT_EQ(jl_dimension(8, 0.1), 1664);   // ceil(800 ln 8) = ceil(1663.55)
  EXPECT_EQ(jl_dimension(16, 0.1), 2219);  // ceil(800 ln 16) = ceil(2218.07)
  EXPECT_EQ(jl_dimension(1, 0.1), 1);
  EXPECT_EQ(jl_dimension(100, 0.5, 1.0), 19);  // ceil(4 ln 100) = ceil(18.42)
  EXPECT_THROW(jl_dimension(0, 0.1), DomainError);
  EXPECT_THROW(jl_dimension(8, 0.0), DomainError);
}

TEST(ProjectBasis, ExpectedInnerProducts) {
  // Over many seeds: E<S e_t, S e_t> = 1 and E<S e_t, S e_s> = 0.
  const int seeds = 1000;
  double self = 0.0, cross = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const RowMatrixXd m = project_basis({4, 16, static_cast<std::uint64_t>(s), false});
    self += m.row(0).squaredNorm();
    cross += m.row(0).dot(m.row(1));
  }
  EXPECT_NEAR(self / seeds, 1.0, 0.05);
  EXPECT_NEAR(cross / seeds, 0.0, 0.05);
}

TEST(ProjectBasis, ShapeDeterminismAndRenormalize) {
  const RowMatrixXd a = project_basis({10, 32, 7, false});
  EXPECT_EQ(a.rows(), 10);
  EXPECT_EQ(a.cols(), 32);
  EXPECT_EQ(a, project_basis({10, 32, 7, false}));
  EXPECT_NE(a, project_basis({10, 32, 8, false}));
  const RowMatrixXd u = project_basis({10, 32, 7, true});
  for (Eigen::Index r = 0; r < 10; ++r) {
    EXPECT_NEAR(u.row(r).norm(), 1.0, 1e-14);
    EXPECT_LE((u.row(r) - a.row(r).normalized()).cwiseAbs().maxCoeff(), 1e-15);
  }
  EXPECT_THROW(project_basis({0, 4, 0, false}), DimensionError);
}

TEST(ProjectBasis, PrefixStability) {
  // Drawing R column by column makes the first rows independent of n.
  const RowMatrixXd small = project_basis({5, 12, 3, false});
  const RowMatrixXd large = project_basis({9, 12, 3, false});
  EXPECT_EQ(small, large.topRows(5));
}

TEST(CheckDeviation, OrthonormalRowsHaveNoDeviation) {
  const RowMatrixXd eye = RowMatrixXd::Identity(6, 6);
  const DeviationReport r = check_deviation(eye, 0.1);
  EXPECT_EQ(r.max_cross, 0.0);
  EXPECT_EQ(r.max_norm_dev, 0.0);
  EXPECT_FALSE(r.violated);
}

TEST(CheckDeviation, DuplicateRowIsFullCross) {
  RowMatrixXd m = RowMatrixXd::Identity(3, 3);
  m.row(2) = m.row(0);
  const DeviationReport r = check_deviation(m, 0.5);
  EXPECT_EQ(r.max_cross, 1.0);
  EXPECT_TRUE(r.violated);
}

TEST(CheckDeviation, NormDeviation) {
  RowMatrixXd m = RowMatrixXd::Identity(2, 2);
  m(1, 1) = 1.5;
  const DeviationReport r = check_deviation(m, 0.3);
  EXPECT_DOUBLE_EQ(r.max_norm_dev, 1.25);
  EXPECT_TRUE(r.violated);
}

TEST(CheckDeviation, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RowMatrixXd m = project_basis({40, 64, seed, false});
    const DeviationReport fast = check_deviation(m, 0.3);
    const DeviationReport slow = oracle::brute_force_deviation(m, 0.3);
    EXPECT_EQ(fast.max_cross, slow.max_cross);
    EXPECT_EQ(fast.max_norm_dev, slow.max_norm_dev);
    EXPECT_EQ(fast.violated, slow.violated);
  }
}

TEST(CheckDeviation, RowPermutationSymmetry) {
  std::mt19937_64 rng(9);
  const RowMatrixXd m = project_basis({30, 50, 4, false});
  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  RowMatrixXd p(30, 50);
  for (int r = 0; r < 30; ++r) p.row(r) = m.row(perm[r]);
  const DeviationReport a = check_deviation(m, 0.3), b = check_deviation(p, 0.3);
  EXPECT_NEAR(a.max_cross, b.max_cross, 1e-15);
  EXPECT_NEAR(a.max_norm_dev, b.max_norm_dev, 1e-15);
}

TEST(CheckDeviation, EmptyThrows) { EXPECT_THROW(check_deviation(RowMatrixXd(0, 3), 0.1), EmptyInputError); }

TEST(JlSweep, ViolationRateAtMultiplierEight) {
  const auto rows = jl_sweep(256, 0.3, {8.0, 16.0}, 100, 0);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].d, jl_dimension(256, 0.3));
  EXPECT_LE(rows[0].violation_rate, 0.05);
  EXPECT_LE(rows[1].violation_rate, rows[0].violation_rate + 0.02);
  EXPECT_LT(rows[1].mean_max_cross, rows[0].mean_max_cross);
}

TEST(JlSweep, RateDecreasesWithDimension) {
  // Below multiplier 8 the rate is far from zero, so the drop is visible.
  const auto rows = jl_sweep(64, 0.3, {2.0, 3.0, 4.0, 6.0}, 50, 100);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_GT(rows[k].d, rows[k - 1].d);
    EXPECT_LE(rows[k].violation_rate, rows[k - 1].violation_rate + 0.02);
  }
  EXPECT_EQ(rows.front().violation_rate, 1.0);
  EXPECT_LT(rows.back().violation_rate, 0.2);
}

}  // namespace
}  // namespace tkv
