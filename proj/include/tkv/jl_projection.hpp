#pragma once

#include <cstdint>
#include <random>

#include "tkv/tensor_core.hpp"

namespace tkv {

inline constexpr double kDefaultJlConstant = 8.0;

/// Seeded Gaussian map S = R / sqrt(target_dim) from R^source_dim to R^target_dim.
struct JLProjector {
  Eigen::Index source_dim = 1;
  Eigen::Index target_dim = 1;
  std::uint64_t seed = 0;
  bool renormalize = false;  // rescale each projected vector to unit length
};

struct DeviationReport {
  double max_cross = 0.0;     // max |<s_i, s_j>| over i != j
  double max_norm_dev = 0.0;  // max |<s_i, s_i> - 1|
  double epsilon = 0.0;
  bool violated = false;
};

/// Standard normal deviates from mt19937_64 via the Box-Muller transform.
/// Both the engine and the transform are fixed, so a seed reproduces the same
/// stream on every platform (std::normal_distribution is not portable).
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double operator()();

  /// Uniform on (0, 1) with 53 random bits.
  double uniform_open();

  std::mt19937_64& engine() { return engine_; }

 private:

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Smallest target dimension ceil(constant * epsilon^-2 * ln n).
Eigen::Index jl_dimension(Eigen::Index n, double epsilon, double constant = kDefaultJlConstant);

/// Projections of the standard basis e_1..e_n: row t is S * e_t, i.e. column t
/// of R scaled by 1/sqrt(target_dim). R is drawn column by column.
RowMatrixXd project_basis(const JLProjector& projector);

/// Exhaustive pair scan of the Gram entries of the rows of `vectors`.
DeviationReport check_deviation(const RowMatrixXd& vectors, double epsilon);

}  // namespace tkv
