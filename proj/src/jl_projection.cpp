#include "tkv/jl_projection.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace tkv {

double GaussianSource::uniform_open() {
  // (k + 0.5) / 2^53 for a 53-bit k never hits 0 or 1.
  const std::uint64_t k = engine_() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double GaussianSource::operator()() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform_open();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Eigen::Index jl_dimension(Eigen::Index n, double epsilon, double constant) {
  if (n < 1) throw DomainError("jl_dimension: n must be >= 1");
  if (!(epsilon > 0.0)) throw DomainError("jl_dimension: epsilon must be positive");
  if (!(constant > 0.0)) throw DomainError("jl_dimension: constant must be positive");
  const double d = std::ceil(constant * std::log(static_cast<double>(n)) / (epsilon * epsilon));
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(d));
}

RowMatrixXd project_basis(const JLProjector& projector) {
  if (projector.source_dim < 1 || projector.target_dim < 1) {
    throw DimensionError("JLProjector: source and target dims must be >= 1, got " +
                         std::to_string(projector.source_dim) + " and " +
                         std::to_string(projector.target_dim));
  }
  GaussianSource gauss(projector.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(projector.target_dim));
  RowMatrixXd out(projector.source_dim, projector.target_dim);
  for (Eigen::Index t = 0; t < projector.source_dim; ++t) {
    for (Eigen::Index r = 0; r < projector.target_dim; ++r) out(t, r) = scale * gauss();
  }
  if (projector.renormalize) out.rowwise().normalize();
  return out;
}

DeviationReport check_deviation(const RowMatrixXd& vectors, double epsilon) {
  if (vectors.rows() < 1) throw EmptyInputError("check_deviation: need at least one vector");
  const Eigen::Index n = vectors.rows();
  const Eigen::Index d = vectors.cols();
  // Plain sequential dot products so the statistics are reproducible bit for bit.
  const auto dot = [&](Eigen::Index a, Eigen::Index b) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) s += vectors(a, k) * vectors(b, k);
    return s;
  };
  DeviationReport report;
  report.epsilon = epsilon;
  for (Eigen::Index a = 0; a < n; ++a) {
    report.max_norm_dev = std::max(report.max_norm_dev, std::abs(dot(a, a) - 1.0));
    for (Eigen::Index b = a + 1; b < n; ++b) {
      report.max_cross = std::max(report.max_cross, std::abs(dot(a, b)));
    }
  }
  report.violated = report.max_cross > epsilon || report.max_norm_dev > epsilon;
  return report;
}

}  // namespace tkv
