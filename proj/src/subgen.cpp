#include "tkv/subgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tkv/jl_projection.hpp"

namespace tkv {

namespace {

void require_vector(const Eigen::Ref<const VectorXd>& v, Eigen::Index dim, const char* name) {
  if (v.size() != dim) {
    throw DimensionError(std::string(name) + ": expected length " + std::to_string(dim) + ", got " +
                         std::to_string(v.size()));
  }
  detail::require_finite(v, name);
}

void require_delta(double delta) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw DomainError("clustering delta must be finite and >= 0, got " + std::to_string(delta));
  }
}

// First leader within radius, in creation order.
std::size_t find_leader(const std::vector<Cluster>& clusters, const Eigen::Ref<const VectorXd>& key,
                        double radius) {
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if ((clusters[c].center - key).norm() <= radius) return c;
  }
  return clusters.size();
}

VectorXd unit_direction(GaussianSource& gauss, Eigen::Index dim) {
  VectorXd v(dim);
  do {
    for (Eigen::Index j = 0; j < dim; ++j) v(j) = gauss();
  } while (v.norm() == 0.0);
  return v.normalized();
}

RowMatrixXd separated_centers(GaussianSource& gauss, const ClusterableConfig& config) {
  RowMatrixXd centers(static_cast<Eigen::Index>(config.clusters), config.dim);
  const double min_gap = 2.0 * config.delta;
  constexpr int kMaxAttempts = 100000;
  Eigen::Index placed = 0;
  for (int attempt = 0; placed < centers.rows(); ++attempt) {
    if (attempt == kMaxAttempts) {
      throw DomainError("cannot place " + std::to_string(config.clusters) +
                        " unit-sphere centers with pairwise gap > " + std::to_string(min_gap) +
                        " in dim " + std::to_string(config.dim));
    }
    const VectorXd candidate = unit_direction(gauss, config.dim);
    bool ok = true;
    for (Eigen::Index c = 0; c < placed && ok; ++c) ok = (centers.row(c).transpose() - candidate).norm() > min_gap;
    if (ok) centers.row(placed++) = candidate.transpose();
  }
  return centers;
}

VectorXd sample_near(GaussianSource& gauss, const RowMatrixXd& centers, double radius) {
  const auto c = static_cast<Eigen::Index>(gauss.uniform_open() * static_cast<double>(centers.rows()));
  const Eigen::Index idx = std::min(c, centers.rows() - 1);
  const double r = radius * std::pow(gauss.uniform_open(), 1.0 / static_cast<double>(centers.cols()));
  return centers.row(idx).transpose() + r * unit_direction(gauss, centers.cols());
}

VectorXd gaussian_vector(GaussianSource& gauss, Eigen::Index dim) {
  VectorXd v(dim);
  for (Eigen::Index j = 0; j < dim; ++j) v(j) = gauss();
  return v;
}

void validate_config(const ClusterableConfig& config) {
  if (config.length < 1 || config.dim < 1 || config.clusters < 1) {
    throw DomainError("clusterable stream needs length, dim and clusters >= 1");
  }
  require_delta(config.delta);
  if (!(config.spread >= 0.0 && config.spread <= 0.25)) {
    throw DomainError("clusterable stream spread must lie in [0, 0.25]");
  }
}

}  // namespace

ClusteredCache::ClusteredCache(Eigen::Index dim, double delta) : dim_(dim), delta_(delta) {
  if (dim < 1) throw DimensionError("ClusteredCache: dim must be >= 1");
  require_delta(delta);
}

std::size_t ClusteredCache::insert(const Eigen::Ref<const VectorXd>& key,
                                   const Eigen::Ref<const VectorXd>& value) {
  require_vector(key, dim_, "key");
  require_vector(value, dim_, "value");
  const std::size_t c = find_leader(clusters_, key, delta_ / 2.0);
  if (c == clusters_.size()) {
    clusters_.push_back({key, 1, value});
  } else {
    ++clusters_[c].count;
    clusters_[c].value_sum += value;
  }
  ++total_keys_;
  return c;
}

VectorXd ClusteredCache::estimate(const Eigen::Ref<const VectorXd>& q) const {
  if (clusters_.empty()) throw EmptyInputError("ClusteredCache::estimate on an empty cache");
  require_vector(q, dim_, "query");
  VectorXd logits(static_cast<Eigen::Index>(clusters_.size()));
  for (std::size_t c = 0; c < clusters_.size(); ++c) logits(static_cast<Eigen::Index>(c)) = clusters_[c].center.dot(q);
  const double top = logits.maxCoeff();
  VectorXd numerator = VectorXd::Zero(dim_);
  double denominator = 0.0;
  for (std::size_t c = 0; c < clusters_.size(); ++c) {
    const double w = std::exp(logits(static_cast<Eigen::Index>(c)) - top);
    numerator += w * clusters_[c].value_sum;
    denominator += w * static_cast<double>(clusters_[c].count);
  }
  return numerator / denominator;
}

std::uint64_t ClusteredCache::logical_bytes() const {
  return clusters_.size() * (2 * static_cast<std::uint64_t>(dim_) + 1) * sizeof(double);
}

void FactoredClusteredCache::insert(const Eigen::Ref<const VectorXd>& k1, const Eigen::Ref<const VectorXd>& k2,
                                    const Eigen::Ref<const VectorXd>& v1, const Eigen::Ref<const VectorXd>& v2) {
  left_.insert(k1, v1);
  right_.insert(k2, v2);
}

VectorXd FactoredClusteredCache::estimate(const Eigen::Ref<const VectorXd>& q) const {
  if (left_.cluster_count() == 0) throw EmptyInputError("FactoredClusteredCache::estimate on an empty cache");
  require_vector(q, left_.dim(), "query");
  const auto& lc = left_.clusters();
  const auto& rc = right_.clusters();
  VectorXd logits(static_cast<Eigen::Index>(lc.size() * rc.size()));
  for (std::size_t a = 0; a < lc.size(); ++a) {
    for (std::size_t b = 0; b < rc.size(); ++b) {
      logits(static_cast<Eigen::Index>(a * rc.size() + b)) = lc[a].center.cwiseProduct(rc[b].center).dot(q);
    }
  }
  const double top = logits.maxCoeff();
  VectorXd numerator = VectorXd::Zero(left_.dim());
  double denominator = 0.0;
  for (std::size_t a = 0; a < lc.size(); ++a) {
    for (std::size_t b = 0; b < rc.size(); ++b) {
      const double w = std::exp(logits(static_cast<Eigen::Index>(a * rc.size() + b)) - top);
      numerator += w * lc[a].value_sum.cwiseProduct(rc[b].value_sum);
      denominator += w * static_cast<double>(lc[a].count) * static_cast<double>(rc[b].count);
    }
  }
  return numerator / denominator;
}

double error_scale(const RowMatrixXd& keys, const RowMatrixXd& values, const VectorXd& q) {
  const double softmax_norm = softmax(keys * q).norm();
  const Eigen::MatrixXd gram = values.transpose() * values;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  const double spectral = std::sqrt(std::max(0.0, solver.eigenvalues().maxCoeff()));
  return softmax_norm * spectral;
}

ApproxError approx_error(const VectorXd& estimate, const VectorXd& exact, double scale, double epsilon) {
  ApproxError e;
  e.abs_error = (estimate - exact).norm();
  e.bound = epsilon * scale;
  e.within_bound = e.abs_error <= e.bound;
  return e;
}

SubgenResult subgen_attend_four(std::span<const Quintuple> stream, double delta,
                                const Eigen::Ref<const VectorXd>& final_q, const SubgenOptions& options) {
  if (stream.empty()) throw EmptyInputError("subgen_attend_four: empty stream");
  const Eigen::Index dim = stream.front().k1.size();
  FactoredClusteredCache cache(dim, delta);
  SubgenResult result;
  for (const auto& item : stream) {
    require_vector(item.q, dim, "stream query");
    cache.insert(item.k1, item.k2, item.v1, item.v2);
    result.max_query_norm = std::max(result.max_query_norm, item.q.norm());
  }
  require_vector(final_q, dim, "final query");
  result.max_query_norm = std::max(result.max_query_norm, final_q.norm());
  result.estimate = cache.estimate(final_q);
  result.clusters = cache.paired_cluster_count();
  result.logical_bytes = cache.logical_bytes();
  if (options.compute_error) {
    const auto n = static_cast<Eigen::Index>(stream.size());
    RowMatrixXd k1(n, dim), k2(n, dim), v1(n, dim), v2(n, dim);
    for (Eigen::Index t = 0; t < n; ++t) {
      const auto& item = stream[static_cast<std::size_t>(t)];
      k1.row(t) = item.k1.transpose();
      k2.row(t) = item.k2.transpose();
      v1.row(t) = item.v1.transpose();
      v2.row(t) = item.v2.transpose();
    }
    const RowMatrixXd keys = kron_colwise(k1, k2);
    const RowMatrixXd values = kron_colwise(v1, v2);
    const VectorXd q = final_q;
    result.exact = attn_two(q, keys, values);
    result.error_scale = error_scale(keys, values, q);
    result.error = approx_error(result.estimate, result.exact, result.error_scale, options.epsilon);
  } else {
    result.error.abs_error = result.error.bound = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

SubgenResult subgen_attend_two(std::span<const Triple> stream, double delta,
                               const Eigen::Ref<const VectorXd>& final_q, const SubgenOptions& options) {
  if (stream.empty()) throw EmptyInputError("subgen_attend_two: empty stream");
  const Eigen::Index dim = stream.front().key.size();
  ClusteredCache cache(dim, delta);
  SubgenResult result;
  for (const auto& item : stream) {
    require_vector(item.q, dim, "stream query");
    cache.insert(item.key, item.value);
    result.max_query_norm = std::max(result.max_query_norm, item.q.norm());
  }
  require_vector(final_q, dim, "final query");
  result.max_query_norm = std::max(result.max_query_norm, final_q.norm());
  result.estimate = cache.estimate(final_q);
  result.clusters = cache.cluster_count();
  result.logical_bytes = cache.logical_bytes();
  if (options.compute_error) {
    const auto n = static_cast<Eigen::Index>(stream.size());
    RowMatrixXd keys(n, dim), values(n, dim);
    for (Eigen::Index t = 0; t < n; ++t) {
      keys.row(t) = stream[static_cast<std::size_t>(t)].key.transpose();
      values.row(t) = stream[static_cast<std::size_t>(t)].value.transpose();
    }
    const VectorXd q = final_q;
    result.exact = attn_two(q, keys, values);
    result.error_scale = error_scale(keys, values, q);
    result.error = approx_error(result.estimate, result.exact, result.error_scale, options.epsilon);
  } else {
    result.error.abs_error = result.error.bound = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

ClusterAssignment greedy_clusterability(const RowMatrixXd& points, double delta) {
  if (points.rows() == 0) throw EmptyInputError("greedy_clusterability: no points");
  require_delta(delta);
  for (Eigen::Index p = 0; p < points.rows(); ++p) {
    const double norm = points.row(p).norm();
    if (!(norm <= 1.0 + 1e-9)) {
      throw DomainError("greedy_clusterability: point " + std::to_string(p) + " has norm " +
                        std::to_string(norm) + " outside the unit ball");
    }
  }
  ClusteredCache cache(points.cols(), delta);
  const VectorXd no_value = VectorXd::Zero(points.cols());
  ClusterAssignment out;
  out.assignment.reserve(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index p = 0; p < points.rows(); ++p) {
    out.assignment.push_back(cache.insert(points.row(p).transpose(), no_value));
  }
  out.clusters = cache.cluster_count();
  out.leaders.resize(static_cast<Eigen::Index>(out.clusters), points.cols());
  for (std::size_t c = 0; c < out.clusters; ++c) {
    out.leaders.row(static_cast<Eigen::Index>(c)) = cache.clusters()[c].center.transpose();
  }
  return out;
}

double covering_bound(int dim, double delta) {
  if (dim < 1) throw DomainError("covering_bound: dim must be >= 1");
  if (!(delta > 0.0)) throw DomainError("covering_bound: delta must be positive");
  return std::pow(3.0 / delta, dim);
}

std::vector<Quintuple> make_clusterable_quintuples(const ClusterableConfig& config, std::uint64_t seed) {
  validate_config(config);
  GaussianSource gauss(seed);
  const RowMatrixXd left = separated_centers(gauss, config);
  const RowMatrixXd right = separated_centers(gauss, config);
  const double radius = config.spread * config.delta;
  std::vector<Quintuple> stream;
  stream.reserve(static_cast<std::size_t>(config.length));
  for (Eigen::Index t = 0; t < config.length; ++t) {
    Quintuple item;
    item.q = config.query_norm * unit_direction(gauss, config.dim);
    item.k1 = sample_near(gauss, left, radius);
    item.k2 = sample_near(gauss, right, radius);
    item.v1 = gaussian_vector(gauss, config.dim);
    item.v2 = gaussian_vector(gauss, config.dim);
    stream.push_back(std::move(item));
  }
  return stream;
}

std::vector<Triple> make_clusterable_triples(const ClusterableConfig& config, std::uint64_t seed) {
  validate_config(config);
  GaussianSource gauss(seed);
  const RowMatrixXd centers = separated_centers(gauss, config);
  const double radius = config.spread * config.delta;
  std::vector<Triple> stream;
  stream.reserve(static_cast<std::size_t>(config.length));
  for (Eigen::Index t = 0; t < config.length; ++t) {
    Triple item;
    item.q = config.query_norm * unit_direction(gauss, config.dim);
    item.key = sample_near(gauss, centers, radius);
    item.value = gaussian_vector(gauss, config.dim);
    stream.push_back(std::move(item));
  }
  return stream;
}

SubgenResult run_clusterable(const ClusterableConfig& config, std::uint64_t seed, const SubgenOptions& options) {
  if (config.layout == Layout::kFour) {
    const auto stream = make_clusterable_quintuples(config, seed);
    return subgen_attend_four(stream, config.delta, stream.back().q, options);
  }
  const auto stream = make_clusterable_triples(config, seed);
  return subgen_attend_two(stream, config.delta, stream.back().q, options);
}

double calibrate_epsilon(const ClusterableConfig& config, std::span<const std::uint64_t> seeds,
                         double safety_factor) {
  if (seeds.empty()) throw EmptyInputError("calibrate_epsilon: no seeds");
  double worst = 0.0;
  for (const auto seed : seeds) {
    const SubgenResult r = run_clusterable(config, seed);
    if (r.error_scale > 0.0) worst = std::max(worst, r.error.abs_error / r.error_scale);
  }
  return safety_factor * worst;
}

}  // namespace tkv
