#pragma once

// Streaming clustered compression of tensor-attention caches.
//
// Keys are grouped by leader clustering: a key joins the earliest-created
// cluster whose leader is within delta/2, otherwise it becomes a new leader.
// Each cluster keeps its leader, a key count and the running sum of the
// values attached to its keys. Attention is estimated with one logit per
// cluster, weighted by the cluster count:
//
//   estimate = sum_c exp(<leader_c, q>) * value_sum_c / sum_c count_c * exp(<leader_c, q>)
//
// The four-cache variant clusters the k1 and k2 streams separately and pairs
// the clusters at query time. Because the entrywise product is bilinear, the
// value sum of a paired cluster is exactly value_sum_1 (.) value_sum_2.

#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "tkv/kv_cache.hpp"
#include "tkv/tensor_core.hpp"

namespace tkv {

inline constexpr double kUnitBallClusterDelta = std::numbers::e / 3.0;

struct Cluster {
  VectorXd center;
  std::uint64_t count = 0;
  VectorXd value_sum;
};

class ClusteredCache {
 public:
  ClusteredCache(Eigen::Index dim, double delta);

  /// Returns the index of the cluster the key was assigned to.
  std::size_t insert(const Eigen::Ref<const VectorXd>& key, const Eigen::Ref<const VectorXd>& value);

  VectorXd estimate(const Eigen::Ref<const VectorXd>& q) const;

  const std::vector<Cluster>& clusters() const { return clusters_; }
  std::size_t cluster_count() const { return clusters_.size(); }
  std::uint64_t total_keys() const { return total_keys_; }
  Eigen::Index dim() const { return dim_; }
  double delta() const { return delta_; }

  /// Leader + value sum + count per cluster, 8 bytes each.
  std::uint64_t logical_bytes() const;

 private:
  Eigen::Index dim_;
  double delta_;
  std::vector<Cluster> clusters_;
  std::uint64_t total_keys_ = 0;
};

/// Four-cache variant: independent clusterings of the k1 and k2 streams.
class FactoredClusteredCache {
 public:
  FactoredClusteredCache(Eigen::Index dim, double delta) : left_(dim, delta), right_(dim, delta) {}

  void insert(const Eigen::Ref<const VectorXd>& k1, const Eigen::Ref<const VectorXd>& k2,
              const Eigen::Ref<const VectorXd>& v1, const Eigen::Ref<const VectorXd>& v2);

  VectorXd estimate(const Eigen::Ref<const VectorXd>& q) const;

  const ClusteredCache& left() const { return left_; }
  const ClusteredCache& right() const { return right_; }
  std::size_t paired_cluster_count() const { return left_.cluster_count() * right_.cluster_count(); }
  std::uint64_t logical_bytes() const { return left_.logical_bytes() + right_.logical_bytes(); }

 private:
  ClusteredCache left_;
  ClusteredCache right_;
};

struct ApproxError {
  double abs_error = 0.0;  // ||estimate - exact||_2
  double bound = 0.0;      // epsilon * ||softmax(K q)||_2 * ||V||_2 (spectral norm)
  bool within_bound = false;
};

struct SubgenResult {
  VectorXd estimate;
  VectorXd exact;  // empty when the error was not computed
  ApproxError error;
  double error_scale = 0.0;  // ||softmax(K q)||_2 * ||V||_2
  std::size_t clusters = 0;
  std::uint64_t logical_bytes = 0;
  double max_query_norm = 0.0;
};

struct SubgenOptions {
  double epsilon = 0.0;
  bool compute_error = true;
};

SubgenResult subgen_attend_four(std::span<const Quintuple> stream, double delta,
                                const Eigen::Ref<const VectorXd>& final_q,
                                const SubgenOptions& options = {});

SubgenResult subgen_attend_two(std::span<const Triple> stream, double delta,
                               const Eigen::Ref<const VectorXd>& final_q,
                               const SubgenOptions& options = {});

/// Error against an exact reference: abs error, scale ||softmax(K q)|| * ||V||
/// and the epsilon-scaled bound.
ApproxError approx_error(const VectorXd& estimate, const VectorXd& exact, double error_scale,
                         double epsilon);

/// ||softmax(keys * q)||_2 * ||values||_2 with the spectral norm on values.
double error_scale(const RowMatrixXd& keys, const RowMatrixXd& values, const VectorXd& q);

struct ClusterAssignment {
  std::size_t clusters = 0;
  std::vector<std::size_t> assignment;  // cluster index per input row
  RowMatrixXd leaders;
};

/// Leader clustering with threshold delta/2 over points of the unit ball.
/// Throws DomainError for a point with norm above 1 + 1e-9.
ClusterAssignment greedy_clusterability(const RowMatrixXd& points, double delta);

/// (3 / delta)^dim, the covering-number bound of the unit ball.
double covering_bound(int dim, double delta);

// Synthetic (m, delta)-clusterable streams.

struct ClusterableConfig {
  Layout layout = Layout::kFour;
  Eigen::Index length = 64;  // quintuples (four) or triples (two)
  Eigen::Index dim = 8;
  std::size_t clusters = 4;
  double delta = 0.1;
  double query_norm = 2.0;
  double spread = 0.25;  // keys lie within spread * delta of their center; 0 repeats the center
};

/// Centers on the unit sphere with pairwise distance > 2 delta; each key lies
/// within spread * delta of a uniformly chosen center. For spread <= 1/4 leader
/// clustering recovers exactly `clusters` groups. Values are i.i.d. standard normal. All queries
/// have norm `query_norm`.
std::vector<Quintuple> make_clusterable_quintuples(const ClusterableConfig& config, std::uint64_t seed);
std::vector<Triple> make_clusterable_triples(const ClusterableConfig& config, std::uint64_t seed);

/// Runs the configured layout on one synthetic stream. The final query is the
/// query of the last stream element.
SubgenResult run_clusterable(const ClusterableConfig& config, std::uint64_t seed,
                             const SubgenOptions& options = {});

/// Safety factor times the largest abs_error / error_scale seen over `seeds`.
double calibrate_epsilon(const ClusterableConfig& config, std::span<const std::uint64_t> seeds,
                         double safety_factor = 2.0);

}  // namespace tkv
