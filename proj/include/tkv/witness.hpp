#pragma once

// INDEX-reduction witnesses for the tensor-attention memory lower bounds.
//
// Alice streams JL-projected near-orthonormal keys with her bit matrix as the
// values. Bob appends one all-zero step and queries with C times the key of
// his target row; the softmax spikes on that row, so coordinate j of the
// attention output lands below delta when x(i, j) = 0 and above Delta when it
// is 1. Bob decodes with the midpoint threshold.
//
// Indices are 0-based throughout.

#include <cstdint>
#include <vector>

#include "tkv/jl_projection.hpp"
#include "tkv/kv_cache.hpp"

namespace tkv {

enum class Protocol { kFour, kTwo };

inline const char* to_string(Protocol p) { return p == Protocol::kFour ? "four" : "two"; }

using BitMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct IndexInstance {
  Protocol protocol = Protocol::kFour;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  BitMatrix bits;  // n x d (four) or n^2 x d (two)
  Eigen::Index target_row = 0;
  Eigen::Index target_col = 0;
  double epsilon = 0.1;
  double spike = 0.0;      // C
  std::uint64_t seed = 0;  // JL projection seed, shared out of band
};

struct SpikeBounds {
  double delta = 0.0;  // upper bound on the output coordinate when the bit is 0
  double Delta = 0.0;  // lower bound when the bit is 1
};

struct WitnessReport {
  int recovered_bit = 0;
  int true_bit = 0;
  double output_coordinate = 0.0;
  double delta_bound = 0.0;  // exact bounds, zero step included
  double Delta_bound = 0.0;
  double threshold = 0.0;
  bool success = false;
  bool jl_good = false;
  Eigen::Index target_row = 0;
  Eigen::Index target_col = 0;
};

/// Rows of the bit matrix: n for the four-cache protocol, n^2 for the two-cache one.
Eigen::Index instance_rows(Protocol protocol, Eigen::Index n);

/// C = 2 ln n (four) or C = 4 ln n (two).
double default_spike(Protocol protocol, Eigen::Index n);

/// Throws SeparationError unless C > ln(rows) / (1 - 2 epsilon), DomainError
/// for malformed instances.
void validate(const IndexInstance& instance);

/// Bounds exactly as stated in the lower-bound argument, which ignores the
/// zero step Bob appends.
SpikeBounds spike_bounds_four(Eigen::Index n, double spike, double epsilon);
SpikeBounds spike_bounds_two(Eigen::Index n, double spike, double epsilon);

/// Rigorous bounds under the JL event, counting the zero-logit cells the zero
/// step adds (2n + 1 for four caches, 1 for two) and the sharper (rows - 1)
/// count of competing rows.
SpikeBounds exact_spike_bounds_four(Eigen::Index n, double spike, double epsilon);
SpikeBounds exact_spike_bounds_two(Eigen::Index n, double spike, double epsilon);

/// The JL key family of the instance: rows(instance) vectors in dimension d.
RowMatrixXd witness_keys(const IndexInstance& instance);

/// n + 1 quintuples: Alice's n steps then Bob's zero step carrying the query.
std::vector<Quintuple> build_four(const IndexInstance& instance);

/// n^2 + 1 triples, same structure.
std::vector<Triple> build_two(const IndexInstance& instance);

/// Streams the instance through the matching kv cache (FourCache or
/// PrecombinedCache) and returns Bob's attention output.
VectorXd decode_output(const IndexInstance& instance);

/// Thresholds coordinate target_col of an attention output.
WitnessReport make_report(const IndexInstance& instance, const VectorXd& output, bool jl_good);

/// decode_output + JL check + make_report.
WitnessReport recover_bit(const IndexInstance& instance);

struct TrialConfig {
  Protocol protocol = Protocol::kFour;
  Eigen::Index n = 8;
  Eigen::Index d = 0;  // 0 picks jl_dimension(rows, epsilon, jl_constant)
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  double epsilon = 0.1;
  double spike = 0.0;  // 0 picks default_spike
  double jl_constant = kDefaultJlConstant;
};

struct TrialSummary {
  Protocol protocol = Protocol::kFour;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  double epsilon = 0.0;
  double spike = 0.0;
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::size_t jl_good = 0;
  std::size_t jl_good_successes = 0;
  double success_rate = 0.0;
  double jl_good_success_rate = 0.0;  // 1.0 when no trial had the JL event
  double min_margin = 0.0;            // min |coordinate - threshold| over trials
  SpikeBounds textbook_bounds;
  SpikeBounds exact_bounds;
  std::vector<WitnessReport> reports;
};

/// Resolves the defaults (d, C) of a trial configuration.
TrialConfig resolve(TrialConfig config);

/// Independent trials: uniform bits, uniform target, fresh JL seed each, all
/// derived from (seed, trial index). Each runs through the real cache path.
TrialSummary run_trials(const TrialConfig& config);

}  // namespace tkv
