#pragma once

// Benchmark drivers behind the `tkv` command line.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tkv/kv_cache.hpp"
#include "tkv/subgen.hpp"

namespace tkv {

enum class LayoutChoice { kFour, kTwo, kBoth };

std::vector<Layout> layouts_of(LayoutChoice choice);

struct BenchConfig {
  std::vector<Eigen::Index> n_values{64, 128, 256, 512};
  std::vector<Eigen::Index> d_values{16};
  LayoutChoice layout = LayoutChoice::kBoth;
  std::uint64_t seed = 0;
  std::size_t repetitions = 1;
  std::string output_path;
};

/// Throws DomainError if a count is zero or a list is empty.
void validate(const BenchConfig& config);

struct BenchRecord {
  Layout layout = Layout::kFour;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  Eigen::Index step = 0;  // 1-based cache length after this step's append
  std::int64_t append_ns = 0;
  std::int64_t attend_ns = 0;
  std::uint64_t append_ops = 0;
  std::uint64_t attend_ops = 0;
  std::uint64_t logical_bytes = 0;
};

inline constexpr std::string_view kBenchCsvHeader =
    "layout,n,d,step,append_ns,attend_ns,append_ops,attend_ops,logical_bytes";

struct MemorySlope {
  Layout layout = Layout::kFour;
  Eigen::Index d = 0;
  double slope = 0.0;  // log-log slope of final logical_bytes against n
};

struct WallClockSlope {
  Layout layout = Layout::kFour;
  Eigen::Index d = 0;
  double slope = 0.0;  // cumulative attend time against n; informational only
};

struct FinalGap {
  Eigen::Index n = 0;
  std::uint64_t gap = 0;       // four attend ops - two attend ops at step n
  std::uint64_t expected = 0;  // 2 n^2 d
};

struct KronGap {
  Eigen::Index d = 0;
  double cumulative_slope = 0.0;  // log-log slope of the summed per-step gap against n
  std::vector<FinalGap> final_gaps;
};

struct BenchResult {
  std::vector<BenchRecord> records;  // sorted by layout (four, two), n, d, step
  std::vector<MemorySlope> memory_slopes;
  std::vector<WallClockSlope> wall_clock_slopes;
  std::vector<KronGap> kron_gaps;  // only when both layouts ran
};

/// Runs an n-token decode (append then attend every step) per (layout, n, d).
/// Both layouts see the same token stream for a given (seed, n, d).
BenchResult run_bench(const BenchConfig& config);

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records);

/// Least-squares slope of log(y) on log(x). NaN with fewer than two points.
double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys);

struct JlSweepRow {
  double multiplier = 0.0;
  Eigen::Index d = 0;
  std::size_t seeds = 0;
  std::size_t violations = 0;
  double violation_rate = 0.0;
  double mean_max_cross = 0.0;
  double mean_max_norm_dev = 0.0;
};

/// For each multiplier m, d = ceil(m * epsilon^-2 * ln n); projects the n basis
/// vectors with seeds base_seed .. base_seed + seeds - 1 and counts violations.
std::vector<JlSweepRow> jl_sweep(Eigen::Index n, double epsilon, const std::vector<double>& multipliers,
                                 std::size_t seeds, std::uint64_t base_seed);

struct SubgenEvalConfig {
  LayoutChoice layout = LayoutChoice::kBoth;
  std::vector<Eigen::Index> n_values{1000, 10000};
  Eigen::Index d = 8;
  std::size_t m_true = 5;
  double delta = 0.1;
  double query_norm = 2.0;
  double spread = 0.25;
  double epsilon = 0.0;  // bound multiplier; 0 reports the bound as 0
  std::size_t seeds = 3;
  std::uint64_t base_seed = 0;
  std::uint64_t exact_limit = 1u << 20;  // skip the exact oracle above this many expanded rows
};

struct SubgenEvalRow {
  Layout layout = Layout::kFour;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  std::size_t clusters = 0;
  std::uint64_t logical_bytes = 0;
  bool exact_computed = false;
  double abs_error = 0.0;
  double error_scale = 0.0;
  double bound = 0.0;
  bool within_bound = false;
};

std::vector<SubgenEvalRow> subgen_eval(const SubgenEvalConfig& config);

}  // namespace tkv
