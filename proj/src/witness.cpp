#include "tkv/witness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace tkv {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void require_bound_args(Eigen::Index n, double spike, double epsilon) {
  if (n < 2) throw DomainError("spike bounds need n >= 2");
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw DomainError("spike bounds need epsilon in (0, 0.5)");
  if (!(spike > 0.0) || !std::isfinite(spike)) throw DomainError("spike bounds need C > 0");
}

void require_separation(Eigen::Index rows, double spike, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  const double needed = std::log(static_cast<double>(rows)) / (1.0 - 2.0 * epsilon);
  if (epsilon >= 0.5 || !(spike > needed)) {
    throw SeparationError("C = " + std::to_string(spike) + " must exceed ln(" + std::to_string(rows) +
                          ") / (1 - 2 * " + std::to_string(epsilon) + ")" +
                          (epsilon < 0.5 ? " = " + std::to_string(needed) : std::string()));
  }
}

std::vector<Quintuple> four_stream(const IndexInstance& instance, const RowMatrixXd& keys) {
  const Eigen::Index n = instance.n;
  const Eigen::Index d = instance.d;
  const VectorXd ones = VectorXd::Ones(d);
  const VectorXd zeros = VectorXd::Zero(d);
  std::vector<Quintuple> stream;
  stream.reserve(static_cast<std::size_t>(n + 1));
  for (Eigen::Index t = 0; t < n; ++t) {
    stream.push_back({zeros, keys.row(t).transpose(), ones,
                      instance.bits.row(t).cast<double>().transpose(), ones});
  }
  stream.push_back({instance.spike * keys.row(instance.target_row).transpose(), zeros, zeros, zeros, zeros});
  return stream;
}

std::vector<Triple> two_stream(const IndexInstance& instance, const RowMatrixXd& keys) {
  const Eigen::Index rows = keys.rows();
  const VectorXd zeros = VectorXd::Zero(instance.d);
  std::vector<Triple> stream;
  stream.reserve(static_cast<std::size_t>(rows + 1));
  for (Eigen::Index t = 0; t < rows; ++t) {
    stream.push_back({zeros, keys.row(t).transpose(), instance.bits.row(t).cast<double>().transpose()});
  }
  stream.push_back({instance.spike * keys.row(instance.target_row).transpose(), zeros, zeros});
  return stream;
}

VectorXd decode_with(const IndexInstance& instance, const RowMatrixXd& keys) {
  if (instance.protocol == Protocol::kFour) {
    const auto stream = four_stream(instance, keys);
    FourCache<double> cache(instance.d);
    for (const auto& step : stream) cache.append(step.k1, step.k2, step.v1, step.v2);
    return cache.attend(stream.back().q).output;
  }
  const auto stream = two_stream(instance, keys);
  PrecombinedCache<double> cache(instance.d);
  for (const auto& step : stream) cache.append(step.key, step.value);
  return cache.attend(stream.back().q).output;
}

SpikeBounds exact_bounds(Protocol protocol, Eigen::Index n, double spike, double epsilon) {
  return protocol == Protocol::kFour ? exact_spike_bounds_four(n, spike, epsilon)
                                     : exact_spike_bounds_two(n, spike, epsilon);
}

}  // namespace

Eigen::Index instance_rows(Protocol protocol, Eigen::Index n) {
  return protocol == Protocol::kFour ? n : n * n;
}

double default_spike(Protocol protocol, Eigen::Index n) {
  const double ln_n = std::log(static_cast<double>(n));
  return protocol == Protocol::kFour ? 2.0 * ln_n : 4.0 * ln_n;
}

void validate(const IndexInstance& instance) {
  if (instance.n < 2) throw DomainError("witness instance needs n >= 2");
  if (instance.d < 1) throw DomainError("witness instance needs d >= 1");
  const Eigen::Index rows = instance_rows(instance.protocol, instance.n);
  if (instance.bits.rows() != rows || instance.bits.cols() != instance.d) {
    throw DimensionError("bit matrix must be " + std::to_string(rows) + "x" + std::to_string(instance.d));
  }
  if ((instance.bits.array() > 1).any()) throw DomainError("bit matrix entries must be 0 or 1");
  if (instance.target_row < 0 || instance.target_row >= rows || instance.target_col < 0 ||
      instance.target_col >= instance.d) {
    throw DomainError("target index outside the bit matrix");
  }
  require_separation(rows, instance.spike, instance.epsilon);
}

SpikeBounds spike_bounds_four(Eigen::Index n, double spike, double epsilon) {
  require_bound_args(n, spike, epsilon);
  const double nn = static_cast<double>(n);
  const double hi = std::exp(spike * (1.0 - epsilon));
  const double lo = std::exp(spike * epsilon);
  const double denom = nn * hi + nn * (nn - 1.0) * lo;
  return {nn * nn * lo / denom, nn * hi / denom};
}

SpikeBounds spike_bounds_two(Eigen::Index n, double spike, double epsilon) {
  require_bound_args(n, spike, epsilon);
  const double nn = static_cast<double>(n);
  const double hi = std::exp(spike * (1.0 - epsilon));
  const double lo = std::exp(spike * epsilon);
  const double denom = hi + nn * nn * lo;
  return {nn * nn * lo / denom, hi / denom};
}

SpikeBounds exact_spike_bounds_four(Eigen::Index n, double spike, double epsilon) {
  require_bound_args(n, spike, epsilon);
  const double nn = static_cast<double>(n);
  const double target = nn * std::exp(spike * (1.0 - epsilon));
  const double others = (nn - 1.0) * nn * std::exp(spike * epsilon);
  const double zero_cells = 2.0 * nn + 1.0;
  const double denom = target + others + zero_cells;
  return {others / denom, target / denom};
}

SpikeBounds exact_spike_bounds_two(Eigen::Index n, double spike, double epsilon) {
  require_bound_args(n, spike, epsilon);
  const double rows = static_cast<double>(n) * static_cast<double>(n);
  const double target = std::exp(spike * (1.0 - epsilon));
  const double others = (rows - 1.0) * std::exp(spike * epsilon);
  const double denom = target + others + 1.0;
  return {others / denom, target / denom};
}

RowMatrixXd witness_keys(const IndexInstance& instance) {
  return project_basis({instance_rows(instance.protocol, instance.n), instance.d, instance.seed, false});
}

std::vector<Quintuple> build_four(const IndexInstance& instance) {
  if (instance.protocol != Protocol::kFour) throw DomainError("build_four needs a four-cache instance");
  validate(instance);
  return four_stream(instance, witness_keys(instance));
}

std::vector<Triple> build_two(const IndexInstance& instance) {
  if (instance.protocol != Protocol::kTwo) throw DomainError("build_two needs a two-cache instance");
  validate(instance);
  return two_stream(instance, witness_keys(instance));
}

VectorXd decode_output(const IndexInstance& instance) {
  validate(instance);
  return decode_with(instance, witness_keys(instance));
}

WitnessReport make_report(const IndexInstance& instance, const VectorXd& output, bool jl_good) {
  const SpikeBounds bounds = exact_bounds(instance.protocol, instance.n, instance.spike, instance.epsilon);
  WitnessReport r;
  r.target_row = instance.target_row;
  r.target_col = instance.target_col;
  r.output_coordinate = output(instance.target_col);
  r.delta_bound = bounds.delta;
  r.Delta_bound = bounds.Delta;
  r.threshold = 0.5 * (bounds.delta + bounds.Delta);
  r.recovered_bit = r.output_coordinate > r.threshold ? 1 : 0;
  r.true_bit = instance.bits(instance.target_row, instance.target_col);
  r.success = r.recovered_bit == r.true_bit;
  r.jl_good = jl_good;
  return r;
}

WitnessReport recover_bit(const IndexInstance& instance) {
  validate(instance);
  const RowMatrixXd keys = witness_keys(instance);
  const bool jl_good = !check_deviation(keys, instance.epsilon).violated;
  return make_report(instance, decode_with(instance, keys), jl_good);
}

TrialConfig resolve(TrialConfig config) {
  if (config.n < 2) throw DomainError("witness trials need n >= 2");
  const Eigen::Index rows = instance_rows(config.protocol, config.n);
  if (config.spike == 0.0) config.spike = default_spike(config.protocol, config.n);
  require_separation(rows, config.spike, config.epsilon);
  const Eigen::Index needed = jl_dimension(rows, config.epsilon, config.jl_constant);
  if (config.d == 0) config.d = needed;
  if (config.d < needed) {
    throw DomainError("d = " + std::to_string(config.d) + " is below the JL dimension " +
                      std::to_string(needed) + " for " + std::to_string(rows) + " rows");
  }
  return config;
}

TrialSummary run_trials(const TrialConfig& requested) {
  const TrialConfig config = resolve(requested);
  if (config.trials == 0) throw DomainError("run_trials needs at least one trial");
  const Eigen::Index rows = instance_rows(config.protocol, config.n);

  TrialSummary summary;
  summary.protocol = config.protocol;
  summary.n = config.n;
  summary.d = config.d;
  summary.epsilon = config.epsilon;
  summary.spike = config.spike;
  summary.trials = config.trials;
  summary.textbook_bounds = config.protocol == Protocol::kFour
                             ? spike_bounds_four(config.n, config.spike, config.epsilon)
                             : spike_bounds_two(config.n, config.spike, config.epsilon);
  summary.exact_bounds = exact_bounds(config.protocol, config.n, config.spike, config.epsilon);
  summary.min_margin = std::numeric_limits<double>::infinity();
  summary.reports.reserve(config.trials);

  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(trial)));
    IndexInstance instance;
    instance.protocol = config.protocol;
    instance.n = config.n;
    instance.d = config.d;
    instance.epsilon = config.epsilon;
    instance.spike = config.spike;
    instance.bits.resize(rows, config.d);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < config.d; ++c) instance.bits(r, c) = static_cast<std::uint8_t>(rng() >> 63);
    }
    instance.target_row = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(rows));
    instance.target_col = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(config.d));
    instance.seed = rng();

    const WitnessReport report = recover_bit(instance);
    summary.successes += report.success ? 1 : 0;
    summary.jl_good += report.jl_good ? 1 : 0;
    summary.jl_good_successes += (report.jl_good && report.success) ? 1 : 0;
    summary.min_margin = std::min(summary.min_margin, std::abs(report.output_coordinate - report.threshold));
    summary.reports.push_back(report);
  }
  summary.success_rate = static_cast<double>(summary.successes) / static_cast<double>(summary.trials);
  summary.jl_good_success_rate =
      summary.jl_good == 0 ? 1.0
                           : static_cast<double>(summary.jl_good_successes) / static_cast<double>(summary.jl_good);
  return summary;
}

}  // namespace tkv
