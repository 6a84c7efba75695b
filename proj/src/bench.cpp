#include "tkv/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <tuple>

#include "tkv/jl_projection.hpp"

namespace tkv {

namespace {

using Clock = std::chrono::steady_clock;

struct TokenStream {
  RowMatrixXd q, k1, k2, v1, v2;
};

TokenStream make_tokens(std::uint64_t seed, Eigen::Index n, Eigen::Index d) {
  // One stream per (seed, n, d), shared by both layouts.
  GaussianSource gauss(seed * 0x100000001B3ULL ^ (static_cast<std::uint64_t>(n) << 20) ^
                       static_cast<std::uint64_t>(d));
  TokenStream t;
  for (RowMatrixXd* m : {&t.q, &t.k1, &t.k2, &t.v1, &t.v2}) {
    m->resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) (*m)(i, j) = gauss() / std::sqrt(static_cast<double>(d));
    }
  }
  return t;
}

std::int64_t elapsed_ns(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

template <typename Cache>
void decode(Layout layout, const TokenStream& tokens, std::size_t repetitions, std::vector<BenchRecord>& out) {
  const Eigen::Index n = tokens.q.rows();
  const Eigen::Index d = tokens.q.cols();
  std::vector<BenchRecord> cell(static_cast<std::size_t>(n));
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    Cache cache(d);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto start = Clock::now();
      const StepCost appended = cache.append(tokens.k1.row(i), tokens.k2.row(i), tokens.v1.row(i), tokens.v2.row(i));
      const std::int64_t append_ns = elapsed_ns(start);
      start = Clock::now();
      const auto attended = cache.attend(tokens.q.row(i).transpose());
      const std::int64_t attend_ns = elapsed_ns(start);

      BenchRecord& r = cell[static_cast<std::size_t>(i)];
      if (rep == 0) {
        r = {layout, n, d, i + 1, append_ns, attend_ns, appended.append_scalar_ops,
             attended.cost.attend_scalar_ops, attended.cost.logical_bytes};
      } else {
        r.append_ns = std::min(r.append_ns, append_ns);
        r.attend_ns = std::min(r.attend_ns, attend_ns);
      }
    }
  }
  out.insert(out.end(), cell.begin(), cell.end());
}

template <typename T>
std::vector<T> sorted_unique(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

std::vector<Layout> layouts_of(LayoutChoice choice) {
  switch (choice) {
    case LayoutChoice::kFour:
      return {Layout::kFour};
    case LayoutChoice::kTwo:
      return {Layout::kTwo};
    case LayoutChoice::kBoth:
      break;
  }
  return {Layout::kFour, Layout::kTwo};
}

void validate(const BenchConfig& config) {
  if (config.n_values.empty() || config.d_values.empty()) throw DomainError("bench needs n and d values");
  const auto positive = [](Eigen::Index v) { return v >= 1; };
  if (!std::all_of(config.n_values.begin(), config.n_values.end(), positive) ||
      !std::all_of(config.d_values.begin(), config.d_values.end(), positive)) {
    throw DomainError("bench n and d values must be >= 1");
  }
  if (config.repetitions < 1) throw DomainError("bench repetitions must be >= 1");
}

double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd design(static_cast<Eigen::Index>(xs.size()), 2);
  Eigen::VectorXd target(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t k = 0; k < xs.size(); ++k) {
    design(static_cast<Eigen::Index>(k), 0) = std::log(xs[k]);
    design(static_cast<Eigen::Index>(k), 1) = 1.0;
    target(static_cast<Eigen::Index>(k)) = std::log(ys[k]);
  }
  const Eigen::Vector2d fit = design.colPivHouseholderQr().solve(target);
  return fit(0);
}

BenchResult run_bench(const BenchConfig& config) {
  validate(config);
  const auto ns = sorted_unique(config.n_values);
  const auto ds = sorted_unique(config.d_values);
  const auto layouts = layouts_of(config.layout);

  BenchResult result;
  for (const Layout layout : layouts) {
    for (const Eigen::Index n : ns) {
      for (const Eigen::Index d : ds) {
        const TokenStream tokens = make_tokens(config.seed, n, d);
        if (layout == Layout::kFour) {
          decode<FourCache<double>>(layout, tokens, config.repetitions, result.records);
        } else {
          decode<TwoCache<double>>(layout, tokens, config.repetitions, result.records);
        }
      }
    }
  }

  // (layout, n, d) -> records of that cell.
  std::map<std::tuple<Layout, Eigen::Index, Eigen::Index>, std::vector<const BenchRecord*>> cells;
  for (const auto& r : result.records) cells[{r.layout, r.n, r.d}].push_back(&r);

  for (const Layout layout : layouts) {
    for (const Eigen::Index d : ds) {
      std::vector<double> xs, bytes, time;
      for (const Eigen::Index n : ns) {
        const auto& cell = cells.at({layout, n, d});
        double total_ns = 0.0;
        for (const auto* r : cell) total_ns += static_cast<double>(r->attend_ns);
        xs.push_back(static_cast<double>(n));
        bytes.push_back(static_cast<double>(cell.back()->logical_bytes));
        time.push_back(std::max(total_ns, 1.0));
      }
      result.memory_slopes.push_back({layout, d, loglog_slope(xs, bytes)});
      result.wall_clock_slopes.push_back({layout, d, loglog_slope(xs, time)});
    }
  }

  if (layouts.size() == 2) {
    for (const Eigen::Index d : ds) {
      KronGap gap{d, 0.0, {}};
      std::vector<double> xs, cumulative;
      for (const Eigen::Index n : ns) {
        const auto& four = cells.at({Layout::kFour, n, d});
        const auto& two = cells.at({Layout::kTwo, n, d});
        double sum = 0.0;
        for (std::size_t s = 0; s < four.size(); ++s) {
          sum += static_cast<double>(four[s]->attend_ops - two[s]->attend_ops);
        }
        const auto nn = static_cast<std::uint64_t>(n);
        gap.final_gaps.push_back({n, four.back()->attend_ops - two.back()->attend_ops,
                                  2 * nn * nn * static_cast<std::uint64_t>(d)});
        xs.push_back(static_cast<double>(n));
        cumulative.push_back(sum);
      }
      gap.cumulative_slope = loglog_slope(xs, cumulative);
      result.kron_gaps.push_back(std::move(gap));
    }
  }
  return result;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << kBenchCsvHeader << '\n';
  for (const auto& r : records) {
    out << to_string(r.layout) << ',' << r.n << ',' << r.d << ',' << r.step << ',' << r.append_ns << ','
        << r.attend_ns << ',' << r.append_ops << ',' << r.attend_ops << ',' << r.logical_bytes << '\n';
  }
}

std::vector<JlSweepRow> jl_sweep(Eigen::Index n, double epsilon, const std::vector<double>& multipliers,
                                 std::size_t seeds, std::uint64_t base_seed) {
  if (seeds == 0) throw DomainError("jl sweep needs at least one seed");
  std::vector<JlSweepRow> rows;
  for (const double m : multipliers) {
    JlSweepRow row;
    row.multiplier = m;
    row.d = jl_dimension(n, epsilon, m);
    row.seeds = seeds;
    for (std::size_t s = 0; s < seeds; ++s) {
      const RowMatrixXd vectors = project_basis({n, row.d, base_seed + s, false});
      const DeviationReport report = check_deviation(vectors, epsilon);
      row.violations += report.violated ? 1 : 0;
      row.mean_max_cross += report.max_cross;
      row.mean_max_norm_dev += report.max_norm_dev;
    }
    const auto count = static_cast<double>(seeds);
    row.violation_rate = static_cast<double>(row.violations) / count;
    row.mean_max_cross /= count;
    row.mean_max_norm_dev /= count;
    rows.push_back(row);
  }
  return rows;
}

std::vector<SubgenEvalRow> subgen_eval(const SubgenEvalConfig& config) {
  if (config.n_values.empty()) throw DomainError("subgen-eval needs n values");
  if (config.seeds == 0) throw DomainError("subgen-eval needs at least one seed");
  std::vector<SubgenEvalRow> rows;
  for (const Layout layout : layouts_of(config.layout)) {
    for (const Eigen::Index n : config.n_values) {
      ClusterableConfig cc{layout, n, config.d, config.m_true, config.delta, config.query_norm, config.spread};
      const auto nn = static_cast<std::uint64_t>(n);
      const std::uint64_t expanded = layout == Layout::kFour ? nn * nn : nn;
      for (std::size_t s = 0; s < config.seeds; ++s) {
        const std::uint64_t seed = config.base_seed + s;
        const SubgenResult r = run_clusterable(cc, seed, {config.epsilon, expanded <= config.exact_limit});
        SubgenEvalRow row;
        row.layout = layout;
        row.n = n;
        row.seed = seed;
        row.clusters = r.clusters;
        row.logical_bytes = r.logical_bytes;
        row.exact_computed = expanded <= config.exact_limit;
        row.abs_error = r.error.abs_error;
        row.error_scale = r.error_scale;
        row.bound = r.error.bound;
        row.within_bound = r.error.within_bound;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace tkv
