#include "tkv/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tkv/bench.hpp"
#include "tkv/errors.hpp"
#include "tkv/jl_projection.hpp"
#include "tkv/witness.hpp"

namespace tkv::cli {

namespace {

using json = nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
  std::string summary_path;
};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

// Config values fill in every option the command line did not set.
void apply_config(CLI::App& app, std::vector<std::string>& args) {
  std::string path;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
    if (starts_with(args[k], "--config=")) path = args[k].substr(9);
  }
  if (path.empty()) return;

  CLI::App* active = nullptr;
  for (const auto& a : args) {
    if (auto* sub = app.get_subcommand_no_throw(a)) {
      active = sub;
      break;
    }
  }
  for (const auto& [key, value] : read_flat_config(path)) {
    const std::string flag = "--" + key;
    if (key == "config") throw std::runtime_error("config file cannot set 'config'");
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || starts_with(a, flag + "=");
    });
    if (given) continue;
    const CLI::Option* opt = active != nullptr ? active->get_option_no_throw(flag) : nullptr;
    if (opt == nullptr) opt = app.get_option_no_throw(flag);
    if (opt != nullptr) {
      args.push_back(flag);
      args.push_back(value);
      continue;
    }
    const auto subs = app.get_subcommands([](CLI::App*) { return true; });
    const bool elsewhere = std::any_of(subs.begin(), subs.end(), [&](CLI::App* s) {
      return s->get_option_no_throw(flag) != nullptr;
    });
    if (!elsewhere) throw std::runtime_error("unknown config key '" + key + "' in " + path);
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream file(path);
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  return file;
}

void write_summary(const std::string& path, const json& summary) {
  if (path.empty()) return;
  auto file = open_output(path);
  file << summary.dump(2) << '\n';
  if (!file) throw IoError("failed writing '" + path + "'");
}

// Writes to --out when given, otherwise to stdout.
template <typename Writer>
void emit_table(const std::string& path, std::ostream& out, Writer&& writer) {
  if (path.empty()) {
    writer(out);
    return;
  }
  auto file = open_output(path);
  writer(file);
  if (!file) throw IoError("failed writing '" + path + "'");
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

LayoutChoice parse_layout(const std::string& s) {
  if (s == "four") return LayoutChoice::kFour;
  if (s == "two") return LayoutChoice::kTwo;
  return LayoutChoice::kBoth;
}

int cmd_bench(BenchConfig config, const std::string& layout, const GlobalOptions& g, std::ostream& out) {
  config.layout = parse_layout(layout);
  config.seed = g.seed;
  config.output_path = g.out;
  const BenchResult result = run_bench(config);
  emit_table(g.out, out, [&](std::ostream& o) { write_bench_csv(o, result.records); });

  json summary{{"command", "bench"}, {"seed", g.seed}, {"rows", result.records.size()}};
  summary["memory_slopes"] = json::array();
  summary["wall_clock_slopes"] = json::array();
  summary["kron_gap"] = json::array();
  out << "bench: rows=" << result.records.size();
  for (const auto& m : result.memory_slopes) {
    summary["memory_slopes"].push_back({{"layout", to_string(m.layout)}, {"d", m.d}, {"slope", m.slope}});
    out << " memory_slope[" << to_string(m.layout) << ",d=" << m.d << "]=" << fixed(m.slope);
  }
  for (const auto& w : result.wall_clock_slopes) {
    summary["wall_clock_slopes"].push_back({{"layout", to_string(w.layout)}, {"d", w.d}, {"slope", w.slope}});
  }
  for (const auto& k : result.kron_gaps) {
    json gaps = json::array();
    bool exact = true;
    for (const auto& f : k.final_gaps) {
      gaps.push_back({{"n", f.n}, {"gap", f.gap}, {"expected", f.expected}});
      exact = exact && f.gap == f.expected;
    }
    summary["kron_gap"].push_back({{"d", k.d}, {"cumulative_slope", k.cumulative_slope}, {"final_gaps", gaps}});
    out << " kron_gap_slope[d=" << k.d << "]=" << fixed(k.cumulative_slope)
        << " final_gap_exact[d=" << k.d << "]=" << (exact ? "yes" : "no");
  }
  out << '\n';
  write_summary(g.summary_path, summary);
  return kExitOk;
}

int cmd_witness(TrialConfig config, const std::string& protocol, const GlobalOptions& g, std::ostream& out) {
  config.protocol = protocol == "two" ? Protocol::kTwo : Protocol::kFour;
  config.seed = g.seed;
  const TrialSummary s = run_trials(config);
  emit_table(g.out, out, [&](std::ostream& o) {
    o << "trial,target_row,target_col,true_bit,recovered_bit,output_coordinate,delta_bound,Delta_bound,"
         "threshold,jl_good,success\n";
    o << std::setprecision(17);
    for (std::size_t t = 0; t < s.reports.size(); ++t) {
      const auto& r = s.reports[t];
      o << t << ',' << r.target_row << ',' << r.target_col << ',' << r.true_bit << ',' << r.recovered_bit << ','
        << r.output_coordinate << ',' << r.delta_bound << ',' << r.Delta_bound << ',' << r.threshold << ','
        << (r.jl_good ? 1 : 0) << ',' << (r.success ? 1 : 0) << '\n';
    }
  });
  const json summary{{"command", "witness"},
                     {"protocol", to_string(s.protocol)},
                     {"n", s.n},
                     {"d", s.d},
                     {"epsilon", s.epsilon},
                     {"C", s.spike},
                     {"seed", g.seed},
                     {"trials", s.trials},
                     {"successes", s.successes},
                     {"success_rate", s.success_rate},
                     {"jl_good_trials", s.jl_good},
                     {"jl_good_success_rate", s.jl_good_success_rate},
                     {"min_margin", s.min_margin},
                     {"textbook_bounds", {{"delta", s.textbook_bounds.delta}, {"Delta", s.textbook_bounds.Delta}}},
                     {"exact_bounds", {{"delta", s.exact_bounds.delta}, {"Delta", s.exact_bounds.Delta}}}};
  write_summary(g.summary_path, summary);
  out << "witness: protocol=" << to_string(s.protocol) << " n=" << s.n << " d=" << s.d << " C=" << fixed(s.spike)
      << " trials=" << s.trials << " success_rate=" << fixed(s.success_rate) << " jl_good=" << s.jl_good
      << " jl_good_success_rate=" << fixed(s.jl_good_success_rate) << " min_margin=" << fixed(s.min_margin, 6)
      << '\n';
  return s.success_rate >= 0.90 ? kExitOk : kExitGateFailed;
}

int cmd_jl_check(Eigen::Index n, double epsilon, const std::vector<double>& multipliers, std::size_t seeds,
                 const GlobalOptions& g, std::ostream& out) {
  const auto rows = jl_sweep(n, epsilon, multipliers, seeds, g.seed);
  emit_table(g.out, out, [&](std::ostream& o) {
    o << "multiplier,d,seeds,violations,violation_rate,mean_max_cross,mean_max_norm_dev\n";
    for (const auto& r : rows) {
      o << r.multiplier << ',' << r.d << ',' << r.seeds << ',' << r.violations << ',' << r.violation_rate << ','
        << r.mean_max_cross << ',' << r.mean_max_norm_dev << '\n';
    }
  });
  json summary{{"command", "jl-check"}, {"n", n}, {"epsilon", epsilon}, {"seed", g.seed}, {"rates", json::array()}};
  for (const auto& r : rows) {
    summary["rates"].push_back({{"multiplier", r.multiplier}, {"d", r.d}, {"violation_rate", r.violation_rate}});
    out << "jl-check: n=" << n << " epsilon=" << epsilon << " multiplier=" << r.multiplier << " d=" << r.d
        << " violation_rate=" << fixed(r.violation_rate) << '\n';
  }
  write_summary(g.summary_path, summary);
  return kExitOk;
}

int cmd_subgen_eval(SubgenEvalConfig config, const std::string& layout, const GlobalOptions& g, std::ostream& out) {
  config.layout = parse_layout(layout);
  config.base_seed = g.seed;
  const auto rows = subgen_eval(config);
  emit_table(g.out, out, [&](std::ostream& o) {
    o << "layout,n,seed,clusters,logical_bytes,abs_error,error_scale,bound,within_bound\n";
    o << std::setprecision(17);
    for (const auto& r : rows) {
      o << to_string(r.layout) << ',' << r.n << ',' << r.seed << ',' << r.clusters << ',' << r.logical_bytes << ',';
      if (r.exact_computed) {
        o << r.abs_error << ',' << r.error_scale << ',' << r.bound << ',' << (r.within_bound ? 1 : 0) << '\n';
      } else {
        o << ",,,\n";
      }
    }
  });
  json summary{{"command", "subgen-eval"}, {"d", config.d},       {"m_true", config.m_true},
               {"delta", config.delta},    {"seed", g.seed},      {"epsilon", config.epsilon},
               {"rows", json::array()}};
  for (const auto& r : rows) {
    json row{{"layout", to_string(r.layout)}, {"n", r.n}, {"seed", r.seed}, {"clusters", r.clusters},
             {"logical_bytes", r.logical_bytes}};
    if (r.exact_computed) {
      row["abs_error"] = r.abs_error;
      row["bound"] = r.bound;
      row["within_bound"] = r.within_bound;
    }
    summary["rows"].push_back(row);
  }
  write_summary(g.summary_path, summary);
  double max_error = 0.0;
  for (const auto& r : rows) {
    if (r.exact_computed) max_error = std::max(max_error, r.abs_error);
  }
  out << "subgen-eval: rows=" << rows.size() << " max_abs_error=" << std::scientific << std::setprecision(3)
      << max_error << std::defaultfloat;
  for (const Layout l : layouts_of(config.layout)) {
    for (const Eigen::Index n : config.n_values) {
      const auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.layout == l && r.n == n; });
      if (it != rows.end()) out << " logical_bytes[" << to_string(l) << ",n=" << n << "]=" << it->logical_bytes;
    }
  }
  out << '\n';
  return kExitOk;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string key = eq == std::string::npos ? std::string() : trim(line.substr(0, eq));
    if (key.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    entries.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return entries;
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tensor-attention KV-cache benchmarks, lower-bound witnesses and clustered-cache evaluation", "tkv"};
  app.fallthrough();
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Base seed for every random choice")->capture_default_str();
  app.add_option("--out", g.out, "CSV output path (stdout when omitted)");
  app.add_option("--config", g.config, "Flat key=value file; flags override it");
  app.add_option("--summary-path", g.summary_path, "Write a JSON summary here");

  BenchConfig bench;
  std::string bench_layout = "both";
  auto* bench_cmd = app.add_subcommand("bench", "Decode benchmarks for the four- and two-cache layouts");
  bench_cmd->add_option("--n", bench.n_values, "Sequence lengths")->delimiter(',')->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--d", bench.d_values, "Embedding dims")->delimiter(',')->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--layout", bench_layout, "four, two or both")
      ->check(CLI::IsMember({"four", "two", "both"}))->capture_default_str();
  bench_cmd->add_option("--repetitions", bench.repetitions, "Timing repetitions per cell (min is kept)")
      ->check(CLI::PositiveNumber)->capture_default_str();

  TrialConfig witness;
  std::string protocol = "four";
  auto* witness_cmd = app.add_subcommand("witness", "INDEX-reduction bit recovery trials");
  witness_cmd->add_option("--protocol", protocol, "four or two")->check(CLI::IsMember({"four", "two"}))
      ->capture_default_str();
  witness_cmd->add_option("--n", witness.n, "Sequence length n")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  witness_cmd->add_option("--d", witness.d, "Embedding dim (0: smallest JL dimension)")->capture_default_str();
  witness_cmd->add_option("--trials", witness.trials, "Number of trials")->check(CLI::PositiveNumber)
      ->capture_default_str();
  witness_cmd->add_option("--epsilon", witness.epsilon, "JL tolerance")->capture_default_str();
  witness_cmd->add_option("--spike", witness.spike, "Spike constant C (0: 2 ln n / 4 ln n)")->capture_default_str();
  witness_cmd->add_option("--jl-constant", witness.jl_constant, "Constant in d >= c ln(rows) / eps^2")
      ->capture_default_str();

  Eigen::Index jl_n = 256;
  double jl_epsilon = 0.3;
  std::vector<double> multipliers{1, 2, 4, 8, 16};
  std::size_t jl_seeds = 100;
  auto* jl_cmd = app.add_subcommand("jl-check", "JL deviation violation rates over a d sweep");
  jl_cmd->add_option("--n", jl_n, "Number of basis vectors")->check(CLI::PositiveNumber)->capture_default_str();
  jl_cmd->add_option("--epsilon", jl_epsilon, "Deviation tolerance")->check(CLI::PositiveNumber)
      ->capture_default_str();
  jl_cmd->add_option("--multipliers", multipliers, "d = multiplier * ln n / eps^2")->delimiter(',')
      ->check(CLI::PositiveNumber)->capture_default_str();
  jl_cmd->add_option("--seeds", jl_seeds, "Seeds per multiplier")->check(CLI::PositiveNumber)->capture_default_str();

  SubgenEvalConfig subgen;
  std::string subgen_layout = "both";
  auto* subgen_cmd = app.add_subcommand("subgen-eval", "Clustered-cache error and memory on clusterable streams");
  subgen_cmd->add_option("--layout", subgen_layout, "four, two or both")
      ->check(CLI::IsMember({"four", "two", "both"}))->capture_default_str();
  subgen_cmd->add_option("--n", subgen.n_values, "Stream lengths")->delimiter(',')->check(CLI::PositiveNumber)
      ->capture_default_str();
  subgen_cmd->add_option("--d", subgen.d, "Embedding dim")->check(CLI::PositiveNumber)->capture_default_str();
  subgen_cmd->add_option("--m-true", subgen.m_true, "Ground-truth clusters per key stream")
      ->check(CLI::PositiveNumber)->capture_default_str();
  subgen_cmd->add_option("--delta", subgen.delta, "Clustering diameter")->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  subgen_cmd->add_option("--seeds", subgen.seeds, "Seeds per n")->check(CLI::PositiveNumber)->capture_default_str();
  subgen_cmd->add_option("--epsilon", subgen.epsilon, "Error-bound multiplier")->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  subgen_cmd->add_option("--query-norm", subgen.query_norm, "Query norm r")->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  subgen_cmd->add_option("--spread", subgen.spread, "Key radius around its center, as a fraction of delta")
      ->check(CLI::Range(0.0, 0.25))->capture_default_str();
  subgen_cmd->add_option("--exact-limit", subgen.exact_limit, "Largest expanded row count for the exact oracle")
      ->capture_default_str();

  try {
    apply_config(app, args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*bench_cmd) return cmd_bench(bench, bench_layout, g, out);
    if (*witness_cmd) return cmd_witness(witness, protocol, g, out);
    if (*jl_cmd) return cmd_jl_check(jl_n, jl_epsilon, multipliers, jl_seeds, g, out);
    if (*subgen_cmd) return cmd_subgen_eval(subgen, subgen_layout, g, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::logic_error& e) {  // DimensionError, EmptyInputError, DomainError
    err << "error: " << e.what() << '\n';
    return kExitConstraint;
  }
  return kExitUsage;
}

}  // namespace tkv::cli
