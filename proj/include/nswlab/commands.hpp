#pragma once

// Implementations of the nswlab subcommands. Each returns a process exit code
// and writes exactly one `status=...` line to `out`.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nswlab/config.hpp"
#include "nswlab/environments.hpp"
#include "nswlab/harness.hpp"
#include "nswlab/simplex_opt.hpp"

namespace nswlab {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2, kExitCheck = 3 };

inline const char* status_name(int code) {
  switch (code) {
    case kExitOk: return "ok";
    case kExitConfig: return "config_error";
    case kExitRuntime: return "runtime_error";
    default: return "check_failed";
  }
}

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

/// Verbosity from NSWLAB_LOG (error, warn, info, debug); warn when unset or unrecognized.
inline LogLevel log_level_from_env() {
  const char* v = std::getenv("NSWLAB_LOG");
  if (v == nullptr) return LogLevel::kWarn;
  const std::string s(v);
  if (s == "error") return LogLevel::kError;
  if (s == "info") return LogLevel::kInfo;
  if (s == "debug") return LogLevel::kDebug;
  return LogLevel::kWarn;
}

inline void log(LogLevel level, const std::string& message) {
  static const LogLevel threshold = log_level_from_env();
  if (level > threshold) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "[nswlab " << names[static_cast<int>(level)] << "] " << message << '\n';
}

struct CommandOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::size_t workers = default_workers();
  std::uint64_t seed_offset = 0;
  bool corrupt_tables = false;  // test hook for verify-hard
};

inline int finish(std::ostream& out, int code) {
  out << "status=" << status_name(code) << '\n';
  return code;
}

inline int fail(std::ostream& out, int code, const std::string& message) {
  std::cerr << "error: " << message << '\n';
  return finish(out, code);
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("malformed JSON in '") + path + "': " + e.what());
  }
}

inline std::filesystem::path output_dir(const CommandOptions& opts) {
  std::filesystem::path dir(opts.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string format_strategy(std::span<const double> p) {
  std::string s = "(";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ',';
    s += format_double(p[i]);
  }
  return s + ")";
}

inline std::string format_rational(const Rational& r) {
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

/// Loads and validates a config; every problem is a configuration error.
inline RunConfig load_config(const CommandOptions& opts) {
  if (opts.config_path.empty()) throw config_error("--config is required");
  const json j = read_json_file(opts.config_path);
  try {
    return run_config_from_json(j);
  } catch (const config_error&) {
    throw;
  } catch (const std::invalid_argument& e) {
    // dimension, domain and feedback errors raised while building the objects
    throw config_error(e.what());
  }
}

// ---------------------------------------------------------------------------

inline int cmd_run(const CommandOptions& opts, std::ostream& out = std::cout) {
  RunConfig cfg;
  try {
    cfg = load_config(opts);
  } catch (const std::exception& e) {
    return fail(out, kExitConfig, e.what());
  }
  try {
    EpisodeConfig ep = cfg.episode;
    ep.seed += opts.seed_offset;
    Environment env(ep.environment);
    Rng root(ep.seed);
    auto learner =
        make_learner(ep.learner, env.arms(), env.agents(), ep.horizon, ep.swf, root.fork(3)(), &ep.environment);
    log(LogLevel::kInfo, "running " + learner->name() + " for T=" + std::to_string(ep.horizon));
    const auto traj = run_episode(ep, *learner, env);
    const auto report = episode_regret(env, traj, ep.swf);

    std::vector<std::size_t> counts(env.arms(), 0);
    for (auto a : traj.actions) ++counts[a];
    double welfare = 0.0;
    for (double w : traj.per_round_welfare) welfare += w;

    json summary{{"config", run_config_to_json(cfg)},
                 {"learner", learner->name()},
                 {"T", ep.horizon},
                 {"seed", ep.seed},
                 {"regret", report.total_regret},
                 {"benchmark", report.benchmark_value},
                 {"benchmark_strategy", report.benchmark_strategy.vector()},
                 {"final_strategy", traj.strategies.back().vector()},
                 {"mean_realized_welfare", welfare / static_cast<double>(ep.horizon)},
                 {"action_counts", counts}};
    const auto path = cfg.output ? std::filesystem::path(*cfg.output) : output_dir(opts) / "run.json";
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << summary.dump(2) << '\n';
    out << "regret=" << format_double(report.total_regret) << '\n';
    out << "output=" << path.string() << '\n';
    return finish(out, kExitOk);
  } catch (const std::exception& e) {
    return fail(out, kExitRuntime, e.what());
  }
}

inline int cmd_sweep(const CommandOptions& opts, std::ostream& out = std::cout) {
  RunConfig cfg;
  try {
    cfg = load_config(opts);
    if (cfg.t_grid.empty()) throw config_error("sweep needs a non-empty T_grid");
    if (cfg.seeds.empty()) {
      for (std::uint64_t s = 0; s < 20; ++s) cfg.seeds.push_back(s);
    }
    if (opts.workers == 0) throw config_error("--workers must be at least 1");
  } catch (const std::exception& e) {
    return fail(out, kExitConfig, e.what());
  }
  try {
    log(LogLevel::kInfo, "sweeping " + std::to_string(cfg.t_grid.size() * cfg.seeds.size()) + " cells on " +
                             std::to_string(opts.workers) + " workers");
    const auto result = sweep(cfg.episode, cfg.t_grid, cfg.seeds, {opts.workers, opts.seed_offset});
    const auto dir = cfg.output ? std::filesystem::path(*cfg.output) : output_dir(opts);
    std::filesystem::create_directories(dir);
    {
      std::ofstream f(dir / "sweep.csv");
      if (!f) throw std::runtime_error("cannot write sweep.csv");
      write_csv(f, result.rows);
    }
    {
      std::ofstream f(dir / "sweep_summary.json");
      if (!f) throw std::runtime_error("cannot write sweep_summary.json");
      f << sweep_summary_json(result).dump(2) << '\n';
    }
    if (result.fit) out << "exponent=" << format_double(result.fit->exponent) << '\n';
    out << "output=" << (dir / "sweep.csv").string() << '\n';
    return finish(out, kExitOk);
  } catch (const std::exception& e) {
    return fail(out, kExitRuntime, e.what());
  }
}

// ---------------------------------------------------------------------------

inline constexpr double kGapResolution = 1e-4;
inline constexpr double kGapSlack = 1e-4;
inline constexpr double kOptimumTolerance = 1e-4;

/// Moves probability between two outcomes of side B; marginals then differ.
inline void corrupt_pair(OutcomePair& pair) {
  const Rational shift(1, 20);
  pair.dist_b.front().probability += shift;
  pair.dist_b.back().probability -= shift;
}

struct PairVerification {
  bool marginals_equal = false;
  GapReport gap;
  bool gap_ok = false;
  Strategy solved_a;
  Strategy solved_b;
  bool optimum_ok = false;
  bool all_ok() const { return marginals_equal && gap_ok && optimum_ok; }
};

inline PairVerification verify_pair(const OutcomePair& pair) {
  PairVerification v;
  v.marginals_equal = verify_marginal_equivalence(pair);
  v.gap = verify_gap_report(pair, pair.swf, kGapResolution);
  v.gap_ok = v.gap.certified() >= to_double(pair.meta.gap) - kGapSlack;
  FrankWolfeOptions opts;
  opts.tol = 1e-12;
  opts.max_iters = 100'000;
  auto near = [](const Strategy& a, const Strategy& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::abs(a[i] - b[i]) > kOptimumTolerance) return false;
    }
    return true;
  };
  v.solved_a = maximize_concave_simplex(expected_welfare_objective(pair.dist_a, pair.swf), 2, opts).solution;
  v.solved_b = maximize_concave_simplex(expected_welfare_objective(pair.dist_b, pair.swf), 2, opts).solution;
  if (pair.swf.is_concave()) {
    v.optimum_ok = near(v.solved_a, pair.meta.p_star) && near(v.solved_b, pair.meta.p_star_alt);
  } else {
    // Local ascent is not a certificate for a nonconcave objective; compare values on a fine grid instead.
    auto best_on_grid = [&](const std::vector<Outcome>& dist) {
      double best = -1.0;
      for (int j = 0; j <= 10'000; ++j) {
        const double x = j / 10'000.0;
        const double p[2] = {x, 1.0 - x};
        best = std::max(best, expected_welfare(dist, pair.swf, p));
      }
      return best;
    };
    v.optimum_ok =
        std::abs(best_on_grid(pair.dist_a) - expected_welfare(pair.dist_a, pair.swf, pair.meta.p_star.probs())) <
            1e-9 &&
        std::abs(best_on_grid(pair.dist_b) - expected_welfare(pair.dist_b, pair.swf, pair.meta.p_star_alt.probs())) <
            1e-9;
  }
  return v;
}

struct StochasticVerifyParams {
  std::size_t arms = 4;
  std::size_t agents = 2;
  std::size_t horizon = 1'000'000;
};

inline int cmd_verify_hard(const std::string& which, const CommandOptions& opts,
                           const StochasticVerifyParams& params = {}, std::ostream& out = std::cout) {
  try {
    if (which == "stochastic") {
      const auto fam = hard_stochastic_family(params.arms, params.agents, params.horizon);
      out << "family=stochastic K=" << params.arms << " N=" << params.agents << " T=" << params.horizon << '\n';
      out << "epsilon_raw=" << format_double(fam.epsilon_raw) << '\n';
      out << "epsilon=" << format_double(fam.epsilon) << '\n';
      bool ok = fam.envs.size() == params.arms && fam.epsilon <= 1.0 / 9.0 && fam.epsilon > 0.0;
      for (std::size_t i = 0; i < fam.envs.size(); ++i) {
        const auto col = fam.envs[i].mean.column(0);
        out << "env[" << i << "] agent1=" << format_strategy(col) << '\n';
        for (std::size_t j = 0; j < col.size(); ++j) ok = ok && col[j] == (i == j ? fam.epsilon : 0.0);
        for (std::size_t n = 1; n < params.agents; ++n) {
          for (double x : fam.envs[i].mean.column(n)) ok = ok && x == 1.0;
        }
      }
      out << "family_check=" << (ok ? "pass" : "fail") << '\n';
      return finish(out, ok ? kExitOk : kExitCheck);
    }
    if (which != "nsw" && which != "nswprod") {
      return fail(out, kExitConfig, "verify-hard expects nsw, nswprod or stochastic");
    }
    OutcomePair pair = builtin_pair(which);
    if (opts.corrupt_tables) corrupt_pair(pair);
    const auto v = verify_pair(pair);
    out << "pair=" << pair.name << '\n';
    out << "p_star=" << format_strategy(pair.meta.p_star.probs()) << '\n';
    out << "p_star_alt=" << format_strategy(pair.meta.p_star_alt.probs()) << '\n';
    out << "theta=" << format_rational(pair.meta.theta) << '\n';
    out << "delta_claimed=" << format_rational(pair.meta.gap) << '\n';
    out << "marginals-equal=" << (v.marginals_equal ? "true" : "false") << '\n';
    out << "gap_a=" << format_double(v.gap.gap_a) << " at p1=" << format_double(v.gap.worst_p1_a) << '\n';
    out << "gap_b=" << format_double(v.gap.gap_b) << " at p1=" << format_double(v.gap.worst_p1_b) << '\n';
    out << "delta_certified=" << format_double(v.gap.certified()) << '\n';
    out << "gap_check=" << (v.gap_ok ? "pass" : "fail") << '\n';
    out << "solved_a=" << format_strategy(v.solved_a.probs()) << '\n';
    out << "solved_b=" << format_strategy(v.solved_b.probs()) << '\n';
    out << "optimum_check=" << (v.optimum_ok ? "pass" : "fail") << '\n';
    return finish(out, v.all_ok() ? kExitOk : kExitCheck);
  } catch (const std::invalid_argument& e) {
    return fail(out, kExitConfig, e.what());
  } catch (const std::exception& e) {
    return fail(out, kExitRuntime, e.what());
  }
}

// ---------------------------------------------------------------------------

struct DemoRow {
  std::size_t horizon = 0;
  double side_a = 0.0;  // mean per-round regret over seeds
  double side_b = 0.0;
  double worst() const { return std::max(side_a, side_b); }
};

/// Average per-round regret of a bandit learner on both sides of the NSW pair
/// at T/4, T/2 and T.
inline std::vector<DemoRow> linear_regret_demo(LearnerKind kind, std::size_t horizon, std::size_t seeds,
                                               const SweepOptions& sweep_opts) {
  if (horizon < 1000) throw domain_error("demo needs T >= 1000");
  if (seeds == 0) throw domain_error("demo needs at least one seed");
  const std::vector<std::size_t> grid{horizon / 4, horizon / 2, horizon};
  std::vector<std::uint64_t> seed_list;
  for (std::uint64_t s = 0; s < seeds; ++s) seed_list.push_back(s);
  std::vector<DemoRow> rows(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) rows[j].horizon = grid[j];
  for (PairSide side : {PairSide::kA, PairSide::kB}) {
    EpisodeConfig base;
    base.learner.kind = kind;
    base.environment = PairEnv{"nsw", side};
    base.swf = SwfSpec::nsw();
    base.feedback = Feedback::kBandit;
    const auto result = sweep(base, grid, seed_list, sweep_opts);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double per_round = result.summary[j].mean / static_cast<double>(grid[j]);
      (side == PairSide::kA ? rows[j].side_a : rows[j].side_b) = per_round;
    }
  }
  return rows;
}

inline int cmd_demo_linear_regret(const std::string& learner, std::size_t horizon, std::size_t seeds,
                                  const CommandOptions& opts, std::ostream& out = std::cout) {
  LearnerKind kind;
  if (learner == "ucb") {
    kind = LearnerKind::kUcb;
  } else if (learner == "uniform") {
    kind = LearnerKind::kUniform;
  } else {
    return fail(out, kExitConfig, "demo learner must be a bandit learner: ucb or uniform");
  }
  if (horizon < 1000) return fail(out, kExitConfig, "demo needs T >= 1000");
  if (seeds == 0) return fail(out, kExitConfig, "demo needs at least one seed");
  try {
    SweepOptions so{opts.workers, opts.seed_offset};
    const auto rows = linear_regret_demo(kind, horizon, seeds, so);
    const auto dir = output_dir(opts);
    std::ofstream f(dir / "demo_linear_regret.csv");
    if (!f) throw std::runtime_error("cannot write demo_linear_regret.csv");
    f << "T,side_a,side_b,max_per_round_regret\n";
    for (const auto& r : rows) {
      f << r.horizon << ',' << format_double(r.side_a) << ',' << format_double(r.side_b) << ','
        << format_double(r.worst()) << '\n';
    }
    out << "learner=" << learner << '\n';
    out << "max_per_round_regret=" << format_double(rows.back().worst()) << '\n';
    out << "output=" << (dir / "demo_linear_regret.csv").string() << '\n';
    return finish(out, kExitOk);
  } catch (const std::exception& e) {
    return fail(out, kExitRuntime, e.what());
  }
}

}  // namespace nswlab
