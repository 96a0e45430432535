#pragma once

// Episode execution under full-information and bandit feedback, regret
// against the stochastic and hindsight benchmarks, seed sweeps and rate fits.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "nswlab/core.hpp"
#include "nswlab/environments.hpp"
#include "nswlab/learners.hpp"
#include "nswlab/simplex_opt.hpp"
#include "nswlab/welfare.hpp"

namespace nswlab {

enum class LearnerKind { kUcb, kFtrlLogBarrier, kFtrlTsallis, kEwoo, kUniform, kFixed };

inline const char* to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kUcb: return "ucb";
    case LearnerKind::kFtrlLogBarrier: return "ftrl_log_barrier";
    case LearnerKind::kFtrlTsallis: return "ftrl_tsallis";
    case LearnerKind::kEwoo: return "ewoo";
    case LearnerKind::kUniform: return "uniform";
    case LearnerKind::kFixed: return "fixed";
  }
  return "unknown";
}

/// Learner description; unset tuning parameters take the horizon-dependent defaults.
struct LearnerSpec {
  LearnerKind kind = LearnerKind::kUniform;
  std::optional<std::size_t> arms;  // checked against the environment when given
  std::optional<double> eta;
  std::optional<double> beta;
  std::optional<double> alpha;
  std::size_t mc_samples = 20'000;
  std::optional<double> grid_resolution;
  std::vector<double> fixed;  // strategy for kFixed
  double gradient_floor = kDefaultGradientFloor;
};

/// Builds a learner for a K-arm, N-agent problem with horizon T. `env` is
/// consulted only for defaults (the EWOO constant of an indifferent-agent env).
inline std::unique_ptr<Learner> make_learner(const LearnerSpec& spec, std::size_t arms, std::size_t agents,
                                             std::size_t horizon, const SwfSpec& swf,
                                             std::uint64_t seed, const EnvironmentSpec* env = nullptr) {
  if (spec.arms && *spec.arms != arms) {
    throw dimension_error("learner expects K=" + std::to_string(*spec.arms) + " arms but the environment has K=" +
                          std::to_string(arms));
  }
  switch (spec.kind) {
    case LearnerKind::kUcb:
      return std::make_unique<UcbLearner>(arms, agents, horizon);
    case LearnerKind::kFtrlLogBarrier: {
      RegularizerSpec reg{RegularizerKind::kLogBarrier, 0.5, spec.eta.value_or(log_barrier_eta(arms, horizon))};
      return std::make_unique<FtrlLearner>(arms, reg, swf, spec.gradient_floor);
    }
    case LearnerKind::kFtrlTsallis: {
      RegularizerSpec reg = tsallis_for_agents(arms, agents, horizon);
      if (spec.beta) {
        if (*spec.beta >= 1.0) {
          reg = {RegularizerKind::kShannon, 1.0, shannon_eta(arms, horizon)};
        } else {
          reg = {RegularizerKind::kTsallis, *spec.beta, tsallis_eta(arms, agents, horizon, *spec.beta)};
        }
      }
      if (spec.eta) reg.eta = *spec.eta;
      return std::make_unique<FtrlLearner>(arms, reg, swf, spec.gradient_floor);
    }
    case LearnerKind::kEwoo: {
      double alpha = 0.0;
      if (spec.alpha) {
        alpha = *spec.alpha;
      } else if (const auto* ind = env ? std::get_if<IndifferentAgentEnv>(env) : nullptr) {
        alpha = ewoo_alpha(ind->agents, ind->indifferent);
      } else {
        throw domain_error("EWOO needs alpha unless the environment is indifferent-agent");
      }
      return std::make_unique<EwooLearner>(arms, alpha, spec.mc_samples, seed, spec.grid_resolution);
    }
    case LearnerKind::kUniform:
      return std::make_unique<UniformLearner>(arms);
    case LearnerKind::kFixed: {
      if (spec.fixed.size() != arms) {
        throw dimension_error("fixed strategy has " + std::to_string(spec.fixed.size()) +
                              " entries but the environment has K=" + std::to_string(arms));
      }
      return std::make_unique<FixedLearner>(Strategy(spec.fixed));
    }
  }
  throw domain_error("unsupported learner kind");
}

struct EpisodeConfig {
  LearnerSpec learner;
  EnvironmentSpec environment;
  SwfSpec swf = SwfSpec::nsw();
  std::size_t horizon = 1000;
  Feedback feedback = Feedback::kBandit;
  std::uint64_t seed = 0;
};

struct Trajectory {
  std::vector<Strategy> strategies;
  std::vector<std::size_t> actions;
  std::vector<UtilityMatrix> realized_matrices;  // empty for stochastic envs (the mean is used)
  std::vector<double> per_round_welfare;          // f(u_t^T p_t) on the realized matrix
};

struct RegretReport {
  double total_regret = 0.0;
  double benchmark_value = 0.0;
  Strategy benchmark_strategy;
  std::vector<double> per_round;
};

/// Runs T rounds with independent streams for the environment, the action
/// draws and the learner's internal randomness.
inline Trajectory run_episode(const EpisodeConfig& cfg, Learner& learner, const Environment& env) {
  if (cfg.horizon == 0) throw domain_error("horizon must be at least 1");
  if (learner.arms() != env.arms()) {
    throw dimension_error("learner has K=" + std::to_string(learner.arms()) + " arms but the environment has K=" +
                          std::to_string(env.arms()));
  }
  if (!learner.supports(cfg.feedback)) {
    throw feedback_error("learner '" + learner.name() + "' does not support " + to_string(cfg.feedback) +
                         " feedback");
  }
  if (cfg.horizon > env.max_horizon()) throw domain_error("horizon exceeds the environment schedule");

  Rng root(cfg.seed);
  Rng env_rng = root.fork(1);
  Rng action_rng = root.fork(2);
  const bool keep_matrices = env.mean() == nullptr;

  Trajectory traj;
  traj.strategies.reserve(cfg.horizon);
  traj.actions.reserve(cfg.horizon);
  traj.per_round_welfare.reserve(cfg.horizon);
  if (keep_matrices) traj.realized_matrices.reserve(cfg.horizon);

  for (std::size_t t = 1; t <= cfg.horizon; ++t) {
    Strategy p = learner.act();
    const std::size_t arm = sample_arm(p, action_rng);
    UtilityMatrix u = env.draw(t, env_rng);
    if (u.arms() != learner.arms()) throw dimension_error("environment produced a matrix of the wrong shape");
    traj.per_round_welfare.push_back(welfare_of_strategy(cfg.swf, u, p));
    if (cfg.feedback == Feedback::kBandit) {
      learner.observe_bandit(arm, u.row(arm));
    } else {
      learner.observe_full(u);
    }
    traj.strategies.push_back(std::move(p));
    traj.actions.push_back(arm);
    if (keep_matrices) traj.realized_matrices.push_back(std::move(u));
  }
  return traj;
}

inline Trajectory run_episode(const EpisodeConfig& cfg) {
  Environment env(cfg.environment);
  Rng root(cfg.seed);
  auto learner = make_learner(cfg.learner, env.arms(), env.agents(), cfg.horizon, cfg.swf, root.fork(3)(),
                              &cfg.environment);
  return run_episode(cfg, *learner, env);
}

namespace detail {

inline void require_concave(const SwfSpec& f) {
  if (!f.is_concave()) throw domain_error(std::string("regret benchmark needs a concave welfare function, got ") +
                                          to_string(f.kind));
}

template <class Objective>
SolveReport solve_benchmark(const Objective& objective, std::size_t arms) {
  FrankWolfeOptions opts;
  opts.max_iters = 100'000;
  auto report = maximize_concave_simplex(objective, arms, opts);
  if (!std::isfinite(report.kkt_residual)) throw solver_error("benchmark solver diverged");
  return report;
}

/// Expected welfare of each played strategy under a value oracle p -> value.
template <class Value>
RegretReport regret_against(const Trajectory& traj, const Strategy& best, double best_value, Value&& value) {
  RegretReport r;
  const double t = static_cast<double>(traj.strategies.size());
  r.benchmark_value = t * best_value;
  r.benchmark_strategy = best;
  r.per_round.reserve(traj.strategies.size());
  double earned = 0.0;
  // Learners often repeat a strategy; reuse the last evaluation.
  const Strategy* last = nullptr;
  double last_value = 0.0;
  for (const auto& p : traj.strategies) {
    if (last == nullptr || !(p == *last)) {
      last_value = value(p.probs());
      last = &p;
    }
    earned += last_value;
    r.per_round.push_back(best_value - last_value);
  }
  r.total_regret = r.benchmark_value - earned;
  return r;
}

}  // namespace detail

/// Pseudo-regret on the mean matrix: T max_p f(mean^T p) - sum_t f(mean^T p_t).
inline RegretReport stochastic_regret(const Trajectory& traj, const UtilityMatrix& mean, const SwfSpec& f) {
  detail::require_concave(f);
  WelfareObjective objective(f, mean);
  const auto sol = detail::solve_benchmark(objective, mean.arms());
  const double best = welfare_of_strategy(f, mean, sol.solution);
  return detail::regret_against(traj, sol.solution, best,
                                [&](std::span<const double> p) { return welfare_of_strategy(f, mean, p); });
}

/// Pseudo-regret against a finite outcome distribution.
inline RegretReport distribution_regret(const Trajectory& traj, const std::vector<Outcome>& dist, const SwfSpec& f) {
  detail::require_concave(f);
  auto objective = expected_welfare_objective(dist, f);
  const auto sol = detail::solve_benchmark(objective, objective.arms());
  const double best = objective.value(sol.solution.probs());
  return detail::regret_against(traj, sol.solution, best,
                                [&](std::span<const double> p) { return objective.value(p); });
}

/// Regret against the best fixed strategy in hindsight on the realized schedule.
inline RegretReport adversarial_regret(const Trajectory& traj, const std::vector<UtilityMatrix>& schedule,
                                       const SwfSpec& f) {
  detail::require_concave(f);
  if (schedule.size() < traj.strategies.size()) throw dimension_error("schedule shorter than the trajectory");
  const std::size_t horizon = traj.strategies.size();
  if (horizon == 0) throw domain_error("empty trajectory");

  // Identical matrices are merged so repeated outcomes cost one term each.
  std::map<std::vector<double>, std::size_t> index;
  std::vector<const UtilityMatrix*> unique;
  std::vector<double> counts;
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto data = schedule[t].data();
    auto [it, inserted] = index.try_emplace(std::vector<double>(data.begin(), data.end()), unique.size());
    if (inserted) {
      unique.push_back(&schedule[t]);
      counts.push_back(0.0);
    }
    counts[it->second] += 1.0;
  }
  AverageWelfareObjective objective(f, unique, counts);
  const auto sol = detail::solve_benchmark(objective, objective.arms());

  RegretReport r;
  r.benchmark_strategy = sol.solution;
  double benchmark = 0.0;
  double earned = 0.0;
  r.per_round.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const double best_t = welfare_of_strategy(f, schedule[t], sol.solution);
    const double got = welfare_of_strategy(f, schedule[t], traj.strategies[t]);
    benchmark += best_t;
    earned += got;
    r.per_round.push_back(best_t - got);
  }
  r.benchmark_value = benchmark;
  r.total_regret = benchmark - earned;
  return r;
}

/// Regret appropriate to the environment: pseudo-regret on the mean for
/// stochastic envs, against the outcome distribution for pair envs, and
/// hindsight regret on the realized matrices otherwise.
inline RegretReport episode_regret(const Environment& env, const Trajectory& traj, const SwfSpec& f) {
  if (const auto* mean = env.mean()) return stochastic_regret(traj, *mean, f);
  if (const auto* pair = env.pair()) {
    return distribution_regret(traj, side_of(*pair, std::get<PairEnv>(env.spec()).side), f);
  }
  return adversarial_regret(traj, traj.realized_matrices, f);
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepRow {
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  double regret = 0.0;
  double benchmark = 0.0;
  double runtime_ms = 0.0;
};

struct SweepCell {
  std::size_t horizon = 0;
  std::size_t seeds = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct RateFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;      // sorted by (T, seed)
  std::vector<SweepCell> summary;  // one entry per T, ascending
  std::optional<RateFit> fit;
};

/// Least-squares line through (ln T, ln regret). Nonpositive regrets are dropped.
inline RateFit fit_rate(const std::vector<double>& t_values, const std::vector<double>& regrets) {
  if (t_values.size() != regrets.size()) throw dimension_error("fit_rate needs paired T and regret values");
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t j = 0; j < t_values.size(); ++j) {
    if (t_values[j] > 0.0 && regrets[j] > 0.0 && std::isfinite(regrets[j])) {
      xs.push_back(std::log(t_values[j]));
      ys.push_back(std::log(regrets[j]));
    }
  }
  if (xs.size() < 3) throw domain_error("fit_rate needs at least three positive points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    mx += xs[j];
    my += ys[j];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    sxx += (xs[j] - mx) * (xs[j] - mx);
    sxy += (xs[j] - mx) * (ys[j] - my);
    syy += (ys[j] - my) * (ys[j] - my);
  }
  if (!(sxx > 0.0)) throw domain_error("fit_rate needs at least two distinct T values");
  RateFit fit;
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

inline std::vector<SweepCell> summarize(const std::vector<SweepRow>& rows) {
  std::map<std::size_t, std::vector<double>> by_t;
  for (const auto& r : rows) by_t[r.horizon].push_back(r.regret);
  std::vector<SweepCell> out;
  for (const auto& [t, values] : by_t) {
    SweepCell c;
    c.horizon = t;
    c.seeds = values.size();
    for (double v : values) c.mean += v;
    c.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - c.mean) * (v - c.mean);
      const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
      c.stderr_ = sd / std::sqrt(static_cast<double>(values.size()));
    }
    out.push_back(c);
  }
  return out;
}

struct SweepOptions {
  std::size_t workers = 1;
  std::uint64_t seed_offset = 0;
};

inline std::size_t default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

/// One episode plus regret.
inline SweepRow run_cell(const EpisodeConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  Environment env(cfg.environment);
  Rng root(cfg.seed);
  auto learner = make_learner(cfg.learner, env.arms(), env.agents(), cfg.horizon, cfg.swf, root.fork(3)(),
                              &cfg.environment);
  const auto traj = run_episode(cfg, *learner, env);
  const auto report = episode_regret(env, traj, cfg.swf);
  const auto stop = std::chrono::steady_clock::now();
  SweepRow row;
  row.horizon = cfg.horizon;
  row.seed = cfg.seed;
  row.regret = report.total_regret;
  row.benchmark = report.benchmark_value;
  row.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  return row;
}

/// Runs every (T, seed) cell. Cells are independent and may run on several
/// threads; results are sorted afterwards so output does not depend on scheduling.
inline SweepResult sweep(const EpisodeConfig& base, const std::vector<std::size_t>& t_grid,
                         const std::vector<std::uint64_t>& seeds, const SweepOptions& options = {}) {
  if (t_grid.empty()) throw domain_error("sweep needs a non-empty T grid");
  if (seeds.empty()) throw domain_error("sweep needs at least one seed");
  for (std::size_t t : t_grid) {
    if (t == 0) throw domain_error("horizon must be at least 1");
  }

  std::vector<EpisodeConfig> cells;
  for (std::size_t t : t_grid) {
    for (std::uint64_t s : seeds) {
      EpisodeConfig c = base;
      c.horizon = t;
      c.seed = s + options.seed_offset;
      cells.push_back(std::move(c));
    }
  }

  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= cells.size()) return;
      try {
        rows[j] = run_cell(cells[j]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cells.size();
        return;
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, cells.size());
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.horizon != b.horizon ? a.horizon < b.horizon : a.seed < b.seed;
  });
  SweepResult result;
  result.rows = std::move(rows);
  result.summary = summarize(result.rows);
  std::vector<double> ts;
  std::vector<double> means;
  for (const auto& c : result.summary) {
    ts.push_back(static_cast<double>(c.horizon));
    means.push_back(c.mean);
  }
  try {
    result.fit = fit_rate(ts, means);
  } catch (const domain_error&) {
    result.fit.reset();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Output.

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline void write_csv(std::ostream& out, const std::vector<SweepRow>& rows, bool with_runtime = true) {
  out << "T,seed,regret,benchmark";
  if (with_runtime) out << ",runtime_ms";
  out << '\n';
  for (const auto& r : rows) {
    out << r.horizon << ',' << r.seed << ',' << format_double(r.regret) << ',' << format_double(r.benchmark);
    if (with_runtime) out << ',' << format_double(std::round(r.runtime_ms * 1000.0) / 1000.0);
    out << '\n';
  }
}

}  // namespace nswlab
