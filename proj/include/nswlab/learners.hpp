#pragma once

// Online learners over the arm simplex. Every learner is a small state
// machine: act() returns the strategy for the coming round and one of the
// observe_* calls feeds back what the environment revealed.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nswlab/core.hpp"
#include "nswlab/simplex_opt.hpp"
#include "nswlab/welfare.hpp"

namespace nswlab {

enum class Feedback { kFullInfo, kBandit };

inline const char* to_string(Feedback f) { return f == Feedback::kFullInfo ? "full_info" : "bandit"; }

class feedback_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Learner {
 public:
  virtual ~Learner() = default;

  virtual std::string name() const = 0;
  virtual std::size_t arms() const = 0;
  virtual bool supports(Feedback feedback) const = 0;

  virtual Strategy act() = 0;

  virtual void observe_full(const UtilityMatrix& /*u*/) {
    throw feedback_error(name() + " does not accept full-information feedback");
  }
  virtual void observe_bandit(std::size_t /*arm*/, std::span<const double> /*row*/) {
    throw feedback_error(name() + " does not accept bandit feedback");
  }
};

// ---------------------------------------------------------------------------
// UCB with Bernstein-type widths.

struct UcbState {
  std::size_t arms = 0;
  std::size_t agents = 0;
  std::size_t horizon = 0;
  std::size_t warmup_pulls = 0;          // pulls of each arm before optimism kicks in
  std::vector<std::size_t> pull_counts;  // per arm
  std::vector<double> reward_sums;       // arms x agents, row-major
  UtilityMatrix optimistic;              // upper confidence utilities
  std::size_t round = 1;                 // index of the round about to be played
  double confidence_log = 0.0;           // ln(N K T^2)

  double empirical_mean(std::size_t arm, std::size_t agent) const {
    const auto c = pull_counts[arm];
    return c == 0 ? 0.0 : reward_sums[arm * agents + agent] / static_cast<double>(c);
  }
};

/// Warm-up length per arm, ceil(1 + 18 ln(K T)).
inline std::size_t ucb_warmup_pulls(std::size_t arms, std::size_t horizon) {
  return static_cast<std::size_t>(
      std::ceil(1.0 + 18.0 * std::log(static_cast<double>(arms) * static_cast<double>(horizon))));
}

/// Upper confidence value for an arm with empirical mean `mean` after `pulls`
/// pulls: mean + 4 sqrt(mean L / pulls) + 8 L / pulls, capped at 1.
inline double bernstein_upper(double mean, std::size_t pulls, double confidence_log) {
  const double n = static_cast<double>(pulls);
  const double raw = mean + 4.0 * std::sqrt(mean * confidence_log / n) + 8.0 * confidence_log / n;
  return std::min(1.0, raw);
}

inline UcbState ucb_init(std::size_t arms, std::size_t agents, std::size_t horizon) {
  if (arms == 0 || agents == 0 || horizon == 0) throw domain_error("UCB needs K, N, T >= 1");
  UcbState s;
  s.arms = arms;
  s.agents = agents;
  s.horizon = horizon;
  s.warmup_pulls = ucb_warmup_pulls(arms, horizon);
  s.pull_counts.assign(arms, 0);
  s.reward_sums.assign(arms * agents, 0.0);
  s.optimistic = UtilityMatrix(arms, agents, 1.0);
  const double t = static_cast<double>(horizon);
  s.confidence_log = std::log(static_cast<double>(agents) * static_cast<double>(arms) * t * t);
  return s;
}

class UcbLearner final : public Learner {
 public:
  UcbLearner(std::size_t arms, std::size_t agents, std::size_t horizon, FrankWolfeOptions solver = {})
      : state_(ucb_init(arms, agents, horizon)), solver_(std::move(solver)) {}

  std::string name() const override { return "ucb"; }
  std::size_t arms() const override { return state_.arms; }
  bool supports(Feedback f) const override { return f == Feedback::kBandit; }
  const UcbState& state() const noexcept { return state_; }
  const std::optional<SolveReport>& last_solve() const noexcept { return last_solve_; }

  Strategy act() override {
    const std::size_t warmup_rounds = state_.arms * state_.warmup_pulls;
    if (state_.round <= warmup_rounds) {
      const std::size_t arm = (state_.round + state_.warmup_pulls - 1) / state_.warmup_pulls - 1;
      return Strategy::point_mass(state_.arms, arm);
    }
    if (!cached_ || dirty_) {
      FrankWolfeOptions opts = solver_;
      if (cached_) opts.start = cached_->vector();
      const SwfSpec f = SwfSpec::nsw();
      WelfareObjective objective(f, state_.optimistic);
      last_solve_ = maximize_concave_simplex(objective, state_.arms, opts);
      cached_ = last_solve_->solution;
      dirty_ = false;
    }
    return *cached_;
  }

  void observe_bandit(std::size_t arm, std::span<const double> row) override {
    if (arm >= state_.arms) throw dimension_error("arm index out of range");
    if (row.size() != state_.agents) throw dimension_error("observed row has the wrong length");
    ucb_update(arm, row);
  }

  void ucb_update(std::size_t arm, std::span<const double> row) {
    for (double x : row) {
      if (!(x >= 0.0 && x <= 1.0)) throw domain_error("observed utilities must lie in [0,1]");
    }
    auto& count = state_.pull_counts[arm];
    ++count;
    for (std::size_t n = 0; n < state_.agents; ++n) {
      state_.reward_sums[arm * state_.agents + n] += row[n];
      const double updated = bernstein_upper(state_.empirical_mean(arm, n), count, state_.confidence_log);
      if (updated != state_.optimistic(arm, n)) {
        state_.optimistic.set(arm, n, updated);
        dirty_ = true;
      }
    }
    ++state_.round;
  }

 private:
  UcbState state_;
  FrankWolfeOptions solver_;
  std::optional<Strategy> cached_;
  std::optional<SolveReport> last_solve_;
  bool dirty_ = true;
};

// ---------------------------------------------------------------------------
// Follow the regularized leader on accumulated welfare supergradients.

/// Learning rate used for the log-barrier regularizer: sqrt(K ln T / T).
inline double log_barrier_eta(std::size_t arms, std::size_t horizon) {
  const double t = static_cast<double>(std::max<std::size_t>(horizon, 2));
  return std::sqrt(static_cast<double>(arms) * std::log(t) / t);
}

/// Learning rate used for Tsallis entropy with exponent beta: sqrt(K^(1-beta) / (N T)).
inline double tsallis_eta(std::size_t arms, std::size_t agents, std::size_t horizon, double beta) {
  return std::sqrt(std::pow(static_cast<double>(arms), 1.0 - beta) /
                   (static_cast<double>(agents) * static_cast<double>(horizon)));
}

/// Learning rate used for negative entropy: sqrt(ln K / T).
inline double shannon_eta(std::size_t arms, std::size_t horizon) {
  return std::sqrt(std::log(static_cast<double>(std::max<std::size_t>(arms, 2))) /
                   static_cast<double>(horizon));
}

/// Regularizer for the NSW-specific Tsallis variant with beta = 2/N. At
/// N = 2 the Tsallis family degenerates to negative entropy, which is used
/// for N <= 2.
inline RegularizerSpec tsallis_for_agents(std::size_t arms, std::size_t agents, std::size_t horizon) {
  const double beta = 2.0 / static_cast<double>(agents);
  if (beta >= 1.0) return {RegularizerKind::kShannon, 1.0, shannon_eta(arms, horizon)};
  return {RegularizerKind::kTsallis, beta, tsallis_eta(arms, agents, horizon, beta)};
}

struct FtrlState {
  RegularizerSpec reg;
  std::vector<double> cumulative_grad;
  Strategy last_strategy;
  SwfSpec swf;
  std::size_t round = 1;
};

class FtrlLearner final : public Learner {
 public:
  FtrlLearner(std::size_t arms, RegularizerSpec reg, SwfSpec swf, double floor = kDefaultGradientFloor)
      : floor_(floor) {
    if (arms == 0) throw domain_error("FTRL needs at least one arm");
    reg.validate();
    swf.validate();
    state_.reg = reg;
    state_.swf = std::move(swf);
    state_.cumulative_grad.assign(arms, 0.0);
    state_.last_strategy = Strategy::uniform(arms);
  }

  std::string name() const override { return std::string("ftrl_") + to_string(state_.reg.kind); }
  std::size_t arms() const override { return state_.cumulative_grad.size(); }
  bool supports(Feedback f) const override { return f == Feedback::kFullInfo; }
  const FtrlState& state() const noexcept { return state_; }
  const SolveReport& last_solve() const noexcept { return last_solve_; }

  Strategy act() override {
    last_solve_ = ftrl_step(state_.cumulative_grad, state_.reg);
    state_.last_strategy = last_solve_.solution;
    return state_.last_strategy;
  }

  void observe_full(const UtilityMatrix& u) override {
    if (u.arms() != arms()) throw dimension_error("utility matrix arm count does not match learner");
    const auto g = swf_supergradient(state_.swf, u, state_.last_strategy.probs(), floor_);
    for (std::size_t i = 0; i < g.size(); ++i) state_.cumulative_grad[i] += g[i];
    ++state_.round;
  }

 private:
  FtrlState state_;
  double floor_;
  SolveReport last_solve_;
};

// ---------------------------------------------------------------------------
// Exponentially weighted online optimization for exp-concave losses.

struct EwooState {
  double alpha = 1.0;
  std::vector<UtilityMatrix> history;
  std::size_t samples = 20'000;
  std::optional<double> grid_resolution;
};

/// Exp-concavity constant M / (N - M) for losses -NSW with M indifferent agents.
inline double ewoo_alpha(std::size_t agents, std::size_t indifferent) {
  if (indifferent == 0 || indifferent >= agents) {
    throw domain_error("need 0 < M < N indifferent agents for a finite exp-concavity constant");
  }
  return static_cast<double>(indifferent) / static_cast<double>(agents - indifferent);
}

/// Plays the mean of the simplex under density proportional to
/// exp(-alpha * cumulative loss), with loss_s(p) = -NSW(u_s^T p). The
/// integral is approximated on a fixed point set (uniform simplex draws, or
/// a regular grid when a resolution is given); cumulative losses of the
/// points are updated once per observed matrix.
class EwooLearner final : public Learner {
 public:
  EwooLearner(std::size_t arms, double alpha, std::size_t samples, std::uint64_t seed,
              std::optional<double> grid_resolution = std::nullopt)
      : arms_(arms) {
    if (arms == 0) throw domain_error("EWOO needs at least one arm");
    if (!(alpha > 0.0)) throw domain_error("EWOO needs alpha > 0");
    state_.alpha = alpha;
    state_.samples = samples;
    state_.grid_resolution = grid_resolution;
    if (grid_resolution) {
      build_grid(*grid_resolution);
    } else {
      if (samples == 0) throw domain_error("EWOO needs at least one sample");
      Rng rng(seed);
      points_.reserve(samples * arms);
      for (std::size_t s = 0; s < samples; ++s) {
        const auto p = sample_simplex(arms, rng);
        points_.insert(points_.end(), p.begin(), p.end());
      }
    }
    losses_.assign(point_count(), 0.0);
  }

  std::string name() const override { return "ewoo"; }
  std::size_t arms() const override { return arms_; }
  bool supports(Feedback f) const override { return f == Feedback::kFullInfo; }
  const EwooState& state() const noexcept { return state_; }
  std::size_t point_count() const noexcept { return points_.size() / arms_; }

  Strategy act() override {
    double lowest = losses_.empty() ? 0.0 : losses_[0];
    for (double l : losses_) lowest = std::min(lowest, l);
    std::vector<double> mean(arms_, 0.0);
    double total = 0.0;
    for (std::size_t s = 0; s < losses_.size(); ++s) {
      const double w = std::exp(-state_.alpha * (losses_[s] - lowest));
      total += w;
      const double* p = points_.data() + s * arms_;
      for (std::size_t i = 0; i < arms_; ++i) mean[i] += w * p[i];
    }
    for (double& x : mean) x /= total;
    return Strategy::normalized(std::move(mean));
  }

  void observe_full(const UtilityMatrix& u) override {
    if (u.arms() != arms_) throw dimension_error("utility matrix arm count does not match learner");
    std::vector<double> mu(u.agents());
    for (std::size_t s = 0; s < losses_.size(); ++s) {
      u.mix_into(std::span<const double>(points_.data() + s * arms_, arms_), mu);
      losses_[s] -= nsw(mu);
    }
    state_.history.push_back(u);
  }

 private:
  void build_grid(double resolution) {
    if (!(resolution > 0.0 && resolution <= 1.0)) throw domain_error("grid resolution must lie in (0,1]");
    const long long m = std::llround(1.0 / resolution);
    std::vector<long long> c(arms_, 0);
    // Recursive enumeration of compositions of m into `arms_` parts.
    auto rec = [&](auto&& self, std::size_t j, long long left) -> void {
      if (j + 1 == arms_) {
        c[j] = left;
        for (std::size_t i = 0; i < arms_; ++i) points_.push_back(static_cast<double>(c[i]) / static_cast<double>(m));
        return;
      }
      for (long long v = 0; v <= left; ++v) {
        c[j] = v;
        self(self, j + 1, left - v);
      }
    };
    rec(rec, 0, m);
  }

  std::size_t arms_;
  EwooState state_;
  std::vector<double> points_;  // point_count x arms, row-major
  std::vector<double> losses_;  // cumulative loss of each point
};

// ---------------------------------------------------------------------------
// Baselines.

class UniformLearner final : public Learner {
 public:
  explicit UniformLearner(std::size_t arms) : p_(Strategy::uniform(arms)) {}
  std::string name() const override { return "uniform"; }
  std::size_t arms() const override { return p_.size(); }
  bool supports(Feedback) const override { return true; }
  Strategy act() override { return p_; }
  void observe_full(const UtilityMatrix&) override {}
  void observe_bandit(std::size_t, std::span<const double>) override {}

 private:
  Strategy p_;
};

class FixedLearner final : public Learner {
 public:
  explicit FixedLearner(Strategy p) : p_(std::move(p)) {}
  std::string name() const override { return "fixed"; }
  std::size_t arms() const override { return p_.size(); }
  bool supports(Feedback) const override { return true; }
  Strategy act() override { return p_; }
  void observe_full(const UtilityMatrix&) override {}
  void observe_bandit(std::size_t, std::span<const double>) override {}

 private:
  Strategy p_;
};

}  // namespace nswlab
