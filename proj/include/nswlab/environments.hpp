#pragma once

// Utility-matrix generators: stochastic and scheduled environments, the
// indifferent-agent family, and the lower-bound constructions together with
// exact checks of their defining properties.

#include <boost/rational.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nswlab/core.hpp"
#include "nswlab/simplex_opt.hpp"
#include "nswlab/welfare.hpp"

namespace nswlab {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// ---------------------------------------------------------------------------
// Stochastic environments.

enum class Noise { kBernoulli, kDeterministic };

struct StochasticEnv {
  UtilityMatrix mean;
  Noise noise = Noise::kBernoulli;
};

inline UtilityMatrix stochastic_sample(const StochasticEnv& env, Rng& rng) {
  if (env.noise == Noise::kDeterministic) return env.mean;
  UtilityMatrix u(env.mean.arms(), env.mean.agents());
  for (std::size_t i = 0; i < u.arms(); ++i) {
    for (std::size_t n = 0; n < u.agents(); ++n) u.set(i, n, rng.bernoulli(env.mean(i, n)) ? 1.0 : 0.0);
  }
  return u;
}

struct HardStochasticFamily {
  std::vector<StochasticEnv> envs;  // env i hides the signal at arm i
  double epsilon = 0.0;             // capped value used by the envs
  double epsilon_raw = 0.0;         // (ln K)^{2N} K / ((4N)^{2N} T) before capping
};

/// K Bernoulli environments: in env i, agent 1 has mean utility epsilon at
/// arm i and zero elsewhere; every other agent has utility one everywhere.
inline HardStochasticFamily hard_stochastic_family(std::size_t arms, std::size_t agents, std::size_t horizon) {
  if (arms < 2 || agents < 1 || horizon < 1) throw domain_error("hard stochastic family needs K >= 2, N >= 1, T >= 1");
  const double k = static_cast<double>(arms);
  const double two_n = 2.0 * static_cast<double>(agents);
  // Evaluated in log space; (ln K)^{2N} and (4N)^{2N} overflow quickly.
  const double log_raw = two_n * std::log(std::log(k)) + std::log(k) -
                         two_n * std::log(4.0 * static_cast<double>(agents)) -
                         std::log(static_cast<double>(horizon));
  HardStochasticFamily fam;
  fam.epsilon_raw = std::exp(log_raw);
  fam.epsilon = std::min(1.0 / 9.0, fam.epsilon_raw);
  for (std::size_t i = 0; i < arms; ++i) {
    UtilityMatrix mean(arms, agents, 1.0);
    for (std::size_t j = 0; j < arms; ++j) mean.set(j, 0, j == i ? fam.epsilon : 0.0);
    fam.envs.push_back({std::move(mean), Noise::kBernoulli});
  }
  return fam;
}

// ---------------------------------------------------------------------------
// Scheduled (oblivious adversarial) environments.

struct AdversarialScheduleEnv {
  std::vector<UtilityMatrix> schedule;
};

/// Agents whose columns are constant across arms each round; at least
/// `indifferent` of them per round.
struct IndifferentAgentEnv {
  std::size_t arms = 2;
  std::size_t agents = 2;
  std::size_t indifferent = 1;
  double extra_constant_prob = 0.0;  // chance that a further agent is also indifferent
  double constant_lo = 0.1;
  double constant_hi = 1.0;
  std::vector<double> free_hi;  // per-arm upper bound of non-constant utilities; empty means all 1
};

inline UtilityMatrix indifferent_sample(const IndifferentAgentEnv& env, Rng& rng) {
  if (env.indifferent >= env.agents) throw domain_error("need M < N indifferent agents");
  std::vector<std::size_t> order(env.agents);
  for (std::size_t n = 0; n < env.agents; ++n) order[n] = n;
  for (std::size_t j = 0; j < env.indifferent; ++j) {
    std::swap(order[j], order[j + rng.below(env.agents - j)]);
  }
  std::vector<bool> constant(env.agents, false);
  for (std::size_t j = 0; j < env.agents; ++j) {
    constant[order[j]] = j < env.indifferent || rng.bernoulli(env.extra_constant_prob);
  }
  UtilityMatrix u(env.arms, env.agents);
  for (std::size_t n = 0; n < env.agents; ++n) {
    if (constant[n]) {
      const double c = rng.uniform(env.constant_lo, env.constant_hi);
      for (std::size_t i = 0; i < env.arms; ++i) u.set(i, n, c);
    } else {
      for (std::size_t i = 0; i < env.arms; ++i) {
        u.set(i, n, rng.uniform() * (env.free_hi.empty() ? 1.0 : env.free_hi[i]));
      }
    }
  }
  return u;
}

/// Schedule generator where agents share a per-arm quality profile: each round
/// u_{i,n} = clamp(base_i + common shock_i + agent shock_{i,n}, 0, 1) with
/// shocks uniform on [-common_noise, common_noise] and [-agent_noise, agent_noise].
struct SharedProfileEnv {
  std::vector<double> base;  // one entry per arm
  std::size_t agents = 2;
  double common_noise = 0.2;
  double agent_noise = 0.1;
};

inline UtilityMatrix shared_profile_sample(const SharedProfileEnv& env, Rng& rng) {
  UtilityMatrix u(env.base.size(), env.agents);
  for (std::size_t i = 0; i < env.base.size(); ++i) {
    const double common = env.common_noise * (2.0 * rng.uniform() - 1.0);
    for (std::size_t n = 0; n < env.agents; ++n) {
      const double x = env.base[i] + common + env.agent_noise * (2.0 * rng.uniform() - 1.0);
      u.set(i, n, std::clamp(x, 0.0, 1.0));
    }
  }
  return u;
}

// ---------------------------------------------------------------------------
// Indistinguishable outcome pairs.

struct Outcome {
  Rational probability;
  UtilityMatrix matrix;
};

/// Interval of first-arm probabilities p_1.
struct P1Interval {
  Rational lo;
  Rational hi;
  bool lo_closed = true;
  bool hi_closed = true;

  bool contains(double x) const {
    const double a = to_double(lo);
    const double b = to_double(hi);
    return (lo_closed ? x >= a : x > a) && (hi_closed ? x <= b : x < b);
  }
};

struct PairMeta {
  Strategy p_star;      // optimum under dist_a
  Strategy p_star_alt;  // optimum under dist_b
  Rational theta;
  Rational gap;                     // claimed per-round suboptimality
  std::vector<P1Interval> region_a;  // strategies penalized under dist_a
  std::vector<P1Interval> region_b;  // strategies penalized under dist_b
};

struct OutcomePair {
  std::string name;
  SwfSpec swf;
  std::vector<Outcome> dist_a;
  std::vector<Outcome> dist_b;
  PairMeta meta;
};

enum class PairSide { kA, kB };

inline const std::vector<Outcome>& side_of(const OutcomePair& pair, PairSide side) {
  return side == PairSide::kA ? pair.dist_a : pair.dist_b;
}

/// Two arms, two agents; agent 2 always receives 1 and agent 1's column
/// (x, y) = (u_{1,1}, u_{2,1}) is drawn from q over {00, 01, 10, 11}.
inline OutcomePair hard_adversarial_nsw_pair() {
  auto make = [](const std::vector<Rational>& q) {
    std::vector<Outcome> d;
    for (int xy = 0; xy < 4; ++xy) {
      const double x = (xy >> 1) & 1;
      const double y = xy & 1;
      d.push_back({q[xy], UtilityMatrix::from_rows({{x, 1.0}, {y, 1.0}})});
    }
    return d;
  };
  OutcomePair pair;
  pair.name = "nsw";
  pair.swf = SwfSpec::nsw();
  pair.dist_a = make({Rational(4, 10), Rational(2, 10), Rational(1, 10), Rational(3, 10)});
  pair.dist_b = make({Rational(3, 10), Rational(3, 10), Rational(2, 10), Rational(2, 10)});
  pair.meta.p_star = Strategy{0.2, 0.8};
  pair.meta.p_star_alt = Strategy{4.0 / 13.0, 9.0 / 13.0};
  pair.meta.theta = Rational(33, 130);
  pair.meta.gap = Rational(1, 500);
  pair.meta.region_a = {{pair.meta.theta, Rational(1), true, true}};
  pair.meta.region_b = {{Rational(0), pair.meta.theta, true, false}};
  return pair;
}

/// Two arms, two agents, all sixteen binary matrices. Outcome index wxyz (in
/// binary) means u_{1,:} = (w, x) and u_{2,:} = (y, z).
inline OutcomePair hard_adversarial_nswprod_pair() {
  auto make = [](const std::vector<Rational>& q) {
    std::vector<Outcome> d;
    for (int idx = 0; idx < 16; ++idx) {
      const double w = (idx >> 3) & 1;
      const double x = (idx >> 2) & 1;
      const double y = (idx >> 1) & 1;
      const double z = idx & 1;
      d.push_back({q[idx], UtilityMatrix::from_rows({{w, x}, {y, z}})});
    }
    return d;
  };
  std::vector<Rational> qa(16, Rational(1, 16));
  qa[0] = Rational(1, 8);
  qa[2] = Rational(0);
  qa[4] = Rational(0);
  qa[6] = Rational(1, 8);
  std::vector<Rational> qb(16, Rational(1, 16));
  qb[1] = Rational(0);
  qb[3] = Rational(1, 8);
  qb[5] = Rational(1, 8);
  qb[7] = Rational(0);

  OutcomePair pair;
  pair.name = "nswprod";
  pair.swf = SwfSpec::nsw_prod();
  pair.dist_a = make(qa);
  pair.dist_b = make(qb);
  pair.meta.p_star = Strategy{0.5, 0.5};
  pair.meta.p_star_alt = Strategy{0.0, 1.0};
  pair.meta.theta = Rational(1, 4);
  pair.meta.gap = Rational(1, 256);
  pair.meta.region_a = {{Rational(0), Rational(1, 4), true, true}, {Rational(3, 4), Rational(1), true, true}};
  pair.meta.region_b = {{Rational(1, 4), Rational(3, 4), false, false}};
  return pair;
}

namespace detail {

inline bool valid_distribution(const std::vector<Outcome>& dist, std::size_t arms, std::size_t agents) {
  Rational total(0);
  for (const auto& o : dist) {
    if (o.probability < Rational(0)) return false;
    if (o.matrix.arms() != arms || o.matrix.agents() != agents) return false;
    for (double x : o.matrix.data()) {
      if (x != 0.0 && x != 1.0) return false;
    }
    total += o.probability;
  }
  return total == Rational(1);
}

}  // namespace detail

/// Exact distribution of the observed row u_{arm,:} under a finite outcome distribution.
inline std::map<std::vector<double>, Rational> arm_observation_marginal(const std::vector<Outcome>& dist,
                                                                       std::size_t arm) {
  std::map<std::vector<double>, Rational> marginal;
  for (const auto& o : dist) {
    if (o.probability == Rational(0)) continue;
    const auto row = o.matrix.row(arm);
    marginal[std::vector<double>(row.begin(), row.end())] += o.probability;
  }
  return marginal;
}

/// True iff both distributions are valid and every arm's observation has the
/// same distribution under both, compared exactly.
inline bool verify_marginal_equivalence(const OutcomePair& pair) {
  if (pair.dist_a.empty() || pair.dist_b.empty()) return false;
  const std::size_t arms = pair.dist_a.front().matrix.arms();
  const std::size_t agents = pair.dist_a.front().matrix.agents();
  if (!detail::valid_distribution(pair.dist_a, arms, agents) ||
      !detail::valid_distribution(pair.dist_b, arms, agents)) {
    return false;
  }
  for (std::size_t i = 0; i < arms; ++i) {
    if (arm_observation_marginal(pair.dist_a, i) != arm_observation_marginal(pair.dist_b, i)) return false;
  }
  return true;
}

/// E_{u ~ dist}[f(u^T p)].
inline double expected_welfare(const std::vector<Outcome>& dist, const SwfSpec& f, std::span<const double> p) {
  double v = 0.0;
  for (const auto& o : dist) {
    if (o.probability != Rational(0)) v += to_double(o.probability) * welfare_of_strategy(f, o.matrix, p);
  }
  return v;
}

/// Objective p -> E_{u ~ dist}[f(u^T p)] for the simplex solvers.
inline AverageWelfareObjective expected_welfare_objective(const std::vector<Outcome>& dist, const SwfSpec& f) {
  std::vector<const UtilityMatrix*> mats;
  std::vector<double> weights;
  for (const auto& o : dist) {
    if (o.probability == Rational(0)) continue;
    mats.push_back(&o.matrix);
    weights.push_back(to_double(o.probability));
  }
  return AverageWelfareObjective(f, std::move(mats), std::move(weights));
}

struct GapReport {
  double gap_a = 0.0;  // min suboptimality over region_a under dist_a
  double gap_b = 0.0;  // min suboptimality over region_b under dist_b
  double worst_p1_a = 0.0;
  double worst_p1_b = 0.0;
  double certified() const { return std::min(gap_a, gap_b); }
};

namespace detail {

inline std::vector<double> region_points(const std::vector<P1Interval>& region, double resolution) {
  std::vector<double> pts;
  const long long m = std::llround(1.0 / resolution);
  for (long long j = 0; j <= m; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(m);
    for (const auto& iv : region) {
      if (iv.contains(x)) {
        pts.push_back(x);
        break;
      }
    }
  }
  for (const auto& iv : region) {
    if (iv.lo_closed) pts.push_back(to_double(iv.lo));
    if (iv.hi_closed) pts.push_back(to_double(iv.hi));
  }
  return pts;
}

inline std::pair<double, double> min_suboptimality(const std::vector<Outcome>& dist, const SwfSpec& f,
                                                   const Strategy& optimum,
                                                   const std::vector<P1Interval>& region, double resolution) {
  const double best = expected_welfare(dist, f, optimum.probs());
  double worst = std::numeric_limits<double>::infinity();
  double where = 0.0;
  for (double x : region_points(region, resolution)) {
    const double p[2] = {x, 1.0 - x};
    const double sub = best - expected_welfare(dist, f, p);
    if (sub < worst) {
      worst = sub;
      where = x;
    }
  }
  return {worst, where};
}

}  // namespace detail

/// Smallest expected-welfare suboptimality over each side's penalized region,
/// scanned on a p_1 grid with the given spacing (region endpoints included).
inline GapReport verify_gap_report(const OutcomePair& pair, const SwfSpec& f, double resolution) {
  if (pair.dist_a.empty() || pair.dist_a.front().matrix.arms() != 2) {
    throw dimension_error("gap verification is defined for two-arm pairs");
  }
  if (!(resolution > 0.0 && resolution <= 1.0)) throw domain_error("resolution must lie in (0,1]");
  GapReport r;
  std::tie(r.gap_a, r.worst_p1_a) =
      detail::min_suboptimality(pair.dist_a, f, pair.meta.p_star, pair.meta.region_a, resolution);
  std::tie(r.gap_b, r.worst_p1_b) =
      detail::min_suboptimality(pair.dist_b, f, pair.meta.p_star_alt, pair.meta.region_b, resolution);
  return r;
}

inline double verify_gap(const OutcomePair& pair, const SwfSpec& f, double resolution) {
  return verify_gap_report(pair, f, resolution).certified();
}

inline UtilityMatrix sample_from_pair(const OutcomePair& pair, PairSide side, Rng& rng) {
  const auto& dist = side_of(pair, side);
  if (dist.empty()) throw domain_error("empty outcome distribution");
  const double r = rng.uniform();
  double cumulative = 0.0;
  for (const auto& o : dist) {
    cumulative += to_double(o.probability);
    if (r < cumulative) return o.matrix;
  }
  for (auto it = dist.rbegin(); it != dist.rend(); ++it) {
    if (it->probability > Rational(0)) return it->matrix;
  }
  return dist.back().matrix;
}

// ---------------------------------------------------------------------------
// Environment descriptions used by the harness and the config files.

struct HardStochasticEnv {
  std::size_t arms = 2;
  std::size_t agents = 2;
  std::size_t horizon = 1000;
  std::size_t index = 0;  // which member of the family
};

struct PairEnv {
  std::string which = "nsw";  // "nsw" or "nswprod"
  PairSide side = PairSide::kA;
};

using EnvironmentSpec = std::variant<StochasticEnv, HardStochasticEnv, AdversarialScheduleEnv, PairEnv,
                                     IndifferentAgentEnv, SharedProfileEnv>;

inline OutcomePair builtin_pair(const std::string& which) {
  if (which == "nsw") return hard_adversarial_nsw_pair();
  if (which == "nswprod") return hard_adversarial_nswprod_pair();
  throw domain_error("unknown outcome pair '" + which + "'");
}

/// Runtime view of an EnvironmentSpec: dimensions, per-round draws and, for
/// stochastic environments, the mean matrix the regret is measured against.
class Environment {
 public:
  explicit Environment(EnvironmentSpec spec) : spec_(std::move(spec)) {
    if (auto* h = std::get_if<HardStochasticEnv>(&spec_)) {
      auto fam = hard_stochastic_family(h->arms, h->agents, h->horizon);
      if (h->index >= fam.envs.size()) throw domain_error("hard family index out of range");
      resolved_ = fam.envs[h->index];
    } else if (auto* s = std::get_if<StochasticEnv>(&spec_)) {
      resolved_ = *s;
    } else if (auto* p = std::get_if<PairEnv>(&spec_)) {
      pair_ = builtin_pair(p->which);
    } else if (auto* sc = std::get_if<AdversarialScheduleEnv>(&spec_)) {
      if (sc->schedule.empty()) throw domain_error("empty schedule");
      for (const auto& m : sc->schedule) {
        if (m.arms() != sc->schedule.front().arms() || m.agents() != sc->schedule.front().agents()) {
          throw dimension_error("schedule matrices have mixed shapes");
        }
      }
    } else if (auto* ind = std::get_if<IndifferentAgentEnv>(&spec_)) {
      if (ind->arms == 0 || ind->agents == 0) throw domain_error("indifferent env needs K, N >= 1");
      if (ind->indifferent >= ind->agents) throw domain_error("need M < N indifferent agents");
      if (!ind->free_hi.empty() && ind->free_hi.size() != ind->arms) {
        throw dimension_error("free_hi needs one entry per arm");
      }
      for (double b : ind->free_hi) {
        if (!(b >= 0.0 && b <= 1.0)) throw domain_error("free_hi entries must lie in [0,1]");
      }
    } else if (auto* sp = std::get_if<SharedProfileEnv>(&spec_)) {
      if (sp->base.empty() || sp->agents == 0) throw domain_error("shared-profile env needs K, N >= 1");
    }
  }

  const EnvironmentSpec& spec() const noexcept { return spec_; }

  std::size_t arms() const {
    if (resolved_) return resolved_->mean.arms();
    if (pair_) return 2;
    if (auto* sc = std::get_if<AdversarialScheduleEnv>(&spec_)) return sc->schedule.front().arms();
    if (auto* ind = std::get_if<IndifferentAgentEnv>(&spec_)) return ind->arms;
    return std::get<SharedProfileEnv>(spec_).base.size();
  }

  std::size_t agents() const {
    if (resolved_) return resolved_->mean.agents();
    if (pair_) return 2;
    if (auto* sc = std::get_if<AdversarialScheduleEnv>(&spec_)) return sc->schedule.front().agents();
    if (auto* ind = std::get_if<IndifferentAgentEnv>(&spec_)) return ind->agents;
    return std::get<SharedProfileEnv>(spec_).agents;
  }

  /// Stochastic environments report their mean; regret is then measured on it.
  const UtilityMatrix* mean() const { return resolved_ ? &resolved_->mean : nullptr; }

  const OutcomePair* pair() const { return pair_ ? &*pair_ : nullptr; }

  /// Longest horizon the environment can serve.
  std::size_t max_horizon() const {
    if (auto* sc = std::get_if<AdversarialScheduleEnv>(&spec_)) return sc->schedule.size();
    return std::numeric_limits<std::size_t>::max();
  }

  /// Utility matrix for round t (1-based).
  UtilityMatrix draw(std::size_t t, Rng& rng) const {
    if (resolved_) return stochastic_sample(*resolved_, rng);
    if (pair_) return sample_from_pair(*pair_, std::get<PairEnv>(spec_).side, rng);
    if (auto* sc = std::get_if<AdversarialScheduleEnv>(&spec_)) {
      if (t == 0 || t > sc->schedule.size()) throw domain_error("round beyond the end of the schedule");
      return sc->schedule[t - 1];
    }
    if (auto* ind = std::get_if<IndifferentAgentEnv>(&spec_)) return indifferent_sample(*ind, rng);
    return shared_profile_sample(std::get<SharedProfileEnv>(spec_), rng);
  }

 private:
  EnvironmentSpec spec_;
  std::optional<StochasticEnv> resolved_;
  std::optional<OutcomePair> pair_;
};

}  // namespace nswlab
