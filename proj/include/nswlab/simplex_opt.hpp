#pragma once

// Solvers over the probability simplex: the FTRL step for each regularizer,
// a pairwise Frank-Wolfe maximizer for concave objectives, and a brute-force
// grid search used as an independent check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "nswlab/core.hpp"
#include "nswlab/welfare.hpp"

namespace nswlab {

enum class RegularizerKind { kLogBarrier, kTsallis, kShannon };

inline const char* to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::kLogBarrier: return "log_barrier";
    case RegularizerKind::kTsallis: return "tsallis";
    case RegularizerKind::kShannon: return "shannon";
  }
  return "unknown";
}

struct RegularizerSpec {
  RegularizerKind kind = RegularizerKind::kLogBarrier;
  double beta = 0.5;  // Tsallis exponent, only read for kTsallis
  double eta = 1.0;

  void validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw domain_error("learning rate must be positive");
    if (kind == RegularizerKind::kTsallis && !(beta > 0.0 && beta < 1.0)) {
      throw domain_error("Tsallis exponent must lie in (0,1)");
    }
  }
};

struct SolveReport {
  Strategy solution;
  double kkt_residual = 0.0;
  int iterations = 0;
};

namespace detail {

// Regularizer derivative psi'(p).
inline double regularizer_slope(const RegularizerSpec& reg, double p) {
  switch (reg.kind) {
    case RegularizerKind::kLogBarrier: return -1.0 / p;
    case RegularizerKind::kTsallis: return -reg.beta / (1.0 - reg.beta) * std::pow(p, reg.beta - 1.0);
    case RegularizerKind::kShannon: return std::log(p) + 1.0;
  }
  return 0.0;
}

// Inverse of p -> psi'(p)/eta evaluated at -s, i.e. the p solving psi'(p)/eta = -s.
inline double regularizer_inverse(const RegularizerSpec& reg, double s) {
  switch (reg.kind) {
    case RegularizerKind::kLogBarrier: return 1.0 / (reg.eta * s);
    case RegularizerKind::kTsallis:
      return std::pow(reg.beta / ((1.0 - reg.beta) * reg.eta * s), 1.0 / (1.0 - reg.beta));
    case RegularizerKind::kShannon: return std::exp(-reg.eta * s - 1.0);
  }
  return 0.0;
}

}  // namespace detail

/// argmin over the simplex of <p, -G> + psi(p)/eta.
///
/// Stationarity gives psi'(p_i)/eta - G_i = -mu for a scalar multiplier mu,
/// so p_i is a decreasing function of mu and the simplex constraint pins mu
/// down. Gains are shifted by their maximum first (the argmin is invariant to
/// constant shifts), after which mu is bracketed and found by bisection.
inline SolveReport ftrl_step(std::span<const double> cumulative_gain, const RegularizerSpec& reg) {
  reg.validate();
  const std::size_t k = cumulative_gain.size();
  if (k == 0) throw dimension_error("ftrl_step needs at least one arm");
  for (double g : cumulative_gain) {
    if (!std::isfinite(g)) throw domain_error("cumulative gains must be finite");
  }
  if (k == 1) return {Strategy::point_mass(1, 0), 0.0, 0};

  const double top = *std::max_element(cumulative_gain.begin(), cumulative_gain.end());
  std::vector<double> shifted(k);
  for (std::size_t i = 0; i < k; ++i) shifted[i] = cumulative_gain[i] - top;

  const double kd = static_cast<double>(k);
  double lo = 0.0;
  double hi = 0.0;
  switch (reg.kind) {
    case RegularizerKind::kLogBarrier:
      hi = kd / reg.eta;
      break;
    case RegularizerKind::kTsallis:
      hi = reg.beta * std::pow(kd, 1.0 - reg.beta) / ((1.0 - reg.beta) * reg.eta);
      break;
    case RegularizerKind::kShannon:
      lo = -1.0 / reg.eta;
      hi = std::max(lo, (std::log(kd) - 1.0) / reg.eta);
      break;
  }

  auto total_at = [&](double mu) {
    double total = 0.0;
    for (double d : shifted) total += detail::regularizer_inverse(reg, mu - d);
    return total;
  };

  int iterations = 0;
  constexpr int kMaxIterations = 200;
  while (iterations < kMaxIterations) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    ++iterations;
    if (total_at(mid) > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double mu = 0.5 * (lo + hi);

  std::vector<double> p(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = detail::regularizer_inverse(reg, mu - shifted[i]);
    total += p[i];
  }
  const double sum_error = std::abs(total - 1.0);
  for (double& x : p) x /= total;

  // Spread of psi'(p_i)/eta - G_i across arms; zero at an exact solution.
  double s_min = std::numeric_limits<double>::infinity();
  double s_max = -s_min;
  double scale = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (p[i] <= 0.0) continue;
    const double s = detail::regularizer_slope(reg, p[i]) / reg.eta - shifted[i];
    s_min = std::min(s_min, s);
    s_max = std::max(s_max, s);
    scale = std::max(scale, std::abs(s));
  }
  const double stationarity = (s_max - s_min) / scale;
  return {Strategy(std::move(p)), sum_error + stationarity, iterations};
}

/// Closed-form minimizer for the negative-entropy regularizer: p proportional to exp(eta * G).
inline Strategy softmax_strategy(std::span<const double> cumulative_gain, double eta) {
  if (cumulative_gain.empty()) throw dimension_error("softmax needs at least one arm");
  const double top = *std::max_element(cumulative_gain.begin(), cumulative_gain.end());
  std::vector<double> p(cumulative_gain.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(eta * (cumulative_gain[i] - top));
    total += p[i];
  }
  for (double& x : p) x /= total;
  return Strategy::normalized(std::move(p));
}

/// (1 - gamma) p + gamma * uniform; every entry is at least gamma / K.
inline Strategy mix_with_uniform(const Strategy& p, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw domain_error("mixing weight must lie in [0,1]");
  const double k = static_cast<double>(p.size());
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) q[i] = (1.0 - gamma) * p[i] + gamma / k;
  return Strategy::normalized(std::move(q));
}

// ---------------------------------------------------------------------------
// Concave maximization over the simplex.

/// Callable returning f(p) and writing a supergradient of f at p into g.
template <class F>
concept ValueGradientOracle = requires(const F& f, std::span<const double> p, std::span<double> g) {
  { f(p, g) } -> std::convertible_to<double>;
};

/// Oracle that can also maximize itself along p + t (e_to - e_from), t in [0, t_max].
template <class F>
concept PairwiseLineSearch = ValueGradientOracle<F> &&
    requires(const F& f, std::span<const double> p, std::size_t to, std::size_t from, double t_max) {
      { f.line_search(p, to, from, t_max) } -> std::convertible_to<double>;
    };

struct FrankWolfeOptions {
  double tol = 1e-8;
  int max_iters = 10'000;
  std::optional<std::vector<double>> start;  // defaults to uniform
  int newton_every = 10;                     // face Newton refinement period, 0 disables
};

/// Maximizer of a concave function on [0, t_max] given its derivative, which
/// is nonincreasing. Illinois-modified regula falsi inside a shrinking bracket,
/// safeguarded by bisection.
template <class Derivative>
double maximize_concave_1d(const Derivative& slope, double t_max) {
  double a = 0.0;
  double fa = slope(a);
  if (!(fa > 0.0)) return 0.0;
  double b = t_max;
  double fb = slope(b);
  if (fb >= 0.0) return t_max;
  int side = 0;
  double width[2] = {b - a, b - a};
  for (int it = 0; it < 400; ++it) {
    double c = (fa * b - fb * a) / (fa - fb);
    // Bisect when the bracket has not halved over the last two steps, which
    // happens when one endpoint has a huge derivative.
    if (!(c > a && c < b) || b - a > 0.5 * width[it % 2]) c = 0.5 * (a + b);
    width[it % 2] = b - a;
    if (!(c > a && c < b)) break;
    const double fc = slope(c);
    if (fc == 0.0) return c;
    if (fc > 0.0) {
      a = c;
      fa = fc;
      if (side == 1) fb *= 0.5;
      side = 1;
    } else {
      b = c;
      fb = fc;
      if (side == -1) fa *= 0.5;
      side = -1;
    }
    if (b - a <= 1e-15 * t_max) break;
  }
  return 0.5 * (a + b);
}

namespace detail {

/// One damped Newton step of `oracle` restricted to the face spanned by the
/// support of p. The Hessian is taken from central differences of the
/// gradient. Returns true and updates p and value if the objective did not
/// decrease.
template <ValueGradientOracle Oracle>
bool face_newton_step(const Oracle& oracle, std::vector<double>& p, double& value) {
  const std::size_t k = p.size();
  std::vector<std::size_t> support;
  std::size_t anchor = k;
  for (std::size_t i = 0; i < k; ++i) {
    if (p[i] <= 0.0) continue;
    support.push_back(i);
    if (anchor == k || p[i] > p[anchor]) anchor = i;
  }
  if (support.size() < 2) return false;
  std::vector<std::size_t> free;
  double pmin = 1.0;
  for (std::size_t i : support) {
    pmin = std::min(pmin, p[i]);
    if (i != anchor) free.push_back(i);
  }
  const double h = std::min(1e-6, 0.25 * pmin);
  if (h < 1e-12) return false;

  const auto m = static_cast<Eigen::Index>(free.size());
  std::vector<double> g(k);
  std::vector<double> x(k);
  auto reduced = [&](const std::vector<double>& at, Eigen::VectorXd& r) {
    (void)oracle(std::span<const double>(at), std::span<double>(g));
    for (Eigen::Index j = 0; j < m; ++j) r[j] = g[free[j]] - g[anchor];
  };
  Eigen::VectorXd r0(m), rp(m), rm(m);
  reduced(p, r0);
  Eigen::MatrixXd hess(m, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    x = p;
    x[free[c]] += h;
    x[anchor] -= h;
    reduced(x, rp);
    x = p;
    x[free[c]] -= h;
    x[anchor] += h;
    reduced(x, rm);
    hess.col(c) = (rp - rm) / (2.0 * h);
  }
  Eigen::MatrixXd neg = -0.5 * (hess + hess.transpose());
  if (!neg.allFinite()) return false;
  neg.diagonal().array() += 1e-12 * (1.0 + neg.cwiseAbs().maxCoeff());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(neg);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = ldlt.solve(r0);
  if (!d.allFinite() || !(d.dot(r0) > 0.0)) return false;

  // Largest feasible step along d, capped at the full Newton step.
  double t = 1.0;
  const double anchor_rate = d.sum();
  if (anchor_rate > 0.0) t = std::min(t, p[anchor] / anchor_rate);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (d[j] < 0.0) t = std::min(t, p[free[j]] / -d[j]);
  }
  for (int tries = 0; tries < 30 && t > 0.0; ++tries, t *= 0.5) {
    x = p;
    for (Eigen::Index j = 0; j < m; ++j) x[free[j]] = std::max(0.0, p[free[j]] + t * d[j]);
    x[anchor] = std::max(0.0, p[anchor] - t * anchor_rate);
    const double v = oracle(std::span<const double>(x), std::span<double>(g));
    if (v >= value) {
      p = x;
      value = v;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Pairwise Frank-Wolfe with exact line search. The pairwise step moves mass
/// from the worst supported arm to the best arm, which lets the iterate reach
/// faces of the simplex and gives fast convergence on interior optima. The
/// reported residual is the Frank-Wolfe duality gap, an upper bound on the
/// suboptimality of the returned point. Every `newton_every` iterations a
/// Newton step on the current face speeds up ill-conditioned instances.
template <ValueGradientOracle Oracle>
SolveReport maximize_concave_simplex(const Oracle& oracle, std::size_t k,
                                     const FrankWolfeOptions& options = {}) {
  if (k == 0) throw dimension_error("simplex dimension must be positive");
  std::vector<double> p;
  if (options.start) {
    if (options.start->size() != k) throw dimension_error("warm start has the wrong length");
    p = Strategy::normalized(*options.start).vector();
  } else {
    p.assign(k, 1.0 / static_cast<double>(k));
  }
  std::vector<double> g(k);
  std::vector<double> probe(k);
  std::vector<double> probe_grad(k);

  double gap = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (;; ++iter) {
    double value = oracle(std::span<const double>(p), std::span<double>(g));
    std::size_t best = 0;
    std::size_t worst = k;
    double inner = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      inner += g[i] * p[i];
      if (g[i] > g[best]) best = i;
      if (p[i] > 0.0 && (worst == k || g[i] < g[worst])) worst = i;
    }
    gap = g[best] - inner;
    if (!(gap > options.tol) || iter >= options.max_iters || best == worst) break;
    if (options.newton_every > 0 && iter > 0 && iter % options.newton_every == 0 &&
        detail::face_newton_step(oracle, p, value)) {
      continue;
    }

    const double t_max = p[worst];
    double t = 0.0;
    if constexpr (PairwiseLineSearch<Oracle>) {
      t = oracle.line_search(std::span<const double>(p), best, worst, t_max);
    } else {
      auto slope = [&](double s) {
        probe = p;
        probe[best] += s;
        probe[worst] -= s;
        (void)oracle(std::span<const double>(probe), std::span<double>(probe_grad));
        return probe_grad[best] - probe_grad[worst];
      };
      t = maximize_concave_1d(slope, t_max);
    }
    if (t >= t_max) {
      p[best] += p[worst];
      p[worst] = 0.0;
    } else {
      p[best] += t;
      p[worst] -= t;
    }
  }
  return {Strategy::normalized(std::move(p)), std::max(gap, 0.0), iter};
}

/// p -> f(u^T p) with a line search carried out in utility space, so each
/// step of the search costs O(N) rather than O(K N).
class WelfareObjective {
 public:
  WelfareObjective(const SwfSpec& f, const UtilityMatrix& u, double floor = kDefaultGradientFloor)
      : f_(f), u_(&u), floor_(floor), mu_(u.agents()), grad_mu_(u.agents()) {}

  double operator()(std::span<const double> p, std::span<double> g) const {
    u_->mix_into(p, mu_);
    swf_gradient_mu(f_, mu_, floor_, grad_mu_);
    for (std::size_t i = 0; i < u_->arms(); ++i) g[i] = dot(u_->row(i), grad_mu_);
    return swf_value(f_, mu_);
  }

  double line_search(std::span<const double> p, std::size_t to, std::size_t from, double t_max) const {
    const std::size_t n = u_->agents();
    u_->mix_into(p, mu_);
    std::vector<double> delta(n);
    std::vector<double> point(n);
    for (std::size_t a = 0; a < n; ++a) delta[a] = (*u_)(to, a) - (*u_)(from, a);
    auto slope = [&](double t) {
      for (std::size_t a = 0; a < n; ++a) point[a] = std::max(mu_[a] + t * delta[a], 0.0);
      swf_gradient_mu(f_, point, floor_, grad_mu_);
      return dot(grad_mu_, delta);
    };
    return maximize_concave_1d(slope, t_max);
  }

 private:
  SwfSpec f_;
  const UtilityMatrix* u_;
  double floor_;
  mutable std::vector<double> mu_;
  mutable std::vector<double> grad_mu_;
};

/// Weighted average of p -> f(u_t^T p) over a collection of matrices. Used for
/// hindsight benchmarks and for expectations over finite outcome distributions.
class AverageWelfareObjective {
 public:
  AverageWelfareObjective(const SwfSpec& f, std::vector<const UtilityMatrix*> matrices,
                          std::vector<double> weights, double floor = kDefaultGradientFloor)
      : f_(f), matrices_(std::move(matrices)), weights_(std::move(weights)), floor_(floor) {
    if (matrices_.empty() || matrices_.size() != weights_.size()) {
      throw dimension_error("need one weight per matrix");
    }
    arms_ = matrices_.front()->arms();
    agents_ = matrices_.front()->agents();
    for (const auto* m : matrices_) {
      if (m->arms() != arms_ || m->agents() != agents_) throw dimension_error("mixed matrix shapes");
    }
    double total = 0.0;
    for (double w : weights_) total += w;
    if (!(total > 0.0)) throw domain_error("weights must have positive total");
    for (double& w : weights_) w /= total;
    mu_.resize(matrices_.size() * agents_);
    delta_.resize(mu_.size());
  }

  std::size_t arms() const noexcept { return arms_; }

  double operator()(std::span<const double> p, std::span<double> g) const {
    std::fill(g.begin(), g.end(), 0.0);
    std::vector<double> mu(agents_);
    std::vector<double> grad_mu(agents_);
    double value = 0.0;
    for (std::size_t t = 0; t < matrices_.size(); ++t) {
      const UtilityMatrix& u = *matrices_[t];
      u.mix_into(p, mu);
      value += weights_[t] * swf_value(f_, mu);
      swf_gradient_mu(f_, mu, floor_, grad_mu);
      for (std::size_t i = 0; i < arms_; ++i) g[i] += weights_[t] * dot(u.row(i), grad_mu);
    }
    return value;
  }

  double value(std::span<const double> p) const {
    std::vector<double> mu(agents_);
    double v = 0.0;
    for (std::size_t t = 0; t < matrices_.size(); ++t) {
      matrices_[t]->mix_into(p, mu);
      v += weights_[t] * swf_value(f_, mu);
    }
    return v;
  }

  double line_search(std::span<const double> p, std::size_t to, std::size_t from, double t_max) const {
    for (std::size_t t = 0; t < matrices_.size(); ++t) {
      const UtilityMatrix& u = *matrices_[t];
      std::span<double> mu(mu_.data() + t * agents_, agents_);
      u.mix_into(p, mu);
      for (std::size_t a = 0; a < agents_; ++a) delta_[t * agents_ + a] = u(to, a) - u(from, a);
    }
    std::vector<double> point(agents_);
    std::vector<double> grad_mu(agents_);
    auto slope = [&](double s) {
      double d = 0.0;
      for (std::size_t t = 0; t < matrices_.size(); ++t) {
        const double* mu = mu_.data() + t * agents_;
        const double* dl = delta_.data() + t * agents_;
        for (std::size_t a = 0; a < agents_; ++a) point[a] = std::max(mu[a] + s * dl[a], 0.0);
        swf_gradient_mu(f_, point, floor_, grad_mu);
        double local = 0.0;
        for (std::size_t a = 0; a < agents_; ++a) local += grad_mu[a] * dl[a];
        d += weights_[t] * local;
      }
      return d;
    };
    return maximize_concave_1d(slope, t_max);
  }

 private:
  SwfSpec f_;
  std::vector<const UtilityMatrix*> matrices_;
  std::vector<double> weights_;
  double floor_;
  std::size_t arms_ = 0;
  std::size_t agents_ = 0;
  mutable std::vector<double> mu_;
  mutable std::vector<double> delta_;
};

// ---------------------------------------------------------------------------
// Brute-force grid search.

inline constexpr std::size_t kMaxGridArms = 4;
inline constexpr double kMaxGridPoints = 5e7;

/// Best point of the uniform simplex grid with the given spacing. Grid points
/// are visited in lexicographic order of their coordinates and the first
/// maximizer wins.
template <class ValueOracle>
Strategy grid_oracle(const ValueOracle& value, std::size_t k, double resolution) {
  if (k == 0) throw dimension_error("simplex dimension must be positive");
  if (!(resolution > 0.0 && resolution <= 1.0)) throw domain_error("grid resolution must lie in (0,1]");
  const long long m = std::llround(1.0 / resolution);
  double count = 1.0;
  for (std::size_t j = 1; j < k; ++j) count = count * static_cast<double>(m + static_cast<long long>(j)) / static_cast<double>(j);
  if (k > kMaxGridArms || count > kMaxGridPoints) {
    throw domain_error("simplex grid too large to enumerate");
  }

  const double md = static_cast<double>(m);
  std::vector<long long> c(k, 0);
  std::vector<double> p(k);
  std::vector<double> best_p;
  double best = -std::numeric_limits<double>::infinity();

  // Odometer over compositions (c_1, ..., c_{k-1}) with the last part implied.
  c[k - 1] = m;
  for (;;) {
    for (std::size_t i = 0; i < k; ++i) p[i] = static_cast<double>(c[i]) / md;
    const double v = value(std::span<const double>(p));
    if (v > best) {
      best = v;
      best_p = p;
    }
    // Advance: increment the rightmost free coordinate that still has room.
    if (k == 1) break;
    std::size_t j = k - 1;
    long long used = 0;
    for (std::size_t i = 0; i + 1 < k; ++i) used += c[i];
    bool advanced = false;
    while (j-- > 0) {
      if (used < m) {
        ++c[j];
        ++used;
        for (std::size_t r = j + 1; r + 1 < k; ++r) {
          used -= c[r];
          c[r] = 0;
        }
        c[k - 1] = m - used;
        advanced = true;
        break;
      }
      used -= c[j];
      c[j] = 0;
    }
    if (!advanced) break;
  }
  return Strategy::normalized(std::move(best_p));
}

}  // namespace nswlab
