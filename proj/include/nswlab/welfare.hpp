#pragma once

// Social welfare functions over per-agent expected utilities, their values on
// (utility matrix, strategy) pairs, and supergradients with respect to the
// strategy.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nswlab/core.hpp"

namespace nswlab {

inline constexpr double kDefaultGradientFloor = 1e-12;

enum class SwfKind { kNsw, kNswProd, kUtilitarian, kGgi, kWeightedNsw, kConvexCombo };

inline const char* to_string(SwfKind kind) {
  switch (kind) {
    case SwfKind::kNsw: return "nsw";
    case SwfKind::kNswProd: return "nsw_prod";
    case SwfKind::kUtilitarian: return "utilitarian";
    case SwfKind::kGgi: return "ggi";
    case SwfKind::kWeightedNsw: return "weighted_nsw";
    case SwfKind::kConvexCombo: return "convex_combo";
  }
  return "unknown";
}

struct SwfTerm;

/// Description of a social welfare function. Weighted kinds carry a weight
/// vector on the agent simplex; convex combinations carry their terms.
struct SwfSpec {
  SwfKind kind = SwfKind::kNsw;
  std::optional<std::vector<double>> weights;
  std::vector<SwfTerm> combo;

  static SwfSpec nsw() { return {SwfKind::kNsw, std::nullopt, {}}; }
  static SwfSpec nsw_prod() { return {SwfKind::kNswProd, std::nullopt, {}}; }
  static SwfSpec utilitarian(std::vector<double> w) { return weighted(SwfKind::kUtilitarian, std::move(w)); }
  static SwfSpec ggi(std::vector<double> w) { return weighted(SwfKind::kGgi, std::move(w)); }
  static SwfSpec weighted_nsw(std::vector<double> w) { return weighted(SwfKind::kWeightedNsw, std::move(w)); }
  static SwfSpec convex_combo(std::vector<SwfTerm> terms);

  bool needs_weights() const noexcept {
    return kind == SwfKind::kUtilitarian || kind == SwfKind::kGgi || kind == SwfKind::kWeightedNsw;
  }

  /// True for kinds that are concave on [0,1]^N. The plain product is not.
  bool is_concave() const;

  void validate() const;

 private:
  static SwfSpec weighted(SwfKind kind, std::vector<double> w) {
    SwfSpec s{kind, std::move(w), {}};
    s.validate();
    return s;
  }
};

struct SwfTerm {
  double coefficient = 0.0;
  SwfSpec swf;
};

inline SwfSpec SwfSpec::convex_combo(std::vector<SwfTerm> terms) {
  SwfSpec s{SwfKind::kConvexCombo, std::nullopt, std::move(terms)};
  s.validate();
  return s;
}

inline bool SwfSpec::is_concave() const {
  if (kind == SwfKind::kNswProd) return false;
  if (kind == SwfKind::kConvexCombo) {
    return std::all_of(combo.begin(), combo.end(),
                       [](const SwfTerm& t) { return t.coefficient == 0.0 || t.swf.is_concave(); });
  }
  return true;
}

inline void SwfSpec::validate() const {
  constexpr double tol = 1e-9;
  if (weights) {
    double total = 0.0;
    for (double w : *weights) {
      if (!(w >= 0.0)) throw domain_error("welfare weights must be nonnegative");
      total += w;
    }
    if (weights->empty() || std::abs(total - 1.0) > tol) {
      throw domain_error("welfare weights must lie on the simplex");
    }
  }
  if (kind == SwfKind::kConvexCombo) {
    if (combo.empty()) throw domain_error("convex combination needs at least one term");
    double total = 0.0;
    for (const auto& t : combo) {
      if (!(t.coefficient >= 0.0)) throw domain_error("combination coefficients must be nonnegative");
      total += t.coefficient;
      t.swf.validate();
    }
    if (std::abs(total - 1.0) > tol) throw domain_error("combination coefficients must sum to one");
  }
}

/// Geometric mean of the coordinates. A zero coordinate yields zero.
inline double nsw(std::span<const double> mu) {
  if (mu.empty()) throw dimension_error("nsw of an empty utility vector");
  double prod = 1.0;
  for (double x : mu) {
    if (x == 0.0) return 0.0;
    prod *= x;
  }
  if (mu.size() == 2) return std::sqrt(prod);
  const double e = 1.0 / static_cast<double>(mu.size());
  if (prod > 1e-250) return std::pow(prod, e);
  // The plain product underflowed; take the root coordinatewise.
  double v = 1.0;
  for (double x : mu) v *= std::pow(x, e);
  return v;
}

inline double nsw_prod(std::span<const double> mu) {
  if (mu.empty()) throw dimension_error("nsw_prod of an empty utility vector");
  double v = 1.0;
  for (double x : mu) v *= x;
  return v;
}

namespace detail {

inline const std::vector<double>& require_weights(const SwfSpec& f, std::size_t agents) {
  if (!f.weights) {
    throw domain_error(std::string("welfare kind '") + to_string(f.kind) + "' requires weights");
  }
  if (f.weights->size() != agents) {
    throw dimension_error("welfare weight count does not match agent count");
  }
  return *f.weights;
}

// Minimizing permutation for the Gini index: utilities in ascending
// order (stable, so ties keep index order) meet weights in descending order.
inline void ggi_assignment(std::span<const double> mu, const std::vector<double>& w,
                           std::vector<std::size_t>& order, std::vector<double>& sorted_w) {
  order.resize(mu.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mu[a] < mu[b]; });
  sorted_w = w;
  std::stable_sort(sorted_w.begin(), sorted_w.end(), std::greater<>());
}

}  // namespace detail

inline double swf_value(const SwfSpec& f, std::span<const double> mu) {
  switch (f.kind) {
    case SwfKind::kNsw:
      return nsw(mu);
    case SwfKind::kNswProd:
      return nsw_prod(mu);
    case SwfKind::kUtilitarian: {
      const auto& w = detail::require_weights(f, mu.size());
      return dot(w, mu);
    }
    case SwfKind::kGgi: {
      const auto& w = detail::require_weights(f, mu.size());
      std::vector<std::size_t> order;
      std::vector<double> sw;
      detail::ggi_assignment(mu, w, order, sw);
      double v = 0.0;
      for (std::size_t k = 0; k < order.size(); ++k) v += sw[k] * mu[order[k]];
      return v;
    }
    case SwfKind::kWeightedNsw: {
      const auto& w = detail::require_weights(f, mu.size());
      double v = 1.0;
      for (std::size_t n = 0; n < mu.size(); ++n) {
        if (w[n] != 0.0) v *= std::pow(mu[n], w[n]);
      }
      return v;
    }
    case SwfKind::kConvexCombo: {
      double v = 0.0;
      for (const auto& t : f.combo) {
        if (t.coefficient != 0.0) v += t.coefficient * swf_value(t.swf, mu);
      }
      return v;
    }
  }
  throw domain_error("unsupported welfare kind");
}

/// Supergradient of f with respect to the utility vector. Coordinates are
/// clamped at `floor` wherever f is not differentiable at zero.
inline void swf_gradient_mu(const SwfSpec& f, std::span<const double> mu, double floor,
                            std::span<double> out) {
  const std::size_t n_agents = mu.size();
  switch (f.kind) {
    case SwfKind::kNsw: {
      const double e = 1.0 / static_cast<double>(n_agents);
      double value = 1.0;
      for (double x : mu) value *= std::pow(std::max(x, floor), e);
      for (std::size_t n = 0; n < n_agents; ++n) out[n] = value * e / std::max(mu[n], floor);
      return;
    }
    case SwfKind::kNswProd: {
      for (std::size_t n = 0; n < n_agents; ++n) {
        double g = 1.0;
        for (std::size_t m = 0; m < n_agents; ++m) {
          if (m != n) g *= mu[m];
        }
        out[n] = g;
      }
      return;
    }
    case SwfKind::kUtilitarian: {
      const auto& w = detail::require_weights(f, n_agents);
      std::copy(w.begin(), w.end(), out.begin());
      return;
    }
    case SwfKind::kGgi: {
      const auto& w = detail::require_weights(f, n_agents);
      std::vector<std::size_t> order;
      std::vector<double> sw;
      detail::ggi_assignment(mu, w, order, sw);
      for (std::size_t k = 0; k < order.size(); ++k) out[order[k]] = sw[k];
      return;
    }
    case SwfKind::kWeightedNsw: {
      const auto& w = detail::require_weights(f, n_agents);
      double value = 1.0;
      for (std::size_t n = 0; n < n_agents; ++n) {
        if (w[n] != 0.0) value *= std::pow(std::max(mu[n], floor), w[n]);
      }
      for (std::size_t n = 0; n < n_agents; ++n) out[n] = value * w[n] / std::max(mu[n], floor);
      return;
    }
    case SwfKind::kConvexCombo: {
      std::fill(out.begin(), out.end(), 0.0);
      std::vector<double> term(n_agents);
      for (const auto& t : f.combo) {
        if (t.coefficient == 0.0) continue;
        swf_gradient_mu(t.swf, mu, floor, term);
        for (std::size_t n = 0; n < n_agents; ++n) out[n] += t.coefficient * term[n];
      }
      return;
    }
  }
  throw domain_error("unsupported welfare kind");
}

/// f applied to the agents' expected utilities (<p, u_{:,1}>, ..., <p, u_{:,N}>).
inline double welfare_of_strategy(const SwfSpec& f, const UtilityMatrix& u, std::span<const double> p) {
  if (p.size() != u.arms()) throw dimension_error("strategy length does not match arm count");
  return swf_value(f, u.mix(p));
}

inline double welfare_of_strategy(const SwfSpec& f, const UtilityMatrix& u, const Strategy& p) {
  return welfare_of_strategy(f, u, p.probs());
}

/// Supergradient of p -> f(u^T p): the chain rule through the mixed utilities.
inline std::vector<double> swf_supergradient(const SwfSpec& f, const UtilityMatrix& u,
                                             std::span<const double> p,
                                             double floor = kDefaultGradientFloor) {
  if (p.size() != u.arms()) throw dimension_error("strategy length does not match arm count");
  const std::vector<double> mu = u.mix(p);
  std::vector<double> g_mu(u.agents());
  swf_gradient_mu(f, mu, floor, g_mu);
  std::vector<double> g(u.arms());
  for (std::size_t i = 0; i < u.arms(); ++i) g[i] = dot(u.row(i), g_mu);
  return g;
}

/// Gradient of p -> NSW(u^T p): g_i = NSW(x) / N * sum_n u_{i,n} / x_n with
/// x_n = max(<p, u_{:,n}>, floor).
inline std::vector<double> nsw_supergradient(const UtilityMatrix& u, std::span<const double> p,
                                             double floor = kDefaultGradientFloor) {
  if (!(floor > 0.0)) throw domain_error("gradient floor must be positive");
  return swf_supergradient(SwfSpec::nsw(), u, p, floor);
}

}  // namespace nswlab
