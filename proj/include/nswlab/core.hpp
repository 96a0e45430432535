#pragma once

// Core value types shared by every nswlab module: utility matrices, simplex
// strategies, error types and a small deterministic random source.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nswlab {

class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class domain_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class solver_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kSimplexTolerance = 1e-12;

/// K x N matrix of per-arm, per-agent utilities in [0,1], stored row-major
/// (row i holds the utilities every agent receives when arm i is played).
class UtilityMatrix {
 public:
  UtilityMatrix() = default;

  UtilityMatrix(std::size_t arms, std::size_t agents, double fill = 0.0)
      : arms_(arms), agents_(agents), data_(arms * agents, fill) {
    if (arms == 0 || agents == 0) {
      throw dimension_error("utility matrix needs at least one arm and one agent");
    }
    check_entry(fill);
  }

  static UtilityMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) {
      throw dimension_error("utility matrix needs at least one arm and one agent");
    }
    UtilityMatrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.agents_) {
        throw dimension_error("ragged utility matrix rows");
      }
      for (std::size_t n = 0; n < m.agents_; ++n) m.set(i, n, rows[i][n]);
    }
    return m;
  }

  static UtilityMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<std::vector<double>> v;
    for (const auto& r : rows) v.emplace_back(r);
    return from_rows(v);
  }

  /// Builds a matrix from per-agent columns (column n lists agent n's utility for every arm).
  static UtilityMatrix from_columns(const std::vector<std::vector<double>>& cols) {
    if (cols.empty() || cols.front().empty()) {
      throw dimension_error("utility matrix needs at least one arm and one agent");
    }
    UtilityMatrix m(cols.front().size(), cols.size());
    for (std::size_t n = 0; n < cols.size(); ++n) {
      if (cols[n].size() != m.arms_) throw dimension_error("ragged utility matrix columns");
      for (std::size_t i = 0; i < m.arms_; ++i) m.set(i, n, cols[n][i]);
    }
    return m;
  }

  std::size_t arms() const noexcept { return arms_; }
  std::size_t agents() const noexcept { return agents_; }

  double operator()(std::size_t arm, std::size_t agent) const noexcept {
    return data_[arm * agents_ + agent];
  }

  void set(std::size_t arm, std::size_t agent, double value) {
    check_entry(value);
    data_[arm * agents_ + agent] = value;
  }

  std::span<const double> row(std::size_t arm) const noexcept {
    return {data_.data() + arm * agents_, agents_};
  }

  std::vector<double> column(std::size_t agent) const {
    std::vector<double> c(arms_);
    for (std::size_t i = 0; i < arms_; ++i) c[i] = (*this)(i, agent);
    return c;
  }

  std::span<const double> data() const noexcept { return data_; }

  /// Per-agent expected utilities under a mixed strategy: out[n] = <p, u_{:,n}>.
  void mix_into(std::span<const double> p, std::span<double> out) const noexcept {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < arms_; ++i) {
      const double w = p[i];
      if (w == 0.0) continue;
      const double* r = data_.data() + i * agents_;
      for (std::size_t n = 0; n < agents_; ++n) out[n] += w * r[n];
    }
  }

  std::vector<double> mix(std::span<const double> p) const {
    if (p.size() != arms_) throw dimension_error("strategy length does not match arm count");
    std::vector<double> out(agents_);
    mix_into(p, out);
    return out;
  }

  friend bool operator==(const UtilityMatrix&, const UtilityMatrix&) = default;

 private:
  static void check_entry(double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw domain_error("utility entries must lie in [0,1], got " + std::to_string(v));
    }
  }

  std::size_t arms_ = 0;
  std::size_t agents_ = 0;
  std::vector<double> data_;
};

/// A point of the probability simplex over K arms.
class Strategy {
 public:
  Strategy() = default;

  explicit Strategy(std::vector<double> probs) : probs_(std::move(probs)) { validate(); }

  Strategy(std::initializer_list<double> probs) : probs_(probs) { validate(); }

  static Strategy uniform(std::size_t k) {
    if (k == 0) throw dimension_error("strategy needs at least one arm");
    return Strategy(std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }

  static Strategy point_mass(std::size_t k, std::size_t arm) {
    if (arm >= k) throw dimension_error("point mass arm out of range");
    std::vector<double> p(k, 0.0);
    p[arm] = 1.0;
    return Strategy(std::move(p));
  }

  /// Clamps tiny negative round-off to zero and rescales to sum exactly one.
  static Strategy normalized(std::vector<double> probs) {
    double total = 0.0;
    for (double& x : probs) {
      if (x < 0.0 && x > -1e-9) x = 0.0;
      total += x;
    }
    if (!(total > 0.0)) throw domain_error("cannot normalize a zero vector");
    for (double& x : probs) x /= total;
    return Strategy(std::move(probs));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const noexcept { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }
  const std::vector<double>& vector() const noexcept { return probs_; }

  double min_entry() const { return *std::min_element(probs_.begin(), probs_.end()); }

  friend bool operator==(const Strategy&, const Strategy&) = default;

 private:
  void validate() const {
    if (probs_.empty()) throw dimension_error("strategy needs at least one arm");
    double total = 0.0;
    for (double x : probs_) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw domain_error("strategy entries must be finite and nonnegative");
      }
      total += x;
    }
    if (std::abs(total - 1.0) > kSimplexTolerance) {
      throw domain_error("strategy entries must sum to one");
    }
  }

  std::vector<double> probs_;
};

/// splitmix64 finalizer; used to derive independent streams from one seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic 64-bit source wrapping std::mt19937_64, whose output
/// sequence is fixed by the standard. Doubles are built from the top 53 bits
/// rather than through std distributions, which differ across libraries.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : engine_(mix_seed(seed)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept { return engine_(); }

  /// Uniform in [0,1).
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) noexcept {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Independent child stream; `tag` distinguishes siblings.
  Rng fork(std::uint64_t tag) noexcept { return Rng(mix_seed((*this)() ^ mix_seed(tag))); }

 private:
  std::mt19937_64 engine_;
};

/// Uniform draw from the (K-1)-simplex via normalized exponential spacings.
inline std::vector<double> sample_simplex(std::size_t k, Rng& rng) {
  std::vector<double> p(k);
  double total = 0.0;
  for (auto& x : p) {
    x = -std::log1p(-rng.uniform());
    total += x;
  }
  for (auto& x : p) x /= total;
  return p;
}

/// Inverse-CDF draw of an arm from a strategy with a single uniform variate.
inline std::size_t sample_arm(const Strategy& p, Rng& rng) {
  const double r = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cumulative += p[i];
    if (r < cumulative) return i;
  }
  // r landed in the round-off tail; return the last arm with positive mass.
  for (std::size_t i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return i;
  }
  return p.size() - 1;
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace nswlab
