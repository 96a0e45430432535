#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "nswlab/learners.hpp"

using namespace nswlab;

namespace {

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

// Copy of the played strategy; ranging over act().probs() would dangle.
std::vector<double> play(Learner& l) { return l.act().vector(); }

UtilityMatrix random_matrix(std::size_t k, std::size_t n, Rng& rng) {
  UtilityMatrix u(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < n; ++j) u.set(i, j, rng.uniform());
  }
  return u;
}

// Matrix whose first m columns are constant across arms.
UtilityMatrix indifferent_matrix(std::size_t k, std::size_t n, std::size_t m, Rng& rng) {
  auto u = random_matrix(k, n, rng);
  for (std::size_t j = 0; j < m; ++j) {
    const double c = rng.uniform(0.1, 1.0);
    for (std::size_t i = 0; i < k; ++i) u.set(i, j, c);
  }
  return u;
}

}  // namespace

TEST(Ucb, InitialState) {
  UcbLearner ucb(2, 2, 1024);
  EXPECT_EQ(ucb.state().warmup_pulls, 139u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(ucb.state().pull_counts[i], 0u);
    for (std::size_t n = 0; n < 2; ++n) EXPECT_EQ(ucb.state().optimistic(i, n), 1.0);
  }
  EXPECT_NEAR(ucb.state().confidence_log, std::log(2.0 * 2.0 * 1024.0 * 1024.0), 1e-12);
  EXPECT_THROW(UcbLearner(0, 2, 10), domain_error);
  EXPECT_FALSE(ucb.supports(Feedback::kFullInfo));
}

TEST(Ucb, BernsteinWidth) {
  // K = N = 2, T = 1e4: L = ln(N K T^2) = ln(4e8).
  const double l = ucb_init(2, 2, 10'000).confidence_log;
  EXPECT_NEAR(l, 19.807, 1e-3);
  const double raw = 0.5 + 4.0 * std::sqrt(0.5 * l / 100.0) + 8.0 * l / 100.0;
  EXPECT_NEAR(raw, 3.343, 1e-3);
  EXPECT_EQ(bernstein_upper(0.5, 100, l), 1.0);
  EXPECT_EQ(bernstein_upper(1.0, 1, l), 1.0);
  // Unclipped regime.
  EXPECT_NEAR(bernstein_upper(0.01, 1'000'000, 2.0), 0.01 + 4.0 * std::sqrt(0.02 / 1e6) + 16.0 / 1e6, 1e-15);
}

TEST(Ucb, WarmupSchedule) {
  const std::size_t k = 3, n = 2, horizon = 200;
  UcbLearner ucb(k, n, horizon);
  const std::size_t n0 = ucb.state().warmup_pulls;
  Rng rng(1);
  for (std::size_t t = 1; t <= k * n0; ++t) {
    const auto p = ucb.act();
    const std::size_t arm = (t + n0 - 1) / n0 - 1;
    ASSERT_EQ(p[arm], 1.0) << "round " << t;
    const std::vector<double> row{rng.uniform(), rng.uniform()};
    ucb.observe_bandit(arm, row);
  }
  for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(ucb.state().pull_counts[i], n0);
}

TEST(Ucb, OptimismNeverBelowEmpiricalMean) {
  UcbLearner ucb(2, 3, 1000);
  Rng rng(2);
  for (int t = 0; t < 3000; ++t) {
    const std::size_t arm = rng.below(2);
    std::vector<double> row(3);
    for (auto& x : row) x = rng.uniform() < 0.3 ? 1.0 : 0.0;
    ucb.observe_bandit(arm, row);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t n = 0; n < 3; ++n) {
        ASSERT_GE(ucb.state().optimistic(i, n), ucb.state().empirical_mean(i, n));
        ASSERT_LE(ucb.state().optimistic(i, n), 1.0);
      }
    }
  }
  EXPECT_EQ(ucb.state().pull_counts[0] + ucb.state().pull_counts[1], 3000u);
}

TEST(Ucb, DominantRowSelected) {
  // Small confidence log so the widths are informative after the warm-up.
  UcbLearner ucb(3, 2, 2);
  const std::size_t n0 = ucb.state().warmup_pulls;
  for (int rep = 0; rep < 50; ++rep) {
    for (std::size_t arm = 0; arm < 3; ++arm) {
      for (std::size_t s = 0; s < n0; ++s) {
        const std::vector<double> row = arm == 1 ? std::vector<double>{0.2, 0.2} : std::vector<double>{0.0, 0.0};
        ucb.observe_bandit(arm, row);
      }
    }
  }
  const auto p = ucb.act();
  EXPECT_NEAR(p[1], 1.0, 1e-8);
}

TEST(Ucb, RejectsBadRows) {
  UcbLearner ucb(2, 2, 10);
  EXPECT_THROW(ucb.observe_bandit(2, ones(2)), dimension_error);
  EXPECT_THROW(ucb.observe_bandit(0, ones(3)), dimension_error);
  EXPECT_THROW(ucb.observe_bandit(0, std::vector<double>{0.5, 1.5}), domain_error);
  EXPECT_THROW(ucb.observe_full(UtilityMatrix(2, 2)), feedback_error);
}

TEST(Ftrl, FirstRoundUniformAndMonotone) {
  const RegularizerSpec regs[] = {
      {RegularizerKind::kLogBarrier, 0.5, 0.3},
      {RegularizerKind::kTsallis, 0.5, 0.3},
      {RegularizerKind::kShannon, 1.0, 0.3},
  };
  for (const auto& reg : regs) {
    FtrlLearner ftrl(4, reg, SwfSpec::utilitarian({1.0}));
    for (double x : play(ftrl)) EXPECT_NEAR(x, 0.25, 1e-12);
    ftrl.observe_full(UtilityMatrix::from_rows({{1.0}, {0.0}, {0.0}, {0.0}}));
    EXPECT_GT(ftrl.act()[0], 0.25) << to_string(reg.kind);
  }
}

TEST(Ftrl, GradientIncrements) {
  FtrlLearner util(3, {RegularizerKind::kShannon, 1.0, 0.5}, SwfSpec::utilitarian({0.5, 0.5}));
  (void)util.act();
  util.observe_full(UtilityMatrix(3, 2, 0.0));
  for (double g : util.state().cumulative_grad) EXPECT_EQ(g, 0.0);

  FtrlLearner nash(3, {RegularizerKind::kShannon, 1.0, 0.5}, SwfSpec::nsw());
  (void)nash.act();
  nash.observe_full(UtilityMatrix(3, 2, 1.0));
  for (double g : nash.state().cumulative_grad) EXPECT_NEAR(g, 1.0, 1e-12);

  Rng rng(3);
  FtrlLearner any(3, {RegularizerKind::kLogBarrier, 0.5, 0.5}, SwfSpec::nsw());
  for (int t = 0; t < 50; ++t) {
    (void)any.act();
    any.observe_full(random_matrix(3, 4, rng));
    for (double g : any.state().cumulative_grad) ASSERT_GE(g, 0.0);
  }
  EXPECT_THROW(any.observe_full(UtilityMatrix(2, 4)), dimension_error);
  EXPECT_THROW(any.observe_bandit(0, ones(4)), feedback_error);
}

TEST(Ftrl, LogBarrierStaysInterior) {
  FtrlLearner ftrl(3, {RegularizerKind::kLogBarrier, 0.5, 1.0}, SwfSpec::nsw());
  // Arm 0 always dominates, pushing mass toward a vertex.
  const auto u = UtilityMatrix::from_rows({{1.0, 1.0}, {0.0, 0.0}, {0.0, 0.0}});
  for (int t = 0; t < 2000; ++t) {
    ASSERT_GT(ftrl.act().min_entry(), 0.0);
    ftrl.observe_full(u);
  }
}

TEST(Ftrl, StepSizes) {
  EXPECT_NEAR(log_barrier_eta(4, 1000), std::sqrt(4 * std::log(1000.0) / 1000), 1e-15);
  const auto two = tsallis_for_agents(3, 2, 100);
  EXPECT_EQ(two.kind, RegularizerKind::kShannon);
  const auto four = tsallis_for_agents(3, 4, 100);
  EXPECT_EQ(four.kind, RegularizerKind::kTsallis);
  EXPECT_DOUBLE_EQ(four.beta, 0.5);
  EXPECT_NEAR(four.eta, std::sqrt(std::pow(3.0, 0.5) / (4.0 * 100.0)), 1e-15);
}

TEST(Ewoo, Alpha) {
  EXPECT_DOUBLE_EQ(ewoo_alpha(4, 2), 1.0);
  EXPECT_DOUBLE_EQ(ewoo_alpha(3, 1), 0.5);
  EXPECT_THROW(ewoo_alpha(3, 0), domain_error);
  EXPECT_THROW(ewoo_alpha(3, 3), domain_error);
}

TEST(Ewoo, EmptyHistoryNearUniform) {
  const std::size_t s = 20'000;
  EwooLearner ewoo(3, 1.0, s, 11);
  const auto p = ewoo.act();
  for (double x : p.probs()) EXPECT_NEAR(x, 1.0 / 3.0, 3.0 / std::sqrt(static_cast<double>(s)));
  EwooLearner grid(3, 1.0, 0, 0, 0.05);
  for (double x : play(grid)) EXPECT_NEAR(x, 1.0 / 3.0, 1e-12);
}

TEST(Ewoo, ConstantWelfareKeepsUniform) {
  EwooLearner ewoo(3, 1.0, 0, 0, 0.05);
  for (int t = 0; t < 10; ++t) ewoo.observe_full(UtilityMatrix(3, 2, 1.0));
  for (double x : play(ewoo)) EXPECT_NEAR(x, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(ewoo.state().history.size(), 10u);
}

TEST(Ewoo, MatchesQuadratureForTwoArms) {
  const auto u = UtilityMatrix::from_rows({{0.9, 0.5, 0.1}, {0.2, 0.5, 0.8}});
  const double alpha = 3.0;
  // Midpoint rule on p = (x, 1 - x); the uniform density on the 2-simplex is flat in x.
  const int m = 1'000'000;
  double num = 0.0, den = 0.0;
  for (int j = 0; j < m; ++j) {
    const double x = (j + 0.5) / m;
    const double v = std::cbrt((0.9 * x + 0.2 * (1 - x)) * 0.5 * (0.1 * x + 0.8 * (1 - x)));
    const double w = std::exp(alpha * v);
    num += x * w;
    den += w;
  }
  EwooLearner ewoo(2, alpha, 20'000, 5);
  ewoo.observe_full(u);
  EXPECT_NEAR(ewoo.act()[0], num / den, 1e-2);
  EXPECT_NE(num / den, 0.5);
}

TEST(Ewoo, ExpConcavityWitness) {
  // Hessian of f = -NSW(u^T p) minus alpha g g^T on the tangent space of the simplex.
  Rng rng(12);
  const std::size_t k = 3, n = 4, m = 2;
  const double alpha = ewoo_alpha(n, m);
  double worst = std::numeric_limits<double>::infinity();
  for (int inst = 0; inst < 100; ++inst) {
    const auto u = indifferent_matrix(k, n, m, rng);
    auto f = [&](const Eigen::Vector2d& z) {
      const std::vector<double> p{z[0], z[1], 1.0 - z[0] - z[1]};
      return -nsw(u.mix(p));
    };
    for (int s = 0; s < 10; ++s) {
      const auto p = mix_with_uniform(Strategy(sample_simplex(k, rng)), 0.3);
      const Eigen::Vector2d z(p[0], p[1]);
      const double h = 1e-4;
      Eigen::Vector2d grad;
      Eigen::Matrix2d hess;
      for (int a = 0; a < 2; ++a) {
        const Eigen::Vector2d ea = Eigen::Vector2d::Unit(a) * h;
        grad[a] = (f(z + ea) - f(z - ea)) / (2 * h);
        for (int b = 0; b < 2; ++b) {
          const Eigen::Vector2d eb = Eigen::Vector2d::Unit(b) * h;
          hess(a, b) = (f(z + ea + eb) - f(z + ea - eb) - f(z - ea + eb) + f(z - ea - eb)) / (4 * h * h);
        }
      }
      const Eigen::Matrix2d w = hess - alpha * grad * grad.transpose();
      worst = std::min(worst, Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(w).eigenvalues().minCoeff());
    }
  }
  EXPECT_GE(worst, -1e-6);
}

TEST(Baselines, UniformAndFixed) {
  UniformLearner uni(4);
  for (double x : play(uni)) EXPECT_DOUBLE_EQ(x, 0.25);
  FixedLearner fixed(Strategy{0.2, 0.8});
  for (int t = 0; t < 5; ++t) {
    fixed.observe_full(UtilityMatrix(2, 1));
    EXPECT_EQ(fixed.act().vector(), (std::vector<double>{0.2, 0.8}));
  }
  EXPECT_THROW(FixedLearner(Strategy(std::vector<double>{0.5, 0.6})), domain_error);
}

TEST(Learners, DeterministicGivenObservations) {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    EwooLearner ewoo(3, 1.0, 2000, seed);
    FtrlLearner ftrl(3, {RegularizerKind::kTsallis, 0.5, 0.4}, SwfSpec::nsw());
    std::vector<double> trace;
    for (int t = 0; t < 30; ++t) {
      const auto u = random_matrix(3, 4, rng);
      for (double x : play(ewoo)) trace.push_back(x);
      for (double x : play(ftrl)) trace.push_back(x);
      ewoo.observe_full(u);
      ftrl.observe_full(u);
    }
    return trace;
  };
  EXPECT_EQ(run(4), run(4));
  EXPECT_NE(run(4), run(5));
}
