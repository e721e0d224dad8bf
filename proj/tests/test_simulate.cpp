#include "addfit/simulate.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

namespace addfit {
namespace {

TEST(Generate, NoiselessZeroComponents) {
  SimSpec s;
  s.n = 50;
  s.m1 = s.m2 = ComponentFn::Zero;
  s.noise_sd = 0.0;
  s.alpha = 1.25;
  const auto d = generate(s);
  EXPECT_TRUE((d.y().array() == 1.25).all());
}

TEST(Generate, Deterministic) {
  for (Design design : {Design{UniformDesign{}}, Design{NormalDesign{0, 1, 2, 0.5, 0.3}}}) {
    SimSpec s;
    s.design = design;
    s.seed = 99;
    const auto a = generate(s), b = generate(s);
    EXPECT_EQ(a.y(), b.y());
    EXPECT_EQ(a.u(), b.u());
    EXPECT_EQ(a.v(), b.v());
    s.seed = 100;
    EXPECT_NE(generate(s).u(), a.u());
  }
}

TEST(Generate, CenteredComponentsAndIntercept) {
  SimSpec s;
  s.n = 10000;
  s.alpha = 3.0;
  s.noise_sd = 0.0;
  s.seed = 4;
  const auto exact = generate(s);
  Vector g1 = exact.u().unaryExpr([](double x) { return std::sin(2.0 * std::numbers::pi * x); });
  Vector g2 = exact.v().unaryExpr([](double x) { return x * x * x; });
  g1.array() -= g1.mean();
  g2.array() -= g2.mean();
  EXPECT_NEAR(g1.mean(), 0.0, 1e-12);
  EXPECT_LE((exact.y() - (g1 + g2).array().matrix() - Vector::Constant(s.n, 3.0))
                .lpNorm<Eigen::Infinity>(),
            1e-12);

  s.noise_sd = 0.5;
  const auto noisy = generate(s);
  EXPECT_NEAR(noisy.y().mean(), 3.0, 3.0 * 0.5 / std::sqrt(10000.0));
  EXPECT_TRUE((noisy.u().array() >= 0.0).all() && (noisy.u().array() < 1.0).all());
}

TEST(Generate, NormalDesignCorrelation) {
  SimSpec s;
  s.n = 20000;
  s.design = NormalDesign{1.0, -2.0, 2.0, 0.5, 0.6};
  const auto d = generate(s);
  const Vector zu = (d.u().array() - d.u().mean()) / sample_sd(d.u());
  const Vector zv = (d.v().array() - d.v().mean()) / sample_sd(d.v());
  EXPECT_NEAR(zu.dot(zv) / (s.n - 1), 0.6, 0.02);
  EXPECT_NEAR(d.u().mean(), 1.0, 0.05);
  EXPECT_NEAR(sample_sd(d.v()), 0.5, 0.02);
}

TEST(Generate, Validation) {
  SimSpec s;
  s.n = 1;
  EXPECT_THROW(generate(s), std::domain_error);
  s.n = 10;
  s.noise_sd = -1;
  EXPECT_THROW(generate(s), std::domain_error);
  s.noise_sd = 0;
  s.design = NormalDesign{0, 0, 1, 1, 1.0};
  EXPECT_THROW(generate(s), std::domain_error);
  s.design = UniformDesign{1, 0, 0, 1};
  EXPECT_THROW(generate(s), std::domain_error);
}

TEST(MaxGap, Fixtures) {
  EXPECT_DOUBLE_EQ(max_gap(Vector{{0.0, 1.0, 2.0, 3.0}}), 1.0);
  EXPECT_DOUBLE_EQ(max_gap(Vector{{0.0, 0.0, 5.0}}), 5.0);
  EXPECT_DOUBLE_EQ(max_gap(Vector{{4.0, 4.0}}), 0.0);
  EXPECT_THROW(max_gap(Vector{{1.0}}), std::invalid_argument);
}

TEST(MaxGap, MatchesPairwiseOracle) {
  std::mt19937_64 rng(1000);
  const Vector x = testing::random_vector(rng, 1000);
  EXPECT_EQ(max_gap(x), testing::max_gap_oracle(x));
}

TEST(GapBound, Values) {
  EXPECT_EQ(gap_exceedance_bound(100, 1.0).exact, 0.0);
  EXPECT_EQ(gap_exceedance_bound(100, 1.5).exact, 0.0);
  EXPECT_NEAR(gap_exceedance_bound(100, 1e-12).exact, 100.0, 1e-6);
  EXPECT_NEAR(gap_exceedance_bound(100, 0.1).exact, 0.0029512665430652825, 1e-15);
  EXPECT_NEAR(gap_exceedance_bound(100, 0.1).exponential, 100.0 * std::exp(-99.0 * 0.05), 1e-12);
  EXPECT_THROW(gap_exceedance_bound(1, 0.1), std::domain_error);
  EXPECT_THROW(gap_exceedance_bound(10, 0.0), std::domain_error);
}

TEST(GapBound, Monotone) {
  for (long long n : {5LL, 50LL, 500LL}) {
    double prev = INFINITY;
    for (double h = 0.01; h < 1.0; h += 0.01) {
      const auto b = gap_exceedance_bound(n, h);
      EXPECT_LE(b.exact, prev);
      EXPECT_LE(b.exact, b.exponential * (1 + 1e-12));
      prev = b.exact;
    }
  }
  double prev = INFINITY;
  for (long long n = 100; n <= 2000; n += 100) {
    const double b = gap_exceedance_bound(n, 0.1).exact;
    EXPECT_LT(b, prev);
    prev = b;
  }
}

TEST(GapBound, EmpiricalFrequencyBelowBound) {
  for (auto [n, h] : {std::pair{100, 0.1}, std::pair{50, 0.12}, std::pair{20, 0.3}}) {
    const auto e = empirical_gap_exceedance(n, h, 20000, 77);
    const double bound = gap_exceedance_bound(n, h).exact;
    EXPECT_LE(e.frequency, bound + 3.0 * e.std_error) << n << " " << h;
  }
}

TEST(MonteCarlo, HugeUniformBandwidthAlwaysPasses) {
  SimSpec s;
  s.n = 30;
  const BandwidthRule rule{5.0, 0.0, 0.0, false};
  const auto r = run_monte_carlo(s, rule, rule, {KernelShape::Uniform}, 20);
  EXPECT_EQ(r.fraction_gap_ok, 1.0);
  ASSERT_TRUE(r.fraction_certified);
  EXPECT_EQ(*r.fraction_certified, 1.0);
  ASSERT_TRUE(r.analytic_bound);
  EXPECT_EQ(*r.analytic_bound, 0.0);
}

TEST(MonteCarlo, SmallBandwidthMixedOutcome) {
  SimSpec s;
  s.n = 50;
  MonteCarloOptions opt;
  opt.certify = false;
  // 0.5 log(n) / n sits below the typical max spacing (about log(n) / n), so
  // both coordinates pass together with probability around 1e-6.
  const BandwidthRule half{0.5, 1.0, 1.0, false};
  EXPECT_NEAR(half.base(50), 0.03912023005428146, 1e-15);
  EXPECT_LE(run_monte_carlo(s, half, half, {KernelShape::Uniform}, 400, opt).fraction_gap_ok,
            0.01);
  const BandwidthRule one{1.0, 1.0, 1.0, false};
  const auto r = run_monte_carlo(s, one, one, {KernelShape::Uniform}, 400, opt);
  EXPECT_GT(r.fraction_gap_ok, 0.0);
  EXPECT_LT(r.fraction_gap_ok, 1.0);
  EXPECT_FALSE(r.fraction_certified);
}

TEST(MonteCarlo, CertifiedDominatesGapCondition) {
  SimSpec s;
  s.n = 40;
  const BandwidthRule rule{0.12, 0.0, 0.0, false};
  const auto r = run_monte_carlo(s, rule, rule, {KernelShape::Epanechnikov}, 60);
  ASSERT_TRUE(r.fraction_certified);
  EXPECT_GE(*r.fraction_certified, r.fraction_gap_ok);
  for (const auto& row : r.rows)
    if (row.gap_ok) EXPECT_TRUE(row.certified());
}

TEST(MonteCarlo, ReplicatesAreIndependentOfThreading) {
  SimSpec s;
  s.n = 30;
  s.seed = 5;
  const BandwidthRule rule{1.0, 0.2, 0.0, true};
  MonteCarloOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = run_monte_carlo(s, rule, rule, {}, 12, one);
  const auto b = run_monte_carlo(s, rule, rule, {}, 12, four);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].max_gap_u, b.rows[i].max_gap_u);
    EXPECT_EQ(a.rows[i].rho_product, b.rows[i].rho_product);
  }
  // a replicate can be regenerated on its own
  SimSpec single = s;
  single.seed = replicate_seed(s.seed, 7);
  EXPECT_EQ(max_gap(generate(single).u()), a.rows[7].max_gap_u);
  EXPECT_FALSE(a.analytic_bound);  // sd-scaled rule
}

TEST(OrDensityRatio, IndependentIsZero) {
  EXPECT_EQ(or_density_ratio(NormalDesign{}, Grid{-4, 4, -4, 4, 0.05}), 0.0);
}

TEST(OrDensityRatio, CorrelatedExceedsOne) {
  const double sup = or_density_ratio(NormalDesign{0, 0, 1, 1, 0.5}, Grid{-4, 4, -4, 4, 0.01});
  // corner (4, 4): exp((32 - 21.333...)/2) / sqrt(0.75) - 1
  const double corner = std::exp(0.5 * (32.0 - 16.0 / 0.75)) / std::sqrt(0.75) - 1.0;
  EXPECT_GT(sup, 1.0);
  EXPECT_NEAR(sup, corner, 1e-9 * corner);
}

TEST(OrDensityRatio, Validation) {
  EXPECT_THROW(or_density_ratio(NormalDesign{0, 0, 1, 1, -1.0}, Grid{}), std::domain_error);
  EXPECT_THROW(or_density_ratio(NormalDesign{}, Grid{0, 1, 0, 1, 0.0}), std::domain_error);
}

}  // namespace
}  // namespace addfit
