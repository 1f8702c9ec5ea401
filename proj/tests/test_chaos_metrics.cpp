#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace mfchaos;

namespace {

EntropyEstimate est(double h, double se = 0.0) {
  EntropyEstimate e;
  e.h_hat = h;
  e.std_err = se;
  e.n_replications = 100;
  return e;
}

std::vector<double> normals(std::uint64_t seed, std::size_t n, double shift) {
  CounterStream s = RngPlan(seed).stream(0, 0, StreamPurpose::kAuxiliary);
  std::vector<double> v(n);
  for (double& x : v) x = shift + s.normal();
  return v;
}

}  // namespace

TEST(Pinsker, Examples) {
  EXPECT_EQ(tv_bound_pinsker(est(0.0), 1, 10).value, 0.0);
  EXPECT_NEAR(tv_bound_pinsker(est(0.02), 10, 10).value, 0.2, 1e-15);
  EXPECT_NEAR(tv_bound_pinsker(est(0.08), 1, 16).value, 0.1, 1e-15);
  const TvBound big = tv_bound_pinsker(est(10.0), 4, 4);
  EXPECT_EQ(big.value, 1.0);
  EXPECT_GT(big.raw, 1.0);
}

TEST(Pinsker, Monotone) {
  double prev = 0.0;
  for (std::size_t k = 1; k <= 64; ++k) {
    const double b = tv_bound_pinsker(est(0.2), k, 64).value;
    EXPECT_GE(b, prev);
    prev = b;
  }
  prev = 1.0;
  for (std::size_t n = 8; n <= 4096; n *= 2) {
    const double b = tv_bound_pinsker(est(0.2), 8, n).value;
    EXPECT_LE(b, prev);
    prev = b;
  }
  EXPECT_LE(tv_bound_pinsker(est(0.1), 1, 16).value, tv_bound_pinsker(est(0.2), 1, 16).value);
}

TEST(Pinsker, StandardErrorByDeltaMethod) {
  // d/dh sqrt(a h) = a / (2 sqrt(a h))
  const TvBound b = tv_bound_pinsker(est(0.2, 0.01), 1, 10);
  EXPECT_NEAR(b.std_err, 0.2 * 0.01 / (2.0 * std::sqrt(0.04)), 1e-15);
}

TEST(Pinsker, RejectsBadInput) {
  EXPECT_THROW(tv_bound_pinsker(est(0.1), 0, 10), ConfigError);
  EXPECT_THROW(tv_bound_pinsker(est(0.1), 11, 10), ConfigError);
  EXPECT_THROW(tv_bound_pinsker(est(-0.1, 0.01), 1, 10), ConfigError);
  EXPECT_NO_THROW(tv_bound_pinsker(est(-0.01, 0.01), 1, 10));
}

TEST(TheoremBound, Examples) {
  EXPECT_NEAR(tv_bound_theorem(0.0, 1.0, 1, 100, 2.0).raw, 0.2, 1e-15);
  const TvBound b = tv_bound_theorem(2.0, 1.0, 1, 100, 380.4);
  EXPECT_NEAR(b.raw, 114.12, 1e-9);
  EXPECT_EQ(b.value, 1.0);
  EXPECT_NEAR(tv_bound_theorem(2.0, 1.0, 50, 50, 0.1).raw, 0.3, 1e-15);
}

TEST(HistogramTv, IdenticalSamplesGiveZero) {
  const auto a = normals(1, 5000, 0.0);
  EXPECT_EQ(tv_histogram(a, a), 0.0);
  std::vector<double> pairs = normals(2, 4000, 0.0);
  EXPECT_EQ(tv_histogram_2d(pairs, pairs), 0.0);
  const TimeGrid g(0.0, 1.0, 10);
  const ModelSpec s = make_bounded_kernel_spec(tanh_kernel_model());
  const PathEnsemble e = simulate_interacting(s, 200, g, gaussian_init(), RngPlan(3));
  EXPECT_EQ(tv_direct_marginal(e, e, 1.0, {0}), 0.0);
}

TEST(HistogramTv, DisjointSupportsGiveOne) {
  std::vector<double> a;
  std::vector<double> b;
  for (int i = 0; i < 200; ++i) {
    a.push_back(0.001 * i);
    b.push_back(10.0 + 0.001 * i);
  }
  EXPECT_NEAR(tv_histogram(a, b), 1.0, 1e-15);
  // Four points each: the automatic width spans the pooled range, fixed bins separate them.
  const std::vector<double> c{0.0, 0.1, 0.2, 0.3};
  const std::vector<double> d{10.0, 10.1, 10.2, 10.3};
  EXPECT_EQ(tv_histogram(c, d), 0.0);
  EXPECT_NEAR(tv_histogram(c, d, 2), 1.0, 1e-15);
}

TEST(HistogramTv, GaussianShiftOracle) {
  const auto a = normals(4, 1000000, 0.0);
  const auto b = normals(5, 1000000, 0.1);
  const double exact = std::erf(0.1 / (2.0 * std::sqrt(2.0)));  // 2 Phi(0.05) - 1
  EXPECT_NEAR(exact, 0.0399, 1e-4);
  EXPECT_NEAR(tv_histogram(a, b), exact, 0.01);
}

TEST(HistogramTv, AlwaysInUnitInterval) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = normals(seed, 50 + seed * 10, 0.0);
    const auto b = normals(seed + 100, 30 + seed, 0.5 * seed);
    const double t = tv_histogram(a, b);
    EXPECT_GE(t, 0.0);
    EXPECT_LE(t, 1.0);
    const double t2 = tv_histogram(a, b, 7);
    EXPECT_GE(t2, 0.0);
    EXPECT_LE(t2, 1.0);
  }
}

TEST(HistogramTv, RejectsBadInput) {
  const std::vector<double> a{1.0, 2.0};
  const std::vector<double> none;
  EXPECT_THROW(tv_histogram(a, none), ConfigError);
  const std::vector<double> odd{1.0, 2.0, 3.0};
  EXPECT_THROW(tv_histogram_2d(odd, odd), ConfigError);
  const TimeGrid g(0.0, 1.0, 4);
  const PathEnsemble e(3, 1, g);
  EXPECT_THROW(tv_direct_marginal(e, e, 1.0, {1}), ConfigError);
  EXPECT_THROW(tv_direct_marginal(e, e, 1.0, {}), ConfigError);
  const PathEnsemble f(3, 2, g);
  EXPECT_THROW(tv_direct_marginal(e, f, 1.0, {0}), ConfigError);
}

TEST(RateFit, ExactPowerLaws) {
  for (double slope : {-0.5, -1.0, 0.25}) {
    std::vector<std::pair<double, double>> pts;
    for (double n : {32.0, 64.0, 128.0, 256.0, 512.0}) pts.emplace_back(n, 3.0 * std::pow(n, slope));
    const RateFit f = fit_rate(pts);
    EXPECT_NEAR(f.slope, slope, 1e-12);
    EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-10);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
    EXPECT_NEAR(f.ci_low, slope, 1e-6);
    EXPECT_NEAR(f.ci_high, slope, 1e-6);
  }
}

TEST(RateFit, NoisyFitHasInterval) {
  const std::vector<std::pair<double, double>> pts{{32, 0.11}, {64, 0.072}, {128, 0.056}, {256, 0.038}, {512, 0.028}};
  const RateFit f = fit_rate(pts);
  EXPECT_LT(f.ci_low, f.slope);
  EXPECT_GT(f.ci_high, f.slope);
  EXPECT_GT(f.slope_se, 0.0);
  EXPECT_LT(f.r_squared, 1.0);
}

TEST(RateFit, DegenerateAndShortSeries) {
  EXPECT_THROW(fit_rate({{32, 0.0}, {64, 0.0}, {128, 0.0}, {256, 0.0}}), DegenerateSeries);
  EXPECT_THROW(fit_rate({{32, 1.0}, {64, 0.5}, {128, 0.25}}), ConfigError);
  EXPECT_THROW(fit_rate({{32, 1.0}, {64, 0.0}, {128, 0.25}, {256, 0.1}}), ConfigError);
  try {
    fit_rate({{32, 0.0}, {64, 0.0}, {128, 0.0}, {256, 0.0}});
  } catch (const DegenerateSeries& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate"), std::string::npos);
  }
}
