#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace mfchaos;

namespace {

const MomentRow& row(const MomentReport& r, const std::string& prefix, double order) {
  for (const auto& x : r.rows) {
    if (x.check.rfind(prefix, 0) == 0 && x.order == order) return x;
  }
  throw std::runtime_error("no row " + prefix);
}

// E[(sum of n Rademacher)^4] counted by pairings: n + 3 n (n - 1).
double rademacher_fourth(double n) { return n + 3.0 * n * (n - 1.0); }

}  // namespace

TEST(ConditionC, BoundArithmetic) {
  EXPECT_NEAR(condition_c_bound(1, 2.0, 0.1, 100), 0.002, 1e-15);
  EXPECT_NEAR(condition_c_bound(2, 2.0, 0.1, 100), 8e-6, 1e-18);
  EXPECT_NEAR(condition_c_bound(3, 2.0, 0.1, 100), 6.0 * 8e-9, 1e-20);
}

TEST(ConditionC, RowPassRule) {
  EXPECT_TRUE(make_row("x", 1, 1.0, 0.0, 1.0).pass);
  EXPECT_TRUE(make_row("x", 1, 1.3, 0.1, 1.0).pass);
  EXPECT_FALSE(make_row("x", 1, 1.31, 0.1, 1.0).pass);
}

TEST(ConditionC, ZeroKernelMomentsVanish) {
  const ModelSpec s = make_bounded_kernel_spec(zero_kernel_model(1));
  const TimeGrid g(0.0, 0.3, 60);
  PicardOptions po;
  po.warn = nullptr;
  const ReferenceLaw law = build_reference_law(s, 1000, 1, g, gaussian_init(), RngPlan(1), po);
  const LawDrift ld(s, law, g);
  ReplicationOptions o;
  o.n_replications = 50;
  const MomentReport r = condition_c_study(s, ld, 50, 0.2, 0.1, 2.0, {1, 2, 3}, gaussian_init(), RngPlan(2), o);
  ASSERT_EQ(r.rows.size(), 3U);
  for (const auto& x : r.rows) EXPECT_EQ(x.empirical, 0.0);
  EXPECT_TRUE(r.all_pass());
}

TEST(ConditionC, TanhModelFirstMomentBelowBound) {
  const ModelSpec s = make_bounded_kernel_spec(tanh_kernel_model(1, 1.0, 1.0));
  const TimeGrid g(0.0, 0.3, 60);
  PicardOptions po;
  po.warn = nullptr;
  const ReferenceLaw law = build_reference_law(s, 4000, 2, g, gaussian_init(), RngPlan(3), po);
  const LawDrift ld(s, law, g);
  ReplicationOptions o;
  o.n_replications = 2000;
  const MomentReport r = condition_c_study(s, ld, 100, 0.2, 0.1, beta_of(s), {1, 2}, gaussian_init(), RngPlan(4), o);
  EXPECT_TRUE(r.all_pass());
  EXPECT_LE(row(r, "", 1).empirical, 0.002);
  EXPECT_EQ(r.metadata.at("N"), 100.0);
}

TEST(ConditionC, RejectsBadOrder) {
  EXPECT_THROW(check_condition_c({{1.0}}, 2.0, 0.2, 0.1, 1, {0}), ConfigError);
}

TEST(Subgaussian, ExactMoments) {
  EXPECT_NEAR(exact_sum_moment(rademacher_sampler(), 100, 2), 100.0, 1e-9);
  EXPECT_NEAR(exact_sum_moment(rademacher_sampler(), 100, 4), rademacher_fourth(100), 1e-6);
  EXPECT_NEAR(rademacher_fourth(100), 29800.0, 0.0);
  EXPECT_NEAR(exact_sum_moment(uniform_sampler(), 50, 2), 50.0 / 3.0, 1e-12);
  EXPECT_EQ(exact_sum_moment(rademacher_sampler(), 7, 3), 0.0);
  EXPECT_DOUBLE_EQ(subgaussian_bound(1, 100, 1.0), 200.0);
  EXPECT_DOUBLE_EQ(subgaussian_bound(2, 100, 1.0), 80000.0);
  EXPECT_DOUBLE_EQ(subgaussian_bound(1, 50, 1.0), 100.0);
}

TEST(Subgaussian, UniformFourthMomentByPairing) {
  // E[(sum U)^4] = n E[U^4] + 3 n (n-1) E[U^2]^2 for centred iid U.
  const double n = 10.0;
  const double want = n / 5.0 + 3.0 * n * (n - 1.0) / 9.0;
  EXPECT_NEAR(exact_sum_moment(uniform_sampler(), 10, 4), want, 1e-10);
}

TEST(Subgaussian, MonteCarloPasses) {
  const MomentReport r = check_subgaussian_moments(rademacher_sampler(), 100, {1, 2, 3}, 20000, RngPlan(5));
  EXPECT_TRUE(r.all_pass());
  EXPECT_NEAR(row(r, "subgaussian/", 1).empirical, 100.0, 4.0 * row(r, "subgaussian/", 1).std_err);
  EXPECT_EQ(row(r, "subgaussian-exact/", 2).empirical, exact_sum_moment(rademacher_sampler(), 100, 4));
}

TEST(BoundedDifference, MeanCoefficients) {
  const BoundedDifferenceSpec s = mean_of(rademacher_sampler(), 100);
  EXPECT_NEAR(s.coefficients[0], 0.02, 1e-15);
  EXPECT_NEAR(s.nu(), 0.01, 1e-15);
  EXPECT_NEAR(bounded_difference_tail(0.3, s.nu()), std::exp(-4.5), 1e-15);
  EXPECT_NEAR(bounded_difference_tail(0.3, s.nu()), 0.0111, 1e-4);
  EXPECT_NEAR(bounded_difference_moment(1, s.nu()), 0.04, 1e-15);
}

TEST(BoundedDifference, RademacherMeanTails) {
  const MomentReport r =
      check_bounded_difference(mean_of(rademacher_sampler(), 100), {0.1, 0.2, 0.3}, {1, 2}, 20000, RngPlan(6));
  EXPECT_TRUE(r.all_pass());
  // Var of the mean is 1/n.
  EXPECT_NEAR(row(r, "bounded-difference-moment", 1).empirical, 0.01, 4.0 * row(r, "bounded-difference-moment", 1).std_err);
}

TEST(CarlenKree, BrownianCases) {
  const MartingaleSpec w{"W", [](double, double) { return 1.0; }, 1.0, 10};
  const MomentReport r = check_carlen_kree(w, {2, 4}, 40000, RngPlan(7));
  EXPECT_TRUE(r.all_pass());
  EXPECT_NEAR(row(r, "", 2).empirical, 1.0, 4.0 * row(r, "", 2).std_err);
  EXPECT_NEAR(row(r, "", 4).empirical, std::pow(3.0, 0.25), 4.0 * row(r, "", 4).std_err);
  EXPECT_NEAR(row(r, "", 2).bound, 2.0 * std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(row(r, "", 4).bound, 4.0);
}

TEST(CarlenKree, ZeroIntegrand) {
  const MartingaleSpec z{"zero", [](double, double) { return 0.0; }, 1.0, 10};
  const MomentReport r = check_carlen_kree(z, {2, 4, 8}, 100, RngPlan(8));
  for (const auto& x : r.rows) {
    EXPECT_EQ(x.empirical, 0.0);
    EXPECT_EQ(x.bound, 0.0);
  }
  EXPECT_TRUE(r.all_pass());
}

TEST(CarlenKree, BoundedIntegrand) {
  const MartingaleSpec t{"tanh(W)", [](double, double w) { return std::tanh(w); }, 1.0, 100};
  EXPECT_TRUE(check_carlen_kree(t, {2, 4, 8}, 20000, RngPlan(9)).all_pass());
}

TEST(ExpMartingale, BoundArithmetic) {
  EXPECT_NEAR(exp_martingale_bound(2.0, 1.0 / 64.0, 2.0), 1.0 + std::exp(4.0) + 4.0, 1e-12);
  EXPECT_NEAR(exp_martingale_bound(2.0, 1.0 / 64.0, 2.0), 59.598, 1e-3);
  EXPECT_NEAR(exp_martingale_bound(2.0, 0.01, 2.0), 1.0 + std::exp(4.0) + 2.0 / 0.68, 1e-12);
  EXPECT_NEAR(exp_martingale_bound(2.0, 0.01, 2.0), 58.539, 1e-3);
  EXPECT_DOUBLE_EQ(exp_martingale_threshold(2.0, 2.0), 0.03125);
}

TEST(ExpMartingale, ThresholdRejection) {
  try {
    exp_martingale_bound(2.0, 0.1, 2.0);
    FAIL() << "expected rejection";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("0.03125"), std::string::npos) << e.what();
  }
  EXPECT_THROW(exp_martingale_bound(2.0, 0.03125, 2.0), ConfigError);
}

TEST(ExpMartingale, ZeroDeviationRatioIsOne) {
  const ModelSpec s = make_bounded_kernel_spec(zero_kernel_model(1));
  const TimeGrid g(0.0, 0.3, 60);
  const ReferenceLaw law = testutil::point_law(1, g);
  const LawDrift ld(s, law, g);
  ReplicationOptions o;
  o.n_replications = 20;
  const MomentReport r = check_exp_martingale_moment(s, ld, 10, 0.2, 0.01, 2.0, 2.0, gaussian_init(), RngPlan(1), o);
  EXPECT_EQ(r.rows.at(0).empirical, 1.0);
  EXPECT_EQ(r.rows.at(0).std_err, 0.0);
  EXPECT_TRUE(r.all_pass());
}

TEST(TheoremConstant, HandValue) {
  const double want = 2.0 * (1.0 + std::exp(4.0) + 2.0) * std::pow(6.0, 2.0 / 3.0);
  EXPECT_NEAR(theorem_constant(2.0, 8.0), want, 1e-9);
  EXPECT_NEAR(theorem_constant(2.0, 8.0), 380.4, 0.1);
}

TEST(TheoremConstant, DivergesAsPDecreasesToOne) {
  double prev = theorem_constant(1.5, 1.0);
  for (double p : {1.2, 1.1, 1.01, 1.001}) {
    const double c = theorem_constant(p, 1.0);
    EXPECT_GT(c, prev);
    prev = c;
  }
  EXPECT_THROW(theorem_constant(1.0, 1.0), ConfigError);
  EXPECT_THROW(theorem_constant(2.0, 0.0), ConfigError);
}

TEST(TheoremConstant, MonotoneInEpsAndGridMinimum) {
  for (double p : {1.2, 2.0, 3.0}) {
    double prev = theorem_constant(p, 1e-2);
    for (double e = 1e-1; e <= 1e4; e *= 10.0) {
      const double c = theorem_constant(p, e);
      EXPECT_LT(c, prev);
      prev = c;
    }
  }
  const ConstantMinimum m = minimize_theorem_constant();
  EXPECT_FALSE(m.p_grid.empty());
  EXPECT_FALSE(m.eps_grid.empty());
  EXPECT_DOUBLE_EQ(m.value, theorem_constant(m.p, m.eps));
  for (double p : m.p_grid) EXPECT_GE(theorem_constant(p, m.eps_grid.back()), m.value);
}
