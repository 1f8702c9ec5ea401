#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "test_util.hpp"

using namespace mfchaos;

namespace {

ModelSpec unit_noise(std::size_t d) {
  ModelSpec s;
  s.id = "noise";
  s.state_dim = d;
  s.noise_dim = d;
  s.diffusion = [d](double, const PathView&, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t c = 0; c < d; ++c) out[c * d + c] = 1.0;
  };
  return s;
}

// B(t, x, mu) = mean of mu at t.
ModelSpec mean_field() {
  ModelSpec s = unit_noise(1);
  s.id = "mean";
  s.measure_drift = [](double, const PathView&, const MeasureView& mu, std::span<double> out) {
    double a = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) a += mu.atom_state(j)[0];
    out[0] = a / static_cast<double>(mu.size());
  };
  return s;
}

}  // namespace

TEST(TimeGrid, PointsAndValidation) {
  const TimeGrid g(0.0, 1.0, 4);
  EXPECT_DOUBLE_EQ(g.step(), 0.25);
  EXPECT_DOUBLE_EQ(g.time(2), 0.5);
  EXPECT_EQ(g.time(4), 1.0);
  EXPECT_EQ(g.index_of(0.75), 3U);
  EXPECT_THROW(TimeGrid(1.0, 1.0, 4), ConfigError);
  EXPECT_THROW(TimeGrid(0.0, 1.0, 0), ConfigError);
  EXPECT_THROW(TimeGrid(-0.1, 1.0, 2), ConfigError);
  EXPECT_THROW((void)g.index_of(0.3), ConfigError);
}

TEST(TimeGrid, WindowClipsAtHorizon) {
  const TimeGrid g(0.0, 1.0, 100);
  const StepWindow w = window_for(g, 0.95, 0.1);
  EXPECT_EQ(w.first, 95U);
  EXPECT_EQ(w.last, 100U);
  EXPECT_THROW(window_for(g, 1.0, 0.1), ConfigError);
  EXPECT_THROW(window_for(g, 0.2, 0.0), ConfigError);
}

TEST(PathEnsemble, BinaryAndCsvRoundTrip) {
  const TimeGrid g(0.0, 0.5, 3);
  PathEnsemble e(2, 2, g);
  std::iota(e.values().begin(), e.values().end(), 0.25);
  std::stringstream ss;
  write_binary(ss, e);
  EXPECT_EQ(read_binary(ss), e);
  std::stringstream bad("NOTMAGIC");
  EXPECT_THROW(read_binary(bad), ConfigError);
  std::ostringstream csv;
  write_csv(csv, e);
  EXPECT_EQ(csv.str().substr(0, 18), "path,step,t,x0,x1\n");
}

TEST(EulerStep, PureNoise) {
  const TimeGrid g(0.0, 1.0, 10);
  PathEnsemble p(1, 2, g);
  const std::vector<double> dw{0.3, -0.1};
  euler_step(p, 0, unit_noise(2), MeasureView(p, 0), dw);
  EXPECT_DOUBLE_EQ(p.at(0, 1, 0), 0.3);
  EXPECT_DOUBLE_EQ(p.at(0, 1, 1), -0.1);
}

TEST(EulerStep, DeterministicDrift) {
  ModelSpec s;
  s.drift = [](double, const PathView&, std::span<double> out) { out[0] = 1.0; };
  s.diffusion = [](double, const PathView&, std::span<double> out) { out[0] = 0.0; };
  const TimeGrid g(0.0, 1.0, 2);
  PathEnsemble p(1, 1, g);
  p.at(0, 0, 0) = 2.0;
  const std::vector<double> dw{0.7};
  euler_step(p, 0, s, MeasureView(p, 0), dw);
  EXPECT_DOUBLE_EQ(p.at(0, 1, 0), 2.5);
}

TEST(EulerStep, TwoParticleMean) {
  const TimeGrid g(0.0, 1.0, 10);
  PathEnsemble p(2, 1, g);
  p.at(0, 0, 0) = 1.0;
  p.at(1, 0, 0) = 3.0;
  const std::vector<double> dw{0.0, 0.0};
  const auto b = euler_step(p, 0, mean_field(), MeasureView(p, 0), dw);
  EXPECT_DOUBLE_EQ(b[0], 2.0);
  EXPECT_NEAR(p.at(0, 1, 0), 1.2, 1e-15);
  EXPECT_NEAR(p.at(1, 1, 0), 3.2, 1e-15);
}

TEST(EulerStep, NonFiniteAborts) {
  ModelSpec s = unit_noise(1);
  s.drift = [](double, const PathView&, std::span<double> out) { out[0] = std::nan(""); };
  const TimeGrid g(0.0, 1.0, 2);
  PathEnsemble p(1, 1, g);
  const std::vector<double> dw{0.0};
  EXPECT_THROW(euler_step(p, 0, s, MeasureView(p, 0), dw), SimulationError);
  EXPECT_THROW(euler_step(p, 2, s, MeasureView(p, 0), dw), ConfigError);
}

TEST(Simulate, ZeroInteractionMatchesIndependent) {
  const ModelSpec s = make_bounded_kernel_spec(zero_kernel_model(2));
  const TimeGrid g(0.0, 1.0, 50);
  const RngPlan rng(7);
  const PathEnsemble a = simulate_interacting(s, 16, g, gaussian_init(), rng);
  const ReferenceLaw law = testutil::point_law(2, g);
  const PathEnsemble b = simulate_independent(s, 16, law, g, gaussian_init(), rng);
  EXPECT_EQ(a, b);
}

TEST(Simulate, SingleParticleSeesItself) {
  // N = 1 with B = mean of mu: dX = X dt + dW.
  const ModelSpec s = mean_field();
  const TimeGrid g(0.0, 1.0, 20);
  const RngPlan rng(3);
  const PathEnsemble p = simulate_interacting(s, 1, g, point_init({1.0}), rng);
  double x = 1.0;
  std::vector<double> dw(1);
  for (std::size_t k = 0; k < g.n_steps(); ++k) {
    rng.increments(0, 0, k, g.step(), dw);
    x = x + (x * g.step() + dw[0]);
    EXPECT_DOUBLE_EQ(p.at(0, k + 1, 0), x);
  }
}

TEST(Simulate, TwoParticleLinearMeanVariance) {
  // b(x, y) = y - x: the drifts cancel in the pair mean, which is (W1 + W2)/2, Var = T/2.
  const ModelSpec s = make_kernel_spec(linear_kernel_model(1, 1.0, 1.0));
  const TimeGrid g(0.0, 1.0, 20);
  const RngPlan rng(11);
  const std::size_t reps = 20000;
  std::vector<double> means(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    SimulationOptions o;
    o.replication = r;
    const PathEnsemble p = simulate_interacting(s, 2, g, point_init({0.0}), rng, o);
    means[r] = 0.5 * (p.at(0, 20, 0) + p.at(1, 20, 0));
  }
  const double v = testutil::sample_var(means);
  const double se = 0.5 * std::sqrt(2.0 / (reps - 1.0));
  EXPECT_NEAR(v, 0.5, 3.0 * se);
}

TEST(Simulate, IncrementVariance) {
  const ModelSpec s = unit_noise(1);
  const TimeGrid g(0.0, 1.0, 100);
  const PathEnsemble p = simulate_interacting(s, 1000, g, point_init({0.0}), RngPlan(5));
  std::vector<double> inc;
  for (std::size_t i = 0; i < p.n_paths(); ++i) {
    for (std::size_t k = 0; k < g.n_steps(); ++k) inc.push_back(p.at(i, k + 1, 0) - p.at(i, k, 0));
  }
  ASSERT_GE(inc.size(), 100000U);
  const double h = g.step();
  const double se = h * std::sqrt(2.0 / (inc.size() - 1.0));
  EXPECT_LE(std::abs(testutil::sample_var(inc) - h), 5.0 * se);
}

TEST(Simulate, DeterministicAcrossWorkers) {
  const ModelSpec s = make_bounded_kernel_spec(tanh_kernel_model());
  const TimeGrid g(0.0, 1.0, 40);
  const RngPlan rng(99);
  SimulationOptions one;
  const PathEnsemble a = simulate_interacting(s, 37, g, gaussian_init(), rng, one);
  for (std::size_t w : {2U, 4U, 8U}) {
    SimulationOptions many;
    many.executor = Executor(w);
    EXPECT_EQ(simulate_interacting(s, 37, g, gaussian_init(), rng, many), a) << w;
  }
  const ReferenceLaw law = ReferenceLaw::from_ensemble(a);
  const PathEnsemble b = simulate_independent(s, 37, law, g, gaussian_init(), rng, one);
  SimulationOptions eight;
  eight.executor = Executor(8);
  EXPECT_EQ(simulate_independent(s, 37, law, g, gaussian_init(), rng, eight), b);
}

TEST(Simulate, ExchangeableUnderStreamPermutation) {
  const ModelSpec s = make_bounded_kernel_spec(tanh_kernel_model());
  const TimeGrid g(0.0, 1.0, 30);
  const RngPlan rng(21);
  const std::size_t n = 12;
  const PathEnsemble a = simulate_interacting(s, n, g, gaussian_init(), rng);
  SimulationOptions o;
  for (std::size_t i = 0; i < n; ++i) o.stream_ids.push_back((i * 5 + 3) % n);
  const PathEnsemble b = simulate_interacting(s, n, g, gaussian_init(), rng, o);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k <= g.n_steps(); ++k) {
      EXPECT_NEAR(b.at(i, k, 0), a.at(o.stream_ids[i], k, 0), 1e-12);
    }
  }
}

TEST(Simulate, CenteredPointLawIsDriftless) {
  // B(t, x, mu) = int y_t mu(dy) against the zero path contributes nothing.
  const ModelSpec s = mean_field();
  const TimeGrid g(0.0, 1.0, 25);
  const RngPlan rng(4);
  const PathEnsemble a = simulate_independent(s, 5, testutil::point_law(1, g), g, gaussian_init(), rng);
  const PathEnsemble b = simulate_interacting(unit_noise(1), 5, g, gaussian_init(), rng);
  EXPECT_EQ(a, b);
}

TEST(Simulate, GridMismatchRejected) {
  const ModelSpec s = make_bounded_kernel_spec(tanh_kernel_model());
  const ReferenceLaw law = testutil::point_law(1, TimeGrid(0.0, 1.0, 10));
  EXPECT_THROW(simulate_independent(s, 3, law, TimeGrid(0.0, 1.0, 15), gaussian_init(), RngPlan(1)), ConfigError);
  EXPECT_THROW(simulate_independent(s, 3, law, TimeGrid(0.0, 2.0, 20), gaussian_init(), RngPlan(1)), ConfigError);
  // A coarser grid whose points are law points is accepted.
  EXPECT_NO_THROW(simulate_independent(s, 3, law, TimeGrid(0.0, 1.0, 5), gaussian_init(), RngPlan(1)));
}

TEST(Simulate, MarginalMeanMatchesReference) {
  const ModelSpec s = make_bounded_kernel_spec(tanh_kernel_model());
  const TimeGrid g(0.0, 1.0, 100);
  PicardOptions po;
  po.warn = nullptr;
  const InitSampler init = gaussian_init(0.5, 1.0);
  const ReferenceLaw law = build_reference_law(s, 10000, 3, g, init, RngPlan(1).substream(1), po);
  const PathEnsemble out = simulate_independent(s, 10000, law, g, init, RngPlan(1).substream(2));
  for (std::size_t k : {25U, 50U, 75U, 100U}) {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < 10000; ++i) {
      a.push_back(out.at(i, k, 0));
      b.push_back(law.ensemble().at(i, k, 0));
    }
    const MeanSe ma = mean_se(a);
    const MeanSe mb = mean_se(b);
    EXPECT_LE(std::abs(ma.mean - mb.mean), 3.0 * std::hypot(ma.se, mb.se)) << k;
  }
}

TEST(Rng, StreamsAreKeyedAndReproducible) {
  const RngPlan p(42);
  std::vector<double> a(3), b(3), c(3);
  p.increments(1, 2, 5, 0.01, a);
  p.increments(1, 2, 5, 0.01, b);
  p.increments(1, 3, 5, 0.01, c);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_NE(p.substream(1).stream(0, 0).bits_at(0), p.substream(2).stream(0, 0).bits_at(0));
}

TEST(Parallel, WorkerPrecedence) {
  ::setenv(kWorkersEnv, "3", 1);
  EXPECT_EQ(resolve_workers(std::nullopt, 5), 3U);
  EXPECT_EQ(resolve_workers(6, 5), 6U);
  ::setenv(kWorkersEnv, "zero", 1);
  EXPECT_THROW(resolve_workers(std::nullopt, 5), ConfigError);
  ::unsetenv(kWorkersEnv);
  EXPECT_EQ(resolve_workers(std::nullopt, 5), 5U);
}
