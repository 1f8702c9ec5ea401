#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mfchaos/girsanov.hpp"

namespace mfchaos {

struct MomentRow {
  std::string check;
  double order = 0.0;
  double empirical = 0.0;
  double std_err = 0.0;
  double bound = 0.0;
  bool pass = false;
};

inline MomentRow make_row(std::string check, double order, double empirical, double std_err, double bound) {
  const bool pass = empirical <= bound + 3.0 * std_err;
  return {std::move(check), order, empirical, std_err, bound, pass};
}

struct MomentReport {
  std::vector<MomentRow> rows;
  std::map<std::string, double> metadata;

  [[nodiscard]] bool all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const MomentRow& r) { return r.pass; });
  }
  void append(const MomentReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }
};

inline double factorial(int n) { return std::exp(std::lgamma(static_cast<double>(n) + 1.0)); }

// ---------------------------------------------------------------------------
// Condition (C)
// ---------------------------------------------------------------------------

inline double condition_c_bound(int p, double beta, double delta, std::size_t n) {
  return factorial(p) * std::pow(beta * delta / static_cast<double>(n), p);
}

/// Windowed moments E[(int |dB^i|^2 dt)^p] from per-replication, per-particle
/// window energies. Each replication contributes the particle average, which is
/// unbiased by exchangeability.
inline MomentReport check_condition_c(const std::vector<std::vector<double>>& energies, double beta, double t0,
                                      double delta, std::size_t n, const std::vector<int>& orders) {
  MomentReport rep;
  rep.metadata = {{"N", static_cast<double>(n)}, {"delta", delta}, {"T0", t0}, {"beta", beta}};
  for (int p : orders) {
    if (p < 1) throw ConfigError("condition (C): orders must be positive integers");
    std::vector<double> per_rep(energies.size());
    for (std::size_t r = 0; r < energies.size(); ++r) {
      double s = 0.0;
      for (double e : energies[r]) s += std::pow(e, p);
      per_rep[r] = s / static_cast<double>(energies[r].size());
    }
    const MeanSe ms = mean_se(per_rep);
    rep.rows.push_back(make_row("condition-c/N=" + std::to_string(n), p, ms.mean, ms.se,
                                condition_c_bound(p, beta, delta, n)));
  }
  return rep;
}

/// Simulates independent copies on [0, grid end] and checks the ladder on the
/// window [t0, (t0 + delta) ^ T].
inline MomentReport condition_c_study(const ModelSpec& model, const LawDrift& law, std::size_t n, double t0,
                                      double delta, double beta, const std::vector<int>& orders,
                                      const InitSampler& init, const RngPlan& rng, const ReplicationOptions& opts) {
  const StepWindow w = window_for(law.grid(), t0, delta);
  const auto reps = replicate_copies(model, law, n, init, rng, opts, w);
  std::vector<std::vector<double>> energies(reps.size());
  for (std::size_t r = 0; r < reps.size(); ++r) energies[r] = reps[r].window_energy;
  return check_condition_c(energies, beta, t0, delta, n, orders);
}

// ---------------------------------------------------------------------------
// Sub-Gaussian moments of bounded iid sums
// ---------------------------------------------------------------------------

struct BoundedSampler {
  std::string name;
  std::function<double(CounterStream&)> draw;
  double mean = 0.0;
  double bound = 1.0;                     ///< |X| <= bound a.s.
  std::function<double(int)> central_moment;  ///< E[(X - EX)^r], for exact sums
};

inline BoundedSampler rademacher_sampler() {
  return {"rademacher", [](CounterStream& s) { return s.rademacher(); }, 0.0, 1.0,
          [](int r) { return r % 2 == 0 ? 1.0 : 0.0; }};
}

inline BoundedSampler uniform_sampler() {
  return {"uniform", [](CounterStream& s) { return s.uniform(-1.0, 1.0); }, 0.0, 1.0,
          [](int r) { return r % 2 == 0 ? 1.0 / (r + 1.0) : 0.0; }};
}

/// E[(sum_{i<=n} (X_i - EX))^r] by convolving moment sequences.
inline double exact_sum_moment(const BoundedSampler& s, std::size_t n, int r) {
  std::vector<double> mu(r + 1);
  for (int a = 0; a <= r; ++a) mu[a] = a == 0 ? 1.0 : s.central_moment(a);
  std::vector<double> sum(r + 1, 0.0);
  sum[0] = 1.0;
  std::vector<std::vector<double>> binom(r + 1, std::vector<double>(r + 1, 0.0));
  for (int a = 0; a <= r; ++a) {
    binom[a][0] = 1.0;
    for (int b = 1; b <= a; ++b) binom[a][b] = binom[a - 1][b - 1] + (b < a ? binom[a - 1][b] : 0.0);
  }
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> next(r + 1, 0.0);
    for (int a = 0; a <= r; ++a) {
      for (int b = 0; b <= a; ++b) next[a] += binom[a][b] * sum[b] * mu[a - b];
    }
    sum.swap(next);
  }
  return sum[r];
}

inline double subgaussian_bound(int q, std::size_t n, double bound) {
  return factorial(q) * std::pow(2.0 * static_cast<double>(n) * bound * bound, q);
}

/// Monte Carlo and exact E[(sum (X_i - EX))^{2q}] against q!(2 n mbar^2)^q.
inline MomentReport check_subgaussian_moments(const BoundedSampler& s, std::size_t n, const std::vector<int>& orders,
                                              std::size_t n_samples, const RngPlan& rng,
                                              const Executor& exec = Executor{}) {
  MomentReport rep;
  rep.metadata = {{"n", static_cast<double>(n)}, {"m_bar", s.bound}, {"samples", static_cast<double>(n_samples)}};
  std::vector<double> sums(n_samples);
  exec.for_each_index(n_samples, [&](std::size_t r) {
    CounterStream st = rng.stream(r, 0, StreamPurpose::kAuxiliary);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += s.draw(st) - s.mean;
    sums[r] = acc;
  });
  for (int q : orders) {
    std::vector<double> v(n_samples);
    for (std::size_t r = 0; r < n_samples; ++r) v[r] = std::pow(sums[r], 2 * q);
    const MeanSe ms = mean_se(v);
    const double bound = subgaussian_bound(q, n, s.bound);
    rep.rows.push_back(make_row("subgaussian/" + s.name + "/n=" + std::to_string(n), q, ms.mean, ms.se, bound));
    if (s.central_moment) {
      rep.rows.push_back(
          make_row("subgaussian-exact/" + s.name + "/n=" + std::to_string(n), q, exact_sum_moment(s, n, 2 * q), 0.0, bound));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Bounded differences
// ---------------------------------------------------------------------------

struct BoundedDifferenceSpec {
  std::string name;
  std::vector<double> coefficients;  ///< c_i: max change of f in coordinate i
  std::function<double(std::span<const double>)> f;
  BoundedSampler sampler;
  std::optional<double> expected_value;  ///< E[f]; sample mean when absent

  [[nodiscard]] double nu() const {
    double s = 0.0;
    for (double c : coefficients) s += c * c;
    return s / 4.0;
  }
};

/// f = mean of n variables with values in [-bound, bound].
inline BoundedDifferenceSpec mean_of(const BoundedSampler& s, std::size_t n) {
  BoundedDifferenceSpec spec;
  spec.name = "mean/" + s.name + "/n=" + std::to_string(n);
  spec.coefficients.assign(n, 2.0 * s.bound / static_cast<double>(n));
  spec.f = [](std::span<const double> x) {
    double a = 0.0;
    for (double v : x) a += v;
    return a / static_cast<double>(x.size());
  };
  spec.sampler = s;
  spec.expected_value = s.mean;
  return spec;
}

inline double bounded_difference_tail(double t, double nu) { return std::exp(-t * t / (2.0 * nu)); }
inline double bounded_difference_moment(int k, double nu) { return factorial(k) * std::pow(4.0 * nu, k); }

/// Two-sided tails max(P(Y-EY >= t), P(Y-EY <= -t)) against exp(-t^2/(2 nu)),
/// and central moments E[(Y-EY)^{2k}] against k!(4 nu)^k.
inline MomentReport check_bounded_difference(const BoundedDifferenceSpec& spec, const std::vector<double>& ts,
                                             const std::vector<int>& ks, std::size_t n_samples, const RngPlan& rng,
                                             const Executor& exec = Executor{}) {
  const std::size_t n = spec.coefficients.size();
  const double nu = spec.nu();
  MomentReport rep;
  rep.metadata = {{"n", static_cast<double>(n)}, {"nu", nu}, {"samples", static_cast<double>(n_samples)}};
  std::vector<double> y(n_samples);
  exec.for_each_index(n_samples, [&](std::size_t r) {
    CounterStream st = rng.stream(r, 1, StreamPurpose::kAuxiliary);
    std::vector<double> x(n);
    for (double& v : x) v = spec.sampler.draw(st);
    y[r] = spec.f(x);
  });
  const double ey = spec.expected_value ? *spec.expected_value : mean_se(y).mean;
  const auto ns = static_cast<double>(n_samples);
  for (double t : ts) {
    std::size_t up = 0;
    std::size_t down = 0;
    for (double v : y) {
      up += v - ey >= t ? 1U : 0U;
      down += v - ey <= -t ? 1U : 0U;
    }
    const double p = static_cast<double>(std::max(up, down)) / ns;
    rep.rows.push_back(make_row("bounded-difference-tail/" + spec.name, t, p, std::sqrt(p * (1.0 - p) / ns),
                                bounded_difference_tail(t, nu)));
  }
  for (int k : ks) {
    std::vector<double> v(n_samples);
    for (std::size_t r = 0; r < n_samples; ++r) v[r] = std::pow(y[r] - ey, 2 * k);
    const MeanSe ms = mean_se(v);
    rep.rows.push_back(make_row("bounded-difference-moment/" + spec.name, k, ms.mean, ms.se,
                                bounded_difference_moment(k, nu)));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Carlen-Kree
// ---------------------------------------------------------------------------

struct MartingaleSpec {
  std::string name;
  std::function<double(double t, double w)> integrand;  ///< h(t, W_t), bounded
  double t_end = 1.0;
  std::size_t n_steps = 100;
};

/// ||M_T||_p / ||<M>_T^{1/2}||_p for M = int h dW against 2 sqrt(p).
///
/// The ratio's standard error comes from the delta method on the two sample
/// moments. When <M> vanishes the row compares ||M||_p with 0.
inline MomentReport check_carlen_kree(const MartingaleSpec& spec, const std::vector<int>& orders,
                                      std::size_t n_replications, const RngPlan& rng,
                                      const Executor& exec = Executor{}) {
  MomentReport rep;
  rep.metadata = {{"T", spec.t_end}, {"steps", static_cast<double>(spec.n_steps)},
                  {"replications", static_cast<double>(n_replications)}};
  const TimeGrid grid(0.0, spec.t_end, spec.n_steps);
  const double h = grid.step();
  std::vector<double> mart(n_replications);
  std::vector<double> qv(n_replications);
  exec.for_each_index(n_replications, [&](std::size_t r) {
    double w = 0.0;
    double m = 0.0;
    double q = 0.0;
    double dw = 0.0;
    for (std::size_t k = 0; k < spec.n_steps; ++k) {
      rng.increments(r, 0, k, h, std::span<double>(&dw, 1));
      const double hv = spec.integrand(grid.time(k), w);
      m += hv * dw;
      q += hv * hv * h;
      w += dw;
    }
    mart[r] = m;
    qv[r] = q;
  });
  const auto nr = static_cast<double>(n_replications);
  for (int p : orders) {
    std::vector<double> a(n_replications);
    std::vector<double> b(n_replications);
    for (std::size_t r = 0; r < n_replications; ++r) {
      a[r] = std::pow(std::abs(mart[r]), p);
      b[r] = std::pow(qv[r], 0.5 * p);
    }
    const MeanSe ma = mean_se(a);
    const MeanSe mb = mean_se(b);
    const double bound = 2.0 * std::sqrt(static_cast<double>(p));
    const std::string name = "carlen-kree/" + spec.name;
    if (!(mb.mean > 0.0)) {
      rep.rows.push_back(make_row(name, p, std::pow(ma.mean, 1.0 / p), 0.0, 0.0));
      continue;
    }
    const double ratio = std::pow(ma.mean / mb.mean, 1.0 / p);
    double cov = 0.0;
    for (std::size_t r = 0; r < n_replications; ++r) cov += (a[r] - ma.mean) * (b[r] - mb.mean);
    cov /= (nr - 1.0) * nr;
    const double var_log = (ma.se * ma.se / (ma.mean * ma.mean) + mb.se * mb.se / (mb.mean * mb.mean) -
                            2.0 * cov / (ma.mean * mb.mean)) /
                           (static_cast<double>(p) * p);
    rep.rows.push_back(make_row(name, p, ratio, ratio * std::sqrt(std::max(var_log, 0.0)), bound));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Exponential martingale moment
// ---------------------------------------------------------------------------

inline double exp_martingale_threshold(double kappa, double beta) { return 1.0 / (8.0 * kappa * beta); }

/// 1 + exp(kappa^2) + 2 / (1 - 8 kappa delta beta); requires delta < 1/(8 kappa beta).
inline double exp_martingale_bound(double kappa, double delta, double beta) {
  const double thr = exp_martingale_threshold(kappa, beta);
  if (!(delta < thr)) {
    std::ostringstream os;
    os << "exponential-martingale bound needs delta < (8 kappa beta)^-1 = " << thr << "; got delta=" << delta;
    throw ConfigError(os.str());
  }
  return 1.0 + std::exp(kappa * kappa) + 2.0 / (1.0 - 8.0 * kappa * delta * beta);
}

/// E[(Z_{T0+delta} / Z_{T0})^kappa] along independent copies against its bound.
inline MomentReport check_exp_martingale_moment(const ModelSpec& model, const LawDrift& law, std::size_t n,
                                                double t0, double delta, double kappa, double beta,
                                                const InitSampler& init, const RngPlan& rng,
                                                const ReplicationOptions& opts) {
  const double bound = exp_martingale_bound(kappa, delta, beta);
  const StepWindow w = window_for(law.grid(), t0, delta);
  const auto reps = replicate_copies(model, law, n, init, rng, opts, w);
  std::vector<double> v(reps.size());
  for (std::size_t r = 0; r < reps.size(); ++r) v[r] = std::exp(kappa * reps[r].record.log_likelihood());
  const MeanSe ms = mean_se(v);
  MomentReport rep;
  rep.metadata = {{"N", static_cast<double>(n)}, {"T0", t0},      {"delta", delta},
                  {"kappa", kappa},              {"beta", beta}, {"replications", static_cast<double>(reps.size())}};
  rep.rows.push_back(make_row("exp-martingale/N=" + std::to_string(n), kappa, ms.mean, ms.se, bound));
  return rep;
}

// ---------------------------------------------------------------------------
// Theorem constant
// ---------------------------------------------------------------------------

/// [p/(p-1)] [1 + exp(p^2) + (8+eps)/eps] ((q+1)!)^{(p/(p-1))/(q+1)}, q = floor(p/(p-1)).
inline double theorem_constant(double p, double eps) {
  if (!(p > 1.0)) throw ConfigError("theorem_constant: p must exceed 1");
  if (!(eps > 0.0)) throw ConfigError("theorem_constant: eps must be positive");
  const double ps = p / (p - 1.0);
  const double q = std::floor(ps);
  const double fact = std::exp(std::lgamma(q + 2.0) * ps / (q + 1.0));
  return ps * (1.0 + std::exp(p * p) + (8.0 + eps) / eps) * fact;
}

struct ConstantMinimum {
  double p = 0.0;
  double eps = 0.0;
  double value = std::numeric_limits<double>::infinity();
  std::vector<double> p_grid;
  std::vector<double> eps_grid;
};

inline ConstantMinimum minimize_theorem_constant(const std::vector<double>& p_grid, const std::vector<double>& eps_grid) {
  ConstantMinimum best;
  best.p_grid = p_grid;
  best.eps_grid = eps_grid;
  for (double p : p_grid) {
    for (double e : eps_grid) {
      const double c = theorem_constant(p, e);
      if (c < best.value) {
        best.value = c;
        best.p = p;
        best.eps = e;
      }
    }
  }
  return best;
}

/// Default scan: p in (1, 3] and eps log-spaced over [1e-2, 1e4].
inline ConstantMinimum minimize_theorem_constant() {
  std::vector<double> ps;
  for (int i = 1; i <= 200; ++i) ps.push_back(1.0 + 0.01 * i);
  std::vector<double> es;
  for (int i = 0; i <= 60; ++i) es.push_back(std::pow(10.0, -2.0 + 0.1 * i));
  return minimize_theorem_constant(ps, es);
}

}  // namespace mfchaos
