#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfchaos/sde_engine.hpp"
#include "mfchaos/stats.hpp"

namespace mfchaos {

/// Per (particle, step) drift deviations over a range of left points.
struct DriftDeviationSeries {
  std::size_t n_paths = 0;
  std::size_t m = 0;
  StepWindow steps;  ///< left points covered, absolute indices
  double h = 0.0;
  std::vector<double> values;  ///< (path, step - steps.first, coord)

  [[nodiscard]] std::span<const double> at(std::size_t i, std::size_t k) const {
    return std::span<const double>(values).subspan((i * steps.size() + (k - steps.first)) * m, m);
  }
  [[nodiscard]] std::span<double> at(std::size_t i, std::size_t k) {
    return std::span<double>(values).subspan((i * steps.size() + (k - steps.first)) * m, m);
  }

  /// int |dB^i|^2 dt over the steps of w (which must lie inside `steps`).
  [[nodiscard]] double window_energy(std::size_t i, StepWindow w) const {
    if (w.first < steps.first || w.last > steps.last) throw ConfigError("window outside the deviation series");
    double s = 0.0;
    for (std::size_t k = w.first; k < w.last; ++k) {
      for (double v : at(i, k)) s += v * v;
    }
    return s * h;
  }
  [[nodiscard]] double window_energy(std::size_t i) const { return window_energy(i, steps); }

  [[nodiscard]] double max_abs() const {
    double r = 0.0;
    for (std::size_t i = 0; i < n_paths; ++i) {
      for (std::size_t k = steps.first; k < steps.last; ++k) {
        double s = 0.0;
        for (double v : at(i, k)) s += v * v;
        r = std::max(r, std::sqrt(s));
      }
    }
    return r;
  }
};

namespace detail {

inline StepWindow full_window(const TimeGrid& g) { return {0, g.n_steps()}; }

inline void check_deviation_inputs(const PathEnsemble& e, const LawDrift& law, StepWindow w) {
  if (!(e.grid() == law.grid())) throw ConfigError("grid mismatch: ensemble and law drift use different grids");
  if (w.first > w.last || w.last > e.grid().n_steps()) throw ConfigError("deviation window outside the grid");
}

inline DriftDeviationSeries empty_series(const PathEnsemble& e, std::size_t m, StepWindow w) {
  DriftDeviationSeries dev;
  dev.n_paths = e.n_paths();
  dev.m = m;
  dev.steps = w;
  dev.h = e.grid().step();
  dev.values.assign(e.n_paths() * w.size() * m, 0.0);
  return dev;
}

inline void subtract_law(DriftDeviationSeries& dev, const PathEnsemble& e, const LawDrift& law) {
  std::vector<double> b(dev.m);
  for (std::size_t i = 0; i < e.n_paths(); ++i) {
    for (std::size_t k = dev.steps.first; k < dev.steps.last; ++k) {
      law.evaluate(k, e.prefix(i, k), b);
      auto row = dev.at(i, k);
      for (std::size_t j = 0; j < dev.m; ++j) {
        row[j] -= b[j];
        if (!std::isfinite(row[j])) non_finite("drift deviation", i, k, e.grid().time(k));
      }
    }
  }
}

}  // namespace detail

/// dB^i_k = B(t_k, X^i; running empirical measure of `e`) - B(t_k, X^i; law), on the steps of w.
inline DriftDeviationSeries drift_deviation(const PathEnsemble& e, const ModelSpec& model, const LawDrift& law,
                                            std::optional<StepWindow> window = {}) {
  const StepWindow w = window.value_or(detail::full_window(e.grid()));
  detail::check_deviation_inputs(e, law, w);
  DriftDeviationSeries dev = detail::empty_series(e, model.noise_dim, w);
  if (model.interaction_free()) return dev;
  std::vector<double> b(e.n_paths() * dev.m);
  for (std::size_t k = w.first; k < w.last; ++k) {
    evaluate_measure_drift(model, e.grid().time(k), e, k, MeasureView(e, k), b);
    for (std::size_t i = 0; i < e.n_paths(); ++i) {
      std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(i * dev.m), dev.m, dev.at(i, k).begin());
    }
  }
  detail::subtract_law(dev, e, law);
  return dev;
}

inline DriftDeviationSeries drift_deviation(const PathEnsemble& e, const ModelSpec& model, const ReferenceLaw& law,
                                            std::optional<StepWindow> window = {}) {
  const LawDrift drift(model, law, e.grid());
  return drift_deviation(e, model, drift, window);
}

/// Same series from a B record (N, n_steps, m) captured during simulation of `e`.
inline DriftDeviationSeries drift_deviation_from_record(const PathEnsemble& e, std::span<const double> record,
                                                        const ModelSpec& model, const LawDrift& law) {
  const StepWindow w = detail::full_window(e.grid());
  detail::check_deviation_inputs(e, law, w);
  DriftDeviationSeries dev = detail::empty_series(e, model.noise_dim, w);
  if (record.size() != dev.values.size()) throw ConfigError("drift record shape does not match the ensemble");
  if (model.interaction_free()) return dev;
  std::copy(record.begin(), record.end(), dev.values.begin());
  detail::subtract_law(dev, e, law);
  return dev;
}

struct GirsanovRecord {
  double stoch_integral = 0.0;  ///< sum_i sum_k dB^i_k . dW^i_k
  double quad_term = 0.0;       ///< 1/2 sum_i sum_k |dB^i_k|^2 h
  double log_z = 0.0;           ///< -stoch_integral - quad_term

  /// stoch_integral - quad_term: the log-likelihood of the interacting law
  /// against the product law when dW are the copies' own increments.
  [[nodiscard]] double log_likelihood() const { return stoch_integral - quad_term; }
};

/// Left-point sums over the steps of dev; increments shaped like dev.values.
inline GirsanovRecord log_density(const DriftDeviationSeries& dev, std::span<const double> increments, double h) {
  if (increments.size() != dev.values.size()) {
    throw ConfigError("log_density: increments have " + std::to_string(increments.size()) + " entries, expected " +
                      std::to_string(dev.values.size()));
  }
  GirsanovRecord r;
  double q = 0.0;
  for (std::size_t n = 0; n < dev.values.size(); ++n) {
    r.stoch_integral += dev.values[n] * increments[n];
    q += dev.values[n] * dev.values[n];
  }
  r.quad_term = 0.5 * q * h;
  r.log_z = -r.stoch_integral - r.quad_term;
  return r;
}

/// Regenerates the increments of replication `replication` from the plan.
inline GirsanovRecord log_density(const DriftDeviationSeries& dev, const RngPlan& rng, std::uint64_t replication,
                                  const std::vector<std::uint64_t>& stream_ids = {}) {
  std::vector<double> dw(dev.values.size());
  for (std::size_t i = 0; i < dev.n_paths; ++i) {
    const std::uint64_t s = stream_ids.empty() ? i : stream_ids.at(i);
    for (std::size_t k = dev.steps.first; k < dev.steps.last; ++k) {
      rng.increments(replication, s, k, dev.h,
                     std::span<double>(dw).subspan((i * dev.steps.size() + (k - dev.steps.first)) * dev.m, dev.m));
    }
  }
  return log_density(dev, dw, dev.h);
}

// ---------------------------------------------------------------------------
// Replicated estimators
// ---------------------------------------------------------------------------

enum class EstimatorKind { kQuadratic, kZlogZ };

inline const char* to_string(EstimatorKind k) { return k == EstimatorKind::kQuadratic ? "quadratic" : "zlogz"; }

struct EntropyEstimate {
  double h_hat = 0.0;
  double std_err = 0.0;
  std::size_t n_replications = 0;
  std::size_t exclusions = 0;
  EstimatorKind kind = EstimatorKind::kQuadratic;
};

struct ReplicationOptions {
  std::size_t n_replications = 100;
  Executor executor{};               ///< replications run in parallel on it
  std::size_t law_size_factor = 16;  ///< entropy estimators require N_ref >= factor * N
};

/// One replication of N independent copies along a window.
struct CopyReplication {
  GirsanovRecord record;
  std::vector<double> window_energy;  ///< per particle
  double max_abs_deviation = 0.0;
};

/// Simulates N McKean copies per replication and evaluates deviations and the
/// log-density on `window` (default: the whole grid of `law`).
inline std::vector<CopyReplication> replicate_copies(const ModelSpec& model, const LawDrift& law, std::size_t n,
                                                     const InitSampler& init, const RngPlan& rng,
                                                     const ReplicationOptions& opts,
                                                     std::optional<StepWindow> window = {}) {
  std::vector<CopyReplication> out(opts.n_replications);
  opts.executor.for_each_index(opts.n_replications, [&](std::size_t r) {
    SimulationOptions sim;
    sim.replication = r;
    const PathEnsemble copies = simulate_independent(model, n, law, init, rng, sim);
    const DriftDeviationSeries dev = drift_deviation(copies, model, law, window);
    CopyReplication& c = out[r];
    c.record = log_density(dev, rng, r);
    c.window_energy.resize(n);
    for (std::size_t i = 0; i < n; ++i) c.window_energy[i] = dev.window_energy(i);
    c.max_abs_deviation = dev.max_abs();
  });
  return out;
}

namespace detail {

inline void check_law_size(const LawDrift& law, std::size_t n, const ReplicationOptions& opts) {
  if (law.law().size() < opts.law_size_factor * n) {
    throw ConfigError("reference law has N_ref=" + std::to_string(law.law().size()) + " paths; entropy at N=" +
                      std::to_string(n) + " needs at least " + std::to_string(opts.law_size_factor * n));
  }
}

}  // namespace detail

/// H(P^{N,N} | P^{N,inf}) as 1/2 E sum_i int |dB^i|^2 dt along the interacting system.
inline EntropyEstimate entropy_quadratic(const ModelSpec& model, const LawDrift& law, std::size_t n,
                                         const InitSampler& init, const RngPlan& rng,
                                         const ReplicationOptions& opts) {
  detail::check_law_size(law, n, opts);
  std::vector<double> per_rep(opts.n_replications, 0.0);
  opts.executor.for_each_index(opts.n_replications, [&](std::size_t r) {
    std::vector<double> record;
    SimulationOptions sim;
    sim.replication = r;
    sim.measure_drift_record = &record;
    const PathEnsemble paths = simulate_interacting(model, n, law.grid(), init, rng, sim);
    const DriftDeviationSeries dev = drift_deviation_from_record(paths, record, model, law);
    double s = 0.0;
    for (double v : dev.values) s += v * v;
    per_rep[r] = 0.5 * s * dev.h;
  });
  const MeanSe ms = mean_se(per_rep);
  return {ms.mean, ms.se, opts.n_replications, 0, EstimatorKind::kQuadratic};
}

inline constexpr double kMaxLogZ = 700.0;

/// H(P^{N,N} | P^{N,inf}) as E[Z log Z] along independent copies; replications
/// whose log Z exceeds kMaxLogZ are excluded and counted.
inline EntropyEstimate entropy_zlogz(const ModelSpec& model, const LawDrift& law, std::size_t n,
                                     const InitSampler& init, const RngPlan& rng, const ReplicationOptions& opts) {
  detail::check_law_size(law, n, opts);
  const auto reps = replicate_copies(model, law, n, init, rng, opts);
  std::vector<double> vals;
  std::size_t excluded = 0;
  for (const auto& c : reps) {
    const double lz = c.record.log_likelihood();
    if (lz > kMaxLogZ) {
      ++excluded;
      continue;
    }
    vals.push_back(std::exp(lz) * lz);
  }
  const MeanSe ms = mean_se(vals);
  return {ms.mean, ms.se, vals.size(), excluded, EstimatorKind::kZlogZ};
}

/// Monte Carlo E[Z_T] along independent copies, with its standard error.
inline MeanSe martingale_mean(const ModelSpec& model, const LawDrift& law, std::size_t n, const InitSampler& init,
                              const RngPlan& rng, const ReplicationOptions& opts) {
  const auto reps = replicate_copies(model, law, n, init, rng, opts);
  std::vector<double> z(reps.size());
  for (std::size_t r = 0; r < reps.size(); ++r) z[r] = std::exp(reps[r].record.log_likelihood());
  return mean_se(z);
}

}  // namespace mfchaos
