#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "mfchaos/law_drift.hpp"
#include "mfchaos/rng.hpp"

namespace mfchaos {

/// Draws one initial condition into x0 from a dedicated per-particle stream.
using InitSampler = std::function<void(CounterStream& rng, std::span<double> x0)>;

/// Independent N(mean, sd^2) coordinates.
inline InitSampler gaussian_init(double mean = 0.0, double sd = 1.0) {
  return [mean, sd](CounterStream& rng, std::span<double> x0) {
    for (double& x : x0) x = mean + sd * rng.normal();
  };
}

/// Every particle starts at the given point.
inline InitSampler point_init(std::vector<double> point) {
  return [point = std::move(point)](CounterStream&, std::span<double> x0) {
    for (std::size_t c = 0; c < x0.size(); ++c) x0[c] = point.at(c);
  };
}

struct SimulationOptions {
  std::uint64_t replication = 0;
  /// Stream id of each particle; empty means particle i uses stream i.
  std::vector<std::uint64_t> stream_ids;
  /// When set, receives the measure drift B used at every left point, shaped (N, n_steps, m).
  std::vector<double>* measure_drift_record = nullptr;
  /// Particle-level parallelism inside each step (results do not depend on it).
  Executor executor{};
};

namespace detail {

inline std::uint64_t stream_of(const SimulationOptions& opts, std::size_t i) {
  return opts.stream_ids.empty() ? i : opts.stream_ids.at(i);
}

[[noreturn]] inline void non_finite(const char* what, std::size_t path, std::size_t step, double t) {
  std::ostringstream os;
  os << "non-finite " << what << " for path " << path << " at step " << step << " (t=" << t
     << "); aborting replication";
  throw SimulationError(os.str());
}

inline void check_finite(std::span<const double> v, const char* what, std::size_t path, std::size_t step, double t) {
  for (double x : v) {
    if (!std::isfinite(x)) non_finite(what, path, step, t);
  }
}

/// x_{k+1} = x_k + c h + A (B h + dW) for path i, given B and dW rows.
inline void advance_path(const ModelSpec& model, PathEnsemble& paths, std::size_t i, std::size_t k,
                         std::span<const double> b_row, std::span<const double> dw_row, std::vector<double>& c_buf,
                         std::vector<double>& a_buf) {
  const std::size_t d = model.state_dim;
  const std::size_t m = model.noise_dim;
  const double t = paths.grid().time(k);
  const double h = paths.grid().step();
  const PathView self = paths.prefix(i, k);
  c_buf.assign(d, 0.0);
  if (model.drift) {
    model.drift(t, self, c_buf);
    check_finite(c_buf, "drift c", i, k, t);
  }
  a_buf.assign(d * m, 0.0);
  model.diffusion(t, self, a_buf);
  check_finite(a_buf, "diffusion A", i, k, t);
  check_finite(b_row, "measure drift B", i, k, t);

  const auto cur = paths.state(i, k);
  auto next = paths.state(i, k + 1);
  for (std::size_t r = 0; r < d; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += a_buf[r * m + j] * (b_row[j] * h + dw_row[j]);
    next[r] = cur[r] + c_buf[r] * h + acc;
  }
  check_finite(next, "state", i, k + 1, paths.grid().time(k + 1));
}

inline void fill_increments(const RngPlan& rng, const SimulationOptions& opts, std::size_t n, std::size_t k, double h,
                            std::size_t m, std::vector<double>& dw) {
  dw.resize(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    rng.increments(opts.replication, stream_of(opts, i), k, h, std::span<double>(dw).subspan(i * m, m));
  }
}

inline PathEnsemble initial_ensemble(const ModelSpec& model, std::size_t n, const TimeGrid& grid,
                                     const InitSampler& init, const RngPlan& rng, const SimulationOptions& opts) {
  if (n == 0) throw ConfigError("number of particles must be at least 1");
  if (!model.diffusion) throw ConfigError("model '" + model.id + "' has no diffusion coefficient");
  if (!opts.stream_ids.empty() && opts.stream_ids.size() != n) {
    throw ConfigError("stream_ids must have one entry per particle");
  }
  PathEnsemble paths(n, model.state_dim, grid);
  for (std::size_t i = 0; i < n; ++i) {
    CounterStream s = rng.stream(opts.replication, stream_of(opts, i), StreamPurpose::kInitial);
    init(s, paths.state(i, 0));
  }
  if (opts.measure_drift_record != nullptr) {
    opts.measure_drift_record->assign(n * grid.n_steps() * model.noise_dim, 0.0);
  }
  return paths;
}

inline void record_drift(const SimulationOptions& opts, std::size_t n, std::size_t n_steps, std::size_t m,
                         std::size_t k, std::span<const double> b) {
  if (opts.measure_drift_record == nullptr) return;
  auto& rec = *opts.measure_drift_record;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) rec[(i * n_steps + k) * m + j] = b[i * m + j];
  }
}

}  // namespace detail

/// One left-point Euler-Maruyama step for every path of `paths`: writes step k+1
/// from the prefixes up to step k, with B evaluated against `measure`.
///
/// `increments` holds the Brownian increments, n_paths x m. Returns the B rows used.
inline std::vector<double> euler_step(PathEnsemble& paths, std::size_t k, const ModelSpec& model,
                                      const MeasureView& measure, std::span<const double> increments) {
  const std::size_t n = paths.n_paths();
  const std::size_t m = model.noise_dim;
  if (k >= paths.grid().n_steps()) throw ConfigError("euler_step: step index past the end of the grid");
  if (increments.size() != n * m) throw ConfigError("euler_step: increments must be n_paths x m");
  std::vector<double> b(n * m);
  evaluate_measure_drift(model, paths.grid().time(k), paths, k, measure, b);
  std::vector<double> c_buf;
  std::vector<double> a_buf;
  for (std::size_t i = 0; i < n; ++i) {
    detail::advance_path(model, paths, i, k, std::span<const double>(b).subspan(i * m, m),
                         increments.subspan(i * m, m), c_buf, a_buf);
  }
  return b;
}

/// N-particle system: each particle's B is evaluated against the running
/// empirical measure of the whole ensemble (barrier per step).
inline PathEnsemble simulate_interacting(const ModelSpec& model, std::size_t n, const TimeGrid& grid,
                                         const InitSampler& init, const RngPlan& rng,
                                         const SimulationOptions& opts = {}) {
  PathEnsemble paths = detail::initial_ensemble(model, n, grid, init, rng, opts);
  const std::size_t m = model.noise_dim;
  const std::size_t d = model.state_dim;
  const double h = grid.step();
  std::vector<double> b(n * m);
  std::vector<double> dw;
  std::vector<double> atoms;
  const std::size_t n_chunks = std::min<std::size_t>(n, opts.executor.workers());
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const double t = grid.time(k);
    const MeasureView mu(paths, k);
    if (model.interaction_free()) {
      std::fill(b.begin(), b.end(), 0.0);
    } else if (n_chunks > 1) {
      if (model.measure_drift_batch) gather_states(paths, k, atoms);
      opts.executor.for_each_index(n_chunks, [&](std::size_t chunk) {
        const std::size_t lo = chunk * n / n_chunks;
        const std::size_t hi = (chunk + 1) * n / n_chunks;
        if (model.measure_drift_batch) {
          model.measure_drift_batch(t, std::span<const double>(atoms).subspan(lo * d, (hi - lo) * d), atoms,
                                    std::span<double>(b).subspan(lo * m, (hi - lo) * m));
        } else {
          for (std::size_t i = lo; i < hi; ++i) {
            model.measure_drift(t, paths.prefix(i, k), mu, std::span<double>(b).subspan(i * m, m));
          }
        }
      });
    } else {
      evaluate_measure_drift(model, t, paths, k, mu, b);
    }
    detail::record_drift(opts, n, grid.n_steps(), m, k, b);
    detail::fill_increments(rng, opts, n, k, h, m, dw);
    std::vector<double> c_buf;
    std::vector<double> a_buf;
    for (std::size_t i = 0; i < n; ++i) {
      detail::advance_path(model, paths, i, k, std::span<const double>(b).subspan(i * m, m),
                           std::span<const double>(dw).subspan(i * m, m), c_buf, a_buf);
    }
  }
  return paths;
}

/// N independent McKean copies: B is evaluated against the frozen law.
inline PathEnsemble simulate_independent(const ModelSpec& model, std::size_t n, const LawDrift& law_drift,
                                         const InitSampler& init, const RngPlan& rng,
                                         const SimulationOptions& opts = {}) {
  const TimeGrid& grid = law_drift.grid();
  PathEnsemble paths = detail::initial_ensemble(model, n, grid, init, rng, opts);
  const std::size_t m = model.noise_dim;
  const double h = grid.step();
  const std::size_t n_chunks = std::min<std::size_t>(n, opts.executor.workers());
  std::vector<double> b(n * m);
  std::vector<double> dw;
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    detail::fill_increments(rng, opts, n, k, h, m, dw);
    opts.executor.for_each_index(n_chunks, [&](std::size_t chunk) {
      std::vector<double> c_buf;
      std::vector<double> a_buf;
      for (std::size_t i = chunk * n / n_chunks; i < (chunk + 1) * n / n_chunks; ++i) {
        const auto row = std::span<double>(b).subspan(i * m, m);
        law_drift.evaluate(k, paths.prefix(i, k), row);
        detail::advance_path(model, paths, i, k, row, std::span<const double>(dw).subspan(i * m, m), c_buf, a_buf);
      }
    });
    detail::record_drift(opts, n, grid.n_steps(), m, k, b);
  }
  return paths;
}

/// Convenience overload building the law's drift evaluator for `grid`.
inline PathEnsemble simulate_independent(const ModelSpec& model, std::size_t n, const ReferenceLaw& law,
                                         const TimeGrid& grid, const InitSampler& init, const RngPlan& rng,
                                         const SimulationOptions& opts = {}) {
  const LawDrift drift(model, law, grid, opts.executor);
  return simulate_independent(model, n, drift, init, rng, opts);
}

}  // namespace mfchaos
