#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "mfchaos/model_spec.hpp"

namespace mfchaos {

/// Copies the current states of all paths at `step` into a contiguous n x d buffer.
inline void gather_states(const PathEnsemble& e, std::size_t step, std::vector<double>& out) {
  const std::size_t d = e.dim();
  out.resize(e.n_paths() * d);
  for (std::size_t i = 0; i < e.n_paths(); ++i) {
    const auto s = e.state(i, step);
    std::copy(s.begin(), s.end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
}

/// B(t, X^i; mu) for every path i of `queries` at `query_step`, written as n x m rows.
///
/// Uses the model's batched evaluator when it has one (reading only current
/// states), otherwise calls the path functional once per query.
inline void evaluate_measure_drift(const ModelSpec& model, double t, const PathEnsemble& queries,
                                   std::size_t query_step, const MeasureView& mu, std::span<double> out) {
  const std::size_t m = model.noise_dim;
  const std::size_t n = queries.n_paths();
  if (model.interaction_free()) {
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n * m), 0.0);
    return;
  }
  if (model.measure_drift_batch) {
    std::vector<double> atoms;
    gather_states(mu.ensemble(), mu.step(), atoms);
    if (&queries == &mu.ensemble() && query_step == mu.step()) {
      model.measure_drift_batch(t, atoms, atoms, out.first(n * m));
    } else {
      std::vector<double> q;
      gather_states(queries, query_step, q);
      model.measure_drift_batch(t, q, atoms, out.first(n * m));
    }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    model.measure_drift(t, queries.prefix(i, query_step), mu, out.subspan(i * m, m));
  }
}

}  // namespace mfchaos
