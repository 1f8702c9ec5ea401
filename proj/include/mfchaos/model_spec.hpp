#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "mfchaos/path_ensemble.hpp"

namespace mfchaos {

/// c(t, past) -> R^d.
using DriftFn = std::function<void(double t, const PathView& self, std::span<double> out)>;
/// A(t, past) -> R^{d x m}, row-major.
using DiffusionFn = std::function<void(double t, const PathView& self, std::span<double> out)>;
/// B(t, past, mu) -> R^m.
using MeasureDriftFn =
    std::function<void(double t, const PathView& self, const MeasureView& mu, std::span<double> out)>;
/// Batched B for models whose B reads only current states: for each of the
/// n_q query states (n_q x d, contiguous) the drift against the equal-weight
/// measure on the atom states (n_a x d) is written to out (n_q x m).
using MeasureDriftBatchFn = std::function<void(double t, std::span<const double> queries,
                                               std::span<const double> atoms, std::span<double> out)>;

/// Coefficient triple (c, A, B) of
///   dX = c(t, X) dt + A(t, X) (B(t, X; mu_t) dt + dW).
struct ModelSpec {
  std::string id;
  std::size_t state_dim = 1;
  std::size_t noise_dim = 1;
  DriftFn drift;                           ///< empty means c = 0
  DiffusionFn diffusion;                   ///< required
  MeasureDriftFn measure_drift;            ///< empty means B = 0
  MeasureDriftBatchFn measure_drift_batch; ///< optional fast path, must agree with measure_drift
  /// Set when B depends on the own path only through this coordinate of the
  /// current state; lets a frozen law's drift be tabulated in one variable.
  std::optional<std::size_t> law_coordinate;
  /// Sup-norm of B (the ||sigma^{-1} b|| bound), when known analytically.
  std::optional<double> drift_bound;

  [[nodiscard]] bool interaction_free() const { return !measure_drift && !measure_drift_batch; }
};

}  // namespace mfchaos
