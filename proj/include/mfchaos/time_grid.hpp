#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>

#include "mfchaos/errors.hpp"

namespace mfchaos {

/// Uniform time discretization t_k = t_start + k*h, k = 0..n_steps.
class TimeGrid {
 public:
  TimeGrid(double t_start, double t_end, std::size_t n_steps)
      : t_start_(t_start), t_end_(t_end), n_steps_(n_steps) {
    if (!(t_start >= 0.0) || !std::isfinite(t_end) || !(t_end > t_start)) {
      std::ostringstream os;
      os << "TimeGrid: need 0 <= t_start < t_end, got [" << t_start << ", " << t_end << "]";
      throw ConfigError(os.str());
    }
    if (n_steps == 0) throw ConfigError("TimeGrid: n_steps must be positive");
  }

  [[nodiscard]] double t_start() const { return t_start_; }
  [[nodiscard]] double t_end() const { return t_end_; }
  [[nodiscard]] std::size_t n_steps() const { return n_steps_; }
  [[nodiscard]] std::size_t n_points() const { return n_steps_ + 1; }
  [[nodiscard]] double step() const { return (t_end_ - t_start_) / static_cast<double>(n_steps_); }

  [[nodiscard]] double time(std::size_t k) const {
    if (k == n_steps_) return t_end_;
    return t_start_ + static_cast<double>(k) * step();
  }

  /// Grid index of time t; throws unless t lies on the grid (relative tolerance 1e-9 of h).
  [[nodiscard]] std::size_t index_of(double t) const {
    const double pos = (t - t_start_) / step();
    const double k = std::round(pos);
    if (!(std::abs(pos - k) <= 1e-9 * std::max(1.0, std::abs(pos))) || k < 0.0 ||
        k > static_cast<double>(n_steps_)) {
      std::ostringstream os;
      os << "time " << t << " is not a point of the grid [" << t_start_ << ", " << t_end_ << "] with "
         << n_steps_ << " steps";
      throw ConfigError(os.str());
    }
    return static_cast<std::size_t>(k);
  }

  [[nodiscard]] bool contains_point(double t) const {
    try {
      (void)index_of(t);
      return true;
    } catch (const ConfigError&) {
      return false;
    }
  }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.t_start_ == b.t_start_ && a.t_end_ == b.t_end_ && a.n_steps_ == b.n_steps_;
  }

 private:
  double t_start_;
  double t_end_;
  std::size_t n_steps_;
};

/// Half-open range of left-point step indices [first, last).
struct StepWindow {
  std::size_t first = 0;
  std::size_t last = 0;
  [[nodiscard]] std::size_t size() const { return last - first; }
};

/// Steps covering [t0, min(t0 + delta, t_end)] on the grid.
inline StepWindow window_for(const TimeGrid& grid, double t0, double delta) {
  if (!(delta > 0.0)) throw ConfigError("window: delta must be positive");
  if (!(t0 >= grid.t_start()) || !(t0 < grid.t_end())) {
    std::ostringstream os;
    os << "window start " << t0 << " outside [" << grid.t_start() << ", " << grid.t_end() << ")";
    throw ConfigError(os.str());
  }
  const double t1 = std::min(t0 + delta, grid.t_end());
  return {grid.index_of(t0), grid.index_of(t1)};
}

}  // namespace mfchaos
