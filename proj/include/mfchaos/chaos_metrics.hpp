#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mfchaos/girsanov.hpp"

namespace mfchaos {

/// A TV bound clamped to [0, 1]; `raw` keeps the unclamped value.
struct TvBound {
  double value = 0.0;
  double raw = 0.0;
  double std_err = 0.0;
};

/// sqrt(2 (k/N) h_N), with delta-method standard error.
inline TvBound tv_bound_pinsker(const EntropyEstimate& h, std::size_t k, std::size_t n) {
  if (k < 1 || k > n) throw ConfigError("tv_bound_pinsker: need 1 <= k <= N");
  const double tol = std::max(3.0 * h.std_err, 1e-12);
  if (h.h_hat < -tol) throw ConfigError("tv_bound_pinsker: entropy estimate is negative beyond tolerance");
  const double hh = std::max(h.h_hat, 0.0);
  const double a = 2.0 * static_cast<double>(k) / static_cast<double>(n);
  TvBound b;
  b.raw = std::sqrt(a * hh);
  if (hh > 0.0) {
    b.std_err = a * h.std_err / (2.0 * b.raw);
  } else {
    b.std_err = std::sqrt(a * h.std_err);
  }
  b.value = std::min(b.raw, 1.0);
  return b;
}

/// C (1 + beta T) sqrt(k/N).
inline TvBound tv_bound_theorem(double beta, double t, std::size_t k, std::size_t n, double c) {
  if (k < 1 || k > n) throw ConfigError("tv_bound_theorem: need 1 <= k <= N");
  TvBound b;
  b.raw = c * (1.0 + beta * t) * std::sqrt(static_cast<double>(k) / static_cast<double>(n));
  b.value = std::min(b.raw, 1.0);
  return b;
}

// ---------------------------------------------------------------------------
// Histogram TV
// ---------------------------------------------------------------------------

namespace detail {

inline double quantile(std::vector<double> v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  if (lo + 1 >= v.size()) return a;
  const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

struct Axis {
  double lo = 0.0;
  double width = 1.0;
  std::size_t bins = 1;

  [[nodiscard]] std::size_t bin(double x) const {
    if (bins == 1) return 0;
    const auto b = static_cast<std::ptrdiff_t>((x - lo) / width);
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1));
  }
};

inline constexpr std::size_t kMaxBinsPerAxis = 4096;

/// Freedman-Diaconis axis on the pooled sample: width 2 IQR n^{-1/exponent}.
inline Axis fd_axis(std::span<const double> a, std::span<const double> b, double exponent,
                    std::size_t fixed_bins = 0) {
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto [mn, mx] = std::minmax_element(pooled.begin(), pooled.end());
  Axis ax;
  ax.lo = *mn;
  const double range = *mx - *mn;
  if (!(range > 0.0)) return ax;
  std::size_t bins = fixed_bins;
  if (bins == 0) {
    const double iqr = quantile(pooled, 0.75) - quantile(pooled, 0.25);
    const double n = static_cast<double>(std::min(a.size(), b.size()));
    const double width = 2.0 * iqr * std::pow(n, -1.0 / exponent);
    bins = width > 0.0 ? static_cast<std::size_t>(std::ceil(range / width)) : 1;
  }
  ax.bins = std::clamp<std::size_t>(bins, 1, kMaxBinsPerAxis);
  ax.width = range / static_cast<double>(ax.bins);
  return ax;
}

inline void check_samples(std::size_t na, std::size_t nb) {
  if (na == 0 || nb == 0) throw ConfigError("tv estimate: empty sample");
}

inline double half_l1(const std::vector<double>& ca, const std::vector<double>& cb, double na, double nb) {
  double s = 0.0;
  for (std::size_t i = 0; i < ca.size(); ++i) s += std::abs(ca[i] / na - cb[i] / nb);
  return std::min(0.5 * s, 1.0);
}

}  // namespace detail

/// 1/2 sum |p_a - p_b| over a common histogram of two scalar samples.
inline double tv_histogram(std::span<const double> a, std::span<const double> b, std::size_t bins = 0) {
  detail::check_samples(a.size(), b.size());
  const detail::Axis ax = detail::fd_axis(a, b, 3.0, bins);
  std::vector<double> ca(ax.bins, 0.0);
  std::vector<double> cb(ax.bins, 0.0);
  for (double x : a) ca[ax.bin(x)] += 1.0;
  for (double x : b) cb[ax.bin(x)] += 1.0;
  return detail::half_l1(ca, cb, static_cast<double>(a.size()), static_cast<double>(b.size()));
}

/// Same on 2-d samples given as interleaved (x, y) pairs.
inline double tv_histogram_2d(std::span<const double> a, std::span<const double> b, std::size_t bins = 0) {
  if (a.size() % 2 != 0 || b.size() % 2 != 0) throw ConfigError("tv_histogram_2d: samples must be (x, y) pairs");
  detail::check_samples(a.size() / 2, b.size() / 2);
  auto coord = [](std::span<const double> s, std::size_t c) {
    std::vector<double> v(s.size() / 2);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = s[2 * i + c];
    return v;
  };
  const auto ax0 = coord(a, 0), bx0 = coord(b, 0), ax1 = coord(a, 1), bx1 = coord(b, 1);
  const detail::Axis u = detail::fd_axis(ax0, bx0, 4.0, bins);
  const detail::Axis v = detail::fd_axis(ax1, bx1, 4.0, bins);
  std::vector<double> ca(u.bins * v.bins, 0.0);
  std::vector<double> cb(u.bins * v.bins, 0.0);
  for (std::size_t i = 0; i < ax0.size(); ++i) ca[u.bin(ax0[i]) * v.bins + v.bin(ax1[i])] += 1.0;
  for (std::size_t i = 0; i < bx0.size(); ++i) cb[u.bin(bx0[i]) * v.bins + v.bin(bx1[i])] += 1.0;
  return detail::half_l1(ca, cb, static_cast<double>(ax0.size()), static_cast<double>(bx0.size()));
}

/// Time-t marginal samples of the listed state coordinates (one row per path).
inline std::vector<double> marginal_samples(const PathEnsemble& e, double t, std::span<const std::size_t> coords) {
  const std::size_t k = e.grid().index_of(t);
  std::vector<double> out;
  out.reserve(e.n_paths() * coords.size());
  for (std::size_t i = 0; i < e.n_paths(); ++i) {
    for (std::size_t c : coords) out.push_back(e.at(i, k, c));
  }
  return out;
}

/// Histogram TV between the time-t marginals of two ensembles on 1 or 2 coordinates.
inline double tv_direct_marginal(const PathEnsemble& a, const PathEnsemble& b, double t,
                                 const std::vector<std::size_t>& coords, std::size_t bins = 0) {
  if (a.dim() != b.dim()) throw ConfigError("tv_direct_marginal: ensembles differ in dimension");
  if (coords.empty() || coords.size() > 2) throw ConfigError("tv_direct_marginal: use one or two coordinates");
  for (std::size_t c : coords) {
    if (c >= a.dim()) throw ConfigError("tv_direct_marginal: coordinate out of range");
  }
  const auto sa = marginal_samples(a, t, coords);
  const auto sb = marginal_samples(b, t, coords);
  return coords.size() == 1 ? tv_histogram(sa, sb, bins) : tv_histogram_2d(sa, sb, bins);
}

// ---------------------------------------------------------------------------
// Rate fit
// ---------------------------------------------------------------------------

struct RateFit {
  std::vector<std::pair<double, double>> points;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_se = 0.0;
  double ci_low = 0.0;  ///< 95% interval on the slope
  double ci_high = 0.0;
};

/// Least squares of log(value) on log(N).
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 4) throw ConfigError("fit_rate: at least 4 points required");
  if (std::all_of(points.begin(), points.end(), [](const auto& p) { return p.second == 0.0; })) {
    throw DegenerateSeries("degenerate zero series: every value is 0, no rate to fit");
  }
  for (const auto& [n, v] : points) {
    if (!(n > 0.0) || !(v > 0.0)) throw ConfigError("fit_rate: N and values must be positive");
  }
  const auto np = static_cast<double>(points.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [n, v] : points) {
    mx += std::log(n);
    my += std::log(v);
  }
  mx /= np;
  my /= np;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& [n, v] : points) {
    const double dx = std::log(n) - mx;
    const double dy = std::log(v) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw ConfigError("fit_rate: N values must not all coincide");
  RateFit f;
  f.points = points;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double ss_res = std::max(syy - f.slope * sxy, 0.0);
  f.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  f.slope_se = std::sqrt(ss_res / (np - 2.0) / sxx);
  const boost::math::students_t dist(np - 2.0);
  const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
  f.ci_low = f.slope - tq * f.slope_se;
  f.ci_high = f.slope + tq * f.slope_se;
  return f;
}

}  // namespace mfchaos
