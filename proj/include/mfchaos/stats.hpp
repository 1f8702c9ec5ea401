#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace mfchaos {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

/// Sample mean and its standard error, accumulated in index order.
inline MeanSe mean_se(std::span<const double> x) {
  MeanSe r;
  if (x.empty()) return r;
  double s = 0.0;
  for (double v : x) s += v;
  r.mean = s / static_cast<double>(x.size());
  if (x.size() < 2) return r;
  double ss = 0.0;
  for (double v : x) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
  return r;
}

}  // namespace mfchaos
