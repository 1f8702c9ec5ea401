#pragma once

#include <cmath>
#include <vector>

#include "mfchaos/mfchaos.hpp"

namespace testutil {

inline double sample_var(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline mfchaos::ReferenceLaw point_law(std::size_t dim, const mfchaos::TimeGrid& g, double value = 0.0) {
  mfchaos::PathEnsemble e(1, dim, g);
  for (double& x : e.values()) x = value;
  return mfchaos::ReferenceLaw::from_ensemble(std::move(e));
}

}  // namespace testutil
