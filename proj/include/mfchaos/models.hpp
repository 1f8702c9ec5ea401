#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mfchaos/errors.hpp"
#include "mfchaos/model_spec.hpp"
#include "mfchaos/rng.hpp"

namespace mfchaos {

/// b(t, x, y) -> out (state-to-state interaction kernel).
using PairKernel = std::function<void(double t, std::span<const double> x, std::span<const double> y,
                                      std::span<double> out)>;
/// sigma(t, x) -> out, row-major square matrix.
using SigmaFn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;
/// Mean of the kernel over the atoms, for every query: out[q] = (1/n_a) sum_j b(t, x_q, y_j).
using KernelMeanBatch = std::function<void(double t, std::span<const double> queries,
                                           std::span<const double> atoms, std::span<double> out)>;

/// dX = (int b(t, X, y) mu_t(dy)) dt + sigma(t, X) dW in R^d, m = d.
struct BoundedKernelModel {
  std::string id;
  std::size_t dim = 1;
  PairKernel kernel;
  SigmaFn sigma;
  double lambda = 1.0;  ///< lower ellipticity bound of sigma sigma^*
  double Lambda = 1.0;  ///< upper ellipticity bound of sigma sigma^*
  double kernel_bound = 0.0;  ///< ||sigma^{-1} b||_inf, supplied analytically
  KernelMeanBatch kernel_mean;  ///< optional fast path for the kernel mean
  std::optional<std::size_t> law_coordinate;  ///< b depends on x only through this coordinate
  bool zero_interaction = false;
  bool constant_sigma = false;
};

/// Position/velocity model in R^{2m}: dY = V dt, dV = (int b) dt + sigma dW.
struct KineticModel {
  std::string id;
  std::size_t m = 1;
  PairKernel kernel;  ///< b(t, (y,v), (y',v')) in R^m
  SigmaFn sigma;      ///< m x m, positive definite
  double kernel_bound = 0.0;
  KernelMeanBatch kernel_mean;
  std::optional<std::size_t> law_coordinate;
  bool zero_interaction = false;
  bool constant_sigma = false;
};

namespace detail {

/// In-place inverse of an n x n row-major matrix; false if numerically singular.
inline bool invert(std::span<double> a, std::size_t n) {
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (!(scale > 0.0) || !std::isfinite(scale)) return false;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    if (std::abs(a[piv * n + col]) <= 1e-12 * scale) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a[piv * n + c], a[col * n + c]);
        std::swap(inv[piv * n + c], inv[col * n + c]);
      }
    }
    const double p = a[col * n + col];
    for (std::size_t c = 0; c < n; ++c) {
      a[col * n + c] /= p;
      inv[col * n + c] /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a[r * n + c] -= f * a[col * n + c];
        inv[r * n + c] -= f * inv[col * n + c];
      }
    }
  }
  std::copy(inv.begin(), inv.end(), a.begin());
  return true;
}

inline void mat_vec(std::span<const double> a, std::span<const double> x, std::span<double> out, std::size_t n) {
  for (std::size_t r = 0; r < n; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += a[r * n + c] * x[c];
    out[r] = acc;
  }
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// mean_j tanh(y_j[c] - x_q[c]) for coordinates c in [0, n_coords), written to out (n_q x out_stride)
/// at column offset 0..n_coords-1, scaled by kappa.
///
/// Uses tanh(y - x) = (e^{2y} - e^{2x}) / (e^{2y} + e^{2x}) with exponentials
/// centred on the atoms' midpoint, so each pair costs one division.
inline void tanh_kernel_mean(double kappa, std::size_t state_dim, std::size_t n_coords,
                             std::span<const double> queries, std::span<const double> atoms,
                             std::span<double> out, std::size_t out_stride) {
  const std::size_t nq = queries.size() / state_dim;
  const std::size_t na = atoms.size() / state_dim;
  const double inv_na = 1.0 / static_cast<double>(na);
  std::vector<double> ea(na);
  for (std::size_t c = 0; c < n_coords; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t j = 0; j < na; ++j) {
      lo = std::min(lo, atoms[j * state_dim + c]);
      hi = std::max(hi, atoms[j * state_dim + c]);
    }
    const double centre = 0.5 * (lo + hi);
    const bool atoms_ok = (hi - lo) < 600.0;
    if (atoms_ok) {
      for (std::size_t j = 0; j < na; ++j) ea[j] = std::exp(2.0 * (atoms[j * state_dim + c] - centre));
    }
    for (std::size_t q = 0; q < nq; ++q) {
      const double xq = queries[q * state_dim + c];
      double s0 = 0.0;
      double s1 = 0.0;
      double s2 = 0.0;
      double s3 = 0.0;
      if (atoms_ok && std::abs(xq - centre) < 300.0) {
        const double eq = std::exp(2.0 * (xq - centre));
        std::size_t j = 0;
        for (; j + 4 <= na; j += 4) {
          s0 += (ea[j] - eq) / (ea[j] + eq);
          s1 += (ea[j + 1] - eq) / (ea[j + 1] + eq);
          s2 += (ea[j + 2] - eq) / (ea[j + 2] + eq);
          s3 += (ea[j + 3] - eq) / (ea[j + 3] + eq);
        }
        for (; j < na; ++j) s0 += (ea[j] - eq) / (ea[j] + eq);
      } else {
        for (std::size_t j = 0; j < na; ++j) s0 += std::tanh(atoms[j * state_dim + c] - xq);
      }
      out[q * out_stride + c] = kappa * (((s0 + s1) + (s2 + s3)) * inv_na);
    }
  }
}

inline void sample_state(CounterStream& rng, std::span<double> x, double scale) {
  for (double& v : x) v = scale * rng.normal();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Shipped kernels
// ---------------------------------------------------------------------------

/// b(x, y) = kappa * tanh(y - x) componentwise, sigma = s I in R^d.
inline BoundedKernelModel tanh_kernel_model(std::size_t dim = 1, double kappa = 1.0, double sigma = 1.0) {
  if (dim == 0) throw ModelError("tanh model: dim must be positive");
  if (!(sigma > 0.0)) throw ModelError("tanh model: sigma must be positive");
  BoundedKernelModel mdl;
  std::ostringstream id;
  id << "tanh_d" << dim << "_k" << kappa << "_s" << sigma;
  mdl.id = id.str();
  mdl.dim = dim;
  mdl.kernel = [kappa](double, std::span<const double> x, std::span<const double> y, std::span<double> out) {
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = kappa * std::tanh(y[c] - x[c]);
  };
  mdl.sigma = [sigma, dim](double, std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t c = 0; c < dim; ++c) out[c * dim + c] = sigma;
  };
  mdl.lambda = sigma * sigma;
  mdl.Lambda = sigma * sigma;
  mdl.kernel_bound = std::abs(kappa) * std::sqrt(static_cast<double>(dim)) / sigma;
  mdl.kernel_mean = [kappa, dim](double, std::span<const double> q, std::span<const double> a, std::span<double> out) {
    detail::tanh_kernel_mean(kappa, dim, dim, q, a, out, dim);
  };
  if (dim == 1) mdl.law_coordinate = 0;
  mdl.zero_interaction = (kappa == 0.0);
  mdl.constant_sigma = true;
  return mdl;
}

/// b(x, y) = v (constant drift control), sigma = s I.
inline BoundedKernelModel constant_kernel_model(std::vector<double> v, double sigma = 1.0) {
  if (v.empty()) throw ModelError("constant model: drift vector must be non-empty");
  if (!(sigma > 0.0)) throw ModelError("constant model: sigma must be positive");
  BoundedKernelModel mdl;
  const std::size_t dim = v.size();
  mdl.id = "constant_d" + std::to_string(dim);
  mdl.dim = dim;
  mdl.kernel = [v](double, std::span<const double>, std::span<const double>, std::span<double> out) {
    std::copy(v.begin(), v.end(), out.begin());
  };
  mdl.sigma = [sigma, dim](double, std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t c = 0; c < dim; ++c) out[c * dim + c] = sigma;
  };
  mdl.lambda = sigma * sigma;
  mdl.Lambda = sigma * sigma;
  mdl.kernel_bound = detail::norm2(v) / sigma;
  mdl.kernel_mean = [v, dim](double, std::span<const double> q, std::span<const double>, std::span<double> out) {
    for (std::size_t i = 0; i < q.size() / dim; ++i) std::copy(v.begin(), v.end(), out.begin() + i * dim);
  };
  mdl.law_coordinate = 0;
  mdl.constant_sigma = true;
  return mdl;
}

/// b = 0: the zero-interaction control.
inline BoundedKernelModel zero_kernel_model(std::size_t dim = 1, double sigma = 1.0) {
  BoundedKernelModel mdl = constant_kernel_model(std::vector<double>(dim, 0.0), sigma);
  mdl.id = "zero_d" + std::to_string(dim);
  mdl.zero_interaction = true;
  return mdl;
}

/// b(x, y) = kappa (y - x): unbounded, used only for closed-form checks.
inline BoundedKernelModel linear_kernel_model(std::size_t dim = 1, double kappa = 1.0, double sigma = 1.0) {
  BoundedKernelModel mdl;
  mdl.id = "linear_d" + std::to_string(dim);
  mdl.dim = dim;
  mdl.kernel = [kappa](double, std::span<const double> x, std::span<const double> y, std::span<double> out) {
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = kappa * (y[c] - x[c]);
  };
  mdl.sigma = [sigma, dim](double, std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t c = 0; c < dim; ++c) out[c * dim + c] = sigma;
  };
  mdl.lambda = sigma * sigma;
  mdl.Lambda = sigma * sigma;
  mdl.kernel_bound = std::numeric_limits<double>::infinity();
  mdl.kernel_mean = [kappa, dim](double, std::span<const double> q, std::span<const double> a, std::span<double> out) {
    const std::size_t na = a.size() / dim;
    std::vector<double> mean(dim, 0.0);
    for (std::size_t j = 0; j < na; ++j) {
      for (std::size_t c = 0; c < dim; ++c) mean[c] += a[j * dim + c];
    }
    for (double& v : mean) v /= static_cast<double>(na);
    for (std::size_t i = 0; i < q.size() / dim; ++i) {
      for (std::size_t c = 0; c < dim; ++c) out[i * dim + c] = kappa * (mean[c] - q[i * dim + c]);
    }
  };
  if (dim == 1) mdl.law_coordinate = 0;
  mdl.constant_sigma = true;
  return mdl;
}

/// b((y,v), (y',v')) = kappa * tanh(y' - y) componentwise on positions; sigma = s I_m.
inline KineticModel kinetic_tanh_model(std::size_t m = 1, double kappa = 1.0, double sigma = 1.0) {
  if (m == 0) throw ModelError("kinetic model: m must be positive");
  if (!(sigma > 0.0)) throw ModelError("kinetic model: sigma must be positive");
  KineticModel mdl;
  std::ostringstream id;
  id << "kinetic_tanh_m" << m << "_k" << kappa << "_s" << sigma;
  mdl.id = id.str();
  mdl.m = m;
  mdl.kernel = [kappa, m](double, std::span<const double> x, std::span<const double> y, std::span<double> out) {
    for (std::size_t c = 0; c < m; ++c) out[c] = kappa * std::tanh(y[c] - x[c]);
  };
  mdl.sigma = [sigma, m](double, std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t c = 0; c < m; ++c) out[c * m + c] = sigma;
  };
  mdl.kernel_bound = std::abs(kappa) * std::sqrt(static_cast<double>(m)) / sigma;
  mdl.kernel_mean = [kappa, m](double, std::span<const double> q, std::span<const double> a, std::span<double> out) {
    detail::tanh_kernel_mean(kappa, 2 * m, m, q, a, out, m);
  };
  if (m == 1) mdl.law_coordinate = 0;
  mdl.zero_interaction = (kappa == 0.0);
  mdl.constant_sigma = true;
  return mdl;
}

inline KineticModel kinetic_zero_model(std::size_t m = 1, double sigma = 1.0) {
  KineticModel mdl = kinetic_tanh_model(m, 0.0, sigma);
  mdl.id = "kinetic_zero_m" + std::to_string(m);
  return mdl;
}

// ---------------------------------------------------------------------------
// ModelSpec construction
// ---------------------------------------------------------------------------

namespace detail {

inline void check_sigma_invertible(const SigmaFn& sigma, std::size_t n, std::size_t state_dim,
                                   const std::string& id) {
  CounterStream rng(0x51ab1e5eedULL);
  std::vector<double> x(state_dim);
  std::vector<double> s(n * n);
  for (int trial = 0; trial < 64; ++trial) {
    sample_state(rng, x, 3.0);
    const double t = rng.uniform(0.0, 2.0);
    sigma(t, x, s);
    if (!invert(s, n)) {
      std::ostringstream os;
      os << "model '" << id << "': sigma is not invertible at a sampled point (t=" << t << ")";
      throw ModelError(os.str());
    }
  }
}

/// Builds B = sigma^{-1}(t, x_t) * mean_j b(t, x_t, y_j) for a kernel model.
inline void attach_kernel_drift(ModelSpec& spec, std::size_t kdim, const PairKernel& kernel, const SigmaFn& sigma,
                                const KernelMeanBatch& kernel_mean, bool constant_sigma) {
  const std::size_t sigma_dim = kdim;
  auto inv_sigma_at = [sigma, sigma_dim](double t, std::span<const double> x, std::vector<double>& buf) {
    buf.resize(sigma_dim * sigma_dim);
    sigma(t, x, buf);
    if (!invert(buf, sigma_dim)) throw SimulationError("sigma became singular during evaluation");
  };
  std::shared_ptr<std::vector<double>> fixed_inverse;
  if (constant_sigma) {
    fixed_inverse = std::make_shared<std::vector<double>>();
    std::vector<double> x0(spec.state_dim, 0.0);
    inv_sigma_at(0.0, x0, *fixed_inverse);
  }
  spec.measure_drift = [kernel, inv_sigma_at, fixed_inverse, kdim](double t, const PathView& self,
                                                                    const MeasureView& mu, std::span<double> out) {
    const auto x = self.current();
    std::vector<double> acc(kdim, 0.0);
    std::vector<double> tmp(kdim);
    for (std::size_t j = 0; j < mu.size(); ++j) {
      kernel(t, x, mu.atom_state(j), tmp);
      for (std::size_t c = 0; c < kdim; ++c) acc[c] += tmp[c];
    }
    for (double& v : acc) v /= static_cast<double>(mu.size());
    std::vector<double> inv;
    if (fixed_inverse) {
      inv = *fixed_inverse;
    } else {
      inv_sigma_at(t, x, inv);
    }
    mat_vec(inv, acc, out, kdim);
  };
  if (kernel_mean) {
    const std::size_t d = spec.state_dim;
    spec.measure_drift_batch = [kernel_mean, inv_sigma_at, fixed_inverse, kdim, d](
                                   double t, std::span<const double> q, std::span<const double> a,
                                   std::span<double> out) {
      const std::size_t nq = q.size() / d;
      std::vector<double> means(nq * kdim);
      kernel_mean(t, q, a, means);
      std::vector<double> inv;
      for (std::size_t i = 0; i < nq; ++i) {
        if (fixed_inverse) {
          if (inv.empty()) inv = *fixed_inverse;
        } else {
          inv_sigma_at(t, q.subspan(i * d, d), inv);
        }
        mat_vec(inv, std::span<const double>(means).subspan(i * kdim, kdim), out.subspan(i * kdim, kdim), kdim);
      }
    };
  }
}

}  // namespace detail

/// c = 0, A = sigma, B(t, x, mu) = int sigma^{-1}(t, x_t) b(t, x_t, y_t) mu(dy).
/// No bound is required; use make_bounded_kernel_spec for the bounded class.
inline ModelSpec make_kernel_spec(const BoundedKernelModel& model) {
  if (model.dim == 0) throw ModelError("kernel model: dim must be positive");
  if (!model.sigma) throw ModelError("kernel model '" + model.id + "' has no sigma");
  detail::check_sigma_invertible(model.sigma, model.dim, model.dim, model.id);
  ModelSpec spec;
  spec.id = model.id;
  spec.state_dim = model.dim;
  spec.noise_dim = model.dim;
  const auto sigma = model.sigma;
  spec.diffusion = [sigma](double t, const PathView& self, std::span<double> out) { sigma(t, self.current(), out); };
  if (std::isfinite(model.kernel_bound)) spec.drift_bound = model.kernel_bound;
  if (model.zero_interaction) return spec;
  if (!model.kernel) throw ModelError("kernel model '" + model.id + "' has no kernel");
  detail::attach_kernel_drift(spec, model.dim, model.kernel, model.sigma, model.kernel_mean, model.constant_sigma);
  spec.law_coordinate = model.law_coordinate;
  return spec;
}

inline ModelSpec make_bounded_kernel_spec(const BoundedKernelModel& model) {
  if (!std::isfinite(model.kernel_bound) || model.kernel_bound < 0.0) {
    throw ModelError("model '" + model.id + "': kernel_bound must be finite and non-negative");
  }
  return make_kernel_spec(model);
}

/// State (y, v) in R^{2m}: c = (v, 0), A = (0; sigma), B = int sigma^{-1} b mu.
inline ModelSpec make_kinetic_spec(const KineticModel& model) {
  if (model.m == 0) throw ModelError("kinetic model: m must be positive");
  if (!model.sigma) throw ModelError("kinetic model '" + model.id + "' has no sigma");
  if (!std::isfinite(model.kernel_bound) || model.kernel_bound < 0.0) {
    throw ModelError("model '" + model.id + "': kernel_bound must be finite and non-negative");
  }
  const std::size_t m = model.m;
  detail::check_sigma_invertible(model.sigma, m, 2 * m, model.id);
  ModelSpec spec;
  spec.id = model.id;
  spec.state_dim = 2 * m;
  spec.noise_dim = m;
  spec.drift = [m](double, const PathView& self, std::span<double> out) {
    const auto x = self.current();
    for (std::size_t c = 0; c < m; ++c) {
      out[c] = x[m + c];
      out[m + c] = 0.0;
    }
  };
  const auto sigma = model.sigma;
  spec.diffusion = [sigma, m](double t, const PathView& self, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> s(m * m);
    sigma(t, self.current(), s);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < m; ++c) out[(m + r) * m + c] = s[r * m + c];
    }
  };
  spec.drift_bound = model.kernel_bound;
  if (model.zero_interaction) return spec;
  if (!model.kernel) throw ModelError("kinetic model '" + model.id + "' has no kernel");
  detail::attach_kernel_drift(spec, m, model.kernel, model.sigma, model.kernel_mean, model.constant_sigma);
  spec.law_coordinate = model.law_coordinate;
  return spec;
}

/// Concentration constant of the bounded-kernel corollaries: 2 ||sigma^{-1} b||^2.
inline double beta_of(double kernel_bound) { return 2.0 * kernel_bound * kernel_bound; }
inline double beta_of(const BoundedKernelModel& m) { return beta_of(m.kernel_bound); }
inline double beta_of(const KineticModel& m) { return beta_of(m.kernel_bound); }
inline double beta_of(const ModelSpec& spec) {
  if (!spec.drift_bound) throw ModelError("model '" + spec.id + "' has no analytic drift bound");
  return beta_of(*spec.drift_bound);
}

// ---------------------------------------------------------------------------
// Random-sampling audits
// ---------------------------------------------------------------------------

struct AuditReport {
  std::size_t samples = 0;
  std::size_t ellipticity_violations = 0;
  std::size_t bound_violations = 0;
  double max_bound_ratio = 0.0;  ///< max ||sigma^{-1} b|| / kernel_bound over samples
  [[nodiscard]] bool ok() const { return ellipticity_violations == 0 && bound_violations == 0; }
};

/// Spot-checks lambda|xi|^2 <= xi.sigma sigma^* xi <= Lambda|xi|^2 and ||sigma^{-1} b|| <= kernel_bound.
/// Prints a warning to `warn` when anything is violated.
inline AuditReport audit_bounded_kernel(const BoundedKernelModel& model, std::size_t n_samples = 10000,
                                        std::uint64_t seed = 7, std::ostream* warn = &std::cerr) {
  AuditReport rep;
  CounterStream rng(detail::mix64(seed));
  const std::size_t d = model.dim;
  std::vector<double> x(d), y(d), xi(d), s(d * d), b(d), tmp(d);
  const double tol = 1e-12;
  for (std::size_t n = 0; n < n_samples; ++n) {
    const double t = rng.uniform(0.0, 2.0);
    detail::sample_state(rng, x, 3.0);
    detail::sample_state(rng, y, 3.0);
    detail::sample_state(rng, xi, 1.0);
    model.sigma(t, x, s);
    // xi . sigma sigma^* xi = |sigma^* xi|^2
    double q = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double v = 0.0;
      for (std::size_t r = 0; r < d; ++r) v += s[r * d + c] * xi[r];
      q += v * v;
    }
    const double xi2 = detail::norm2(xi) * detail::norm2(xi);
    if (q < model.lambda * xi2 * (1.0 - tol) || q > model.Lambda * xi2 * (1.0 + tol)) ++rep.ellipticity_violations;
    if (!model.zero_interaction) {
      model.kernel(t, x, y, b);
      if (!detail::invert(s, d)) {
        ++rep.ellipticity_violations;
        continue;
      }
      detail::mat_vec(s, b, tmp, d);
      const double nb = detail::norm2(tmp);
      const double ratio = model.kernel_bound > 0.0 ? nb / model.kernel_bound : (nb > 0.0 ? INFINITY : 0.0);
      rep.max_bound_ratio = std::max(rep.max_bound_ratio, ratio);
      if (nb > model.kernel_bound * (1.0 + tol)) ++rep.bound_violations;
    }
    ++rep.samples;
  }
  if (!rep.ok() && warn != nullptr) {
    *warn << "warning: model '" << model.id << "' audit failed: " << rep.ellipticity_violations
          << " ellipticity and " << rep.bound_violations << " kernel-bound violations in " << n_samples
          << " samples\n";
  }
  return rep;
}

}  // namespace mfchaos
