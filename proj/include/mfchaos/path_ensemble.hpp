#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mfchaos/errors.hpp"
#include "mfchaos/time_grid.hpp"

namespace mfchaos {

/// Read-only view of one path restricted to steps 0..last_step().
///
/// Model functionals only ever see this prefix, which is what makes them
/// non-anticipative: values after the current step are not addressable.
class PathView {
 public:
  PathView(std::span<const double> prefix, std::size_t dim) : data_(prefix), dim_(dim) {}

  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::size_t last_step() const { return data_.size() / dim_ - 1; }
  [[nodiscard]] std::span<const double> state(std::size_t k) const { return data_.subspan(k * dim_, dim_); }
  [[nodiscard]] std::span<const double> current() const { return state(last_step()); }
  [[nodiscard]] std::span<const double> data() const { return data_; }

 private:
  std::span<const double> data_;
  std::size_t dim_;
};

/// Block of sample paths in R^d on a TimeGrid, stored (path, step, coordinate) row-major.
class PathEnsemble {
 public:
  PathEnsemble(std::size_t n_paths, std::size_t dim, TimeGrid grid)
      : n_paths_(n_paths), dim_(dim), grid_(grid) {
    if (n_paths == 0) throw ConfigError("PathEnsemble: n_paths must be positive");
    if (dim == 0) throw ConfigError("PathEnsemble: dim must be positive");
    values_.assign(n_paths_ * grid_.n_points() * dim_, 0.0);
  }

  [[nodiscard]] std::size_t n_paths() const { return n_paths_; }
  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] const TimeGrid& grid() const { return grid_; }

  [[nodiscard]] double& at(std::size_t path, std::size_t step, std::size_t coord) {
    return values_[offset(path, step) + coord];
  }
  [[nodiscard]] double at(std::size_t path, std::size_t step, std::size_t coord) const {
    return values_[offset(path, step) + coord];
  }

  [[nodiscard]] std::span<double> state(std::size_t path, std::size_t step) {
    return {values_.data() + offset(path, step), dim_};
  }
  [[nodiscard]] std::span<const double> state(std::size_t path, std::size_t step) const {
    return {values_.data() + offset(path, step), dim_};
  }

  /// Path `path` restricted to steps 0..step.
  [[nodiscard]] PathView prefix(std::size_t path, std::size_t step) const {
    return PathView({values_.data() + offset(path, 0), (step + 1) * dim_}, dim_);
  }

  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<double> values() { return values_; }

  friend bool operator==(const PathEnsemble& a, const PathEnsemble& b) {
    return a.n_paths_ == b.n_paths_ && a.dim_ == b.dim_ && a.grid_ == b.grid_ && a.values_ == b.values_;
  }

 private:
  [[nodiscard]] std::size_t offset(std::size_t path, std::size_t step) const {
    return (path * grid_.n_points() + step) * dim_;
  }

  std::size_t n_paths_;
  std::size_t dim_;
  TimeGrid grid_;
  std::vector<double> values_;
};

/// Equal-weight empirical measure over all paths of an ensemble, seen at `step`.
class MeasureView {
 public:
  MeasureView(const PathEnsemble& ensemble, std::size_t step) : ensemble_(&ensemble), step_(step) {}

  [[nodiscard]] std::size_t size() const { return ensemble_->n_paths(); }
  [[nodiscard]] std::size_t step() const { return step_; }
  [[nodiscard]] std::size_t dim() const { return ensemble_->dim(); }
  [[nodiscard]] double time() const { return ensemble_->grid().time(step_); }
  [[nodiscard]] PathView atom(std::size_t j) const { return ensemble_->prefix(j, step_); }
  [[nodiscard]] std::span<const double> atom_state(std::size_t j) const { return ensemble_->state(j, step_); }
  [[nodiscard]] const PathEnsemble& ensemble() const { return *ensemble_; }

 private:
  const PathEnsemble* ensemble_;
  std::size_t step_;
};

// ---------------------------------------------------------------------------
// Serialization
//
// Binary layout (native little-endian):
//   char[8]  magic "MFCENS01"
//   uint64   n_paths
//   uint64   dim
//   float64  t_start
//   float64  t_end
//   uint64   n_steps
//   float64  values[n_paths][n_steps + 1][dim]
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 8> kEnsembleMagic{'M', 'F', 'C', 'E', 'N', 'S', '0', '1'};

namespace detail {
template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ConfigError("ensemble file truncated");
  return v;
}
}  // namespace detail

inline void write_binary(std::ostream& os, const PathEnsemble& e) {
  static_assert(std::endian::native == std::endian::little, "binary ensemble format is little-endian");
  os.write(kEnsembleMagic.data(), kEnsembleMagic.size());
  detail::put<std::uint64_t>(os, e.n_paths());
  detail::put<std::uint64_t>(os, e.dim());
  detail::put<double>(os, e.grid().t_start());
  detail::put<double>(os, e.grid().t_end());
  detail::put<std::uint64_t>(os, e.grid().n_steps());
  const auto v = e.values();
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline PathEnsemble read_binary(std::istream& is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kEnsembleMagic) throw ConfigError("not an ensemble file (bad magic)");
  const auto n_paths = detail::get<std::uint64_t>(is);
  const auto dim = detail::get<std::uint64_t>(is);
  const auto t0 = detail::get<double>(is);
  const auto t1 = detail::get<double>(is);
  const auto n_steps = detail::get<std::uint64_t>(is);
  PathEnsemble e(n_paths, dim, TimeGrid(t0, t1, n_steps));
  auto v = e.values();
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw ConfigError("ensemble file truncated");
  return e;
}

inline void save_binary(const std::string& path, const PathEnsemble& e) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  write_binary(os, e);
}

inline PathEnsemble load_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  return read_binary(is);
}

/// CSV with one row per (path, step): path,step,t,x0,...,x{d-1}.
inline void write_csv(std::ostream& os, const PathEnsemble& e) {
  os << "path,step,t";
  for (std::size_t c = 0; c < e.dim(); ++c) os << ",x" << c;
  os << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < e.n_paths(); ++i) {
    for (std::size_t k = 0; k < e.grid().n_points(); ++k) {
      os << i << ',' << k << ',' << e.grid().time(k);
      for (double x : e.state(i, k)) os << ',' << x;
      os << '\n';
    }
  }
}

}  // namespace mfchaos
