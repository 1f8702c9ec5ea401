#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mfchaos/drift_eval.hpp"
#include "mfchaos/parallel.hpp"

namespace mfchaos {

/// Frozen empirical approximation of the McKean limit path-law.
class ReferenceLaw {
 public:
  struct Provenance {
    std::string model_id;
    std::uint64_t master_seed = 0;
    std::size_t n_picard = 0;  ///< 0: supplied externally, not built by Picard iteration
    double picard_tolerance = 0.0;
  };

  ReferenceLaw(PathEnsemble ensemble, Provenance provenance, std::vector<double> diagnostics = {})
      : ensemble_(std::move(ensemble)), provenance_(std::move(provenance)), diagnostics_(std::move(diagnostics)) {}

  /// Law given directly by an ensemble (point masses, hand-built test laws).
  static ReferenceLaw from_ensemble(PathEnsemble ensemble, std::string model_id = "external") {
    return ReferenceLaw(std::move(ensemble), Provenance{std::move(model_id), 0, 0, 0.0});
  }

  [[nodiscard]] const PathEnsemble& ensemble() const { return ensemble_; }
  [[nodiscard]] std::size_t size() const { return ensemble_.n_paths(); }
  [[nodiscard]] const TimeGrid& grid() const { return ensemble_.grid(); }
  [[nodiscard]] const Provenance& provenance() const { return provenance_; }
  /// Drift-change diagnostic recorded after each Picard iteration (index 0 is iteration 0).
  [[nodiscard]] const std::vector<double>& diagnostics() const { return diagnostics_; }
  [[nodiscard]] double final_diagnostic() const { return diagnostics_.empty() ? 0.0 : diagnostics_.back(); }
  [[nodiscard]] bool converged() const {
    return provenance_.n_picard == 0 || final_diagnostic() <= provenance_.picard_tolerance;
  }

  /// Law step corresponding to grid point k of `grid`; throws if the law cannot serve that grid.
  [[nodiscard]] std::size_t law_step(const TimeGrid& grid, std::size_t k) const {
    return ensemble_.grid().index_of(grid.time(k));
  }

  /// Throws ConfigError unless every point of `grid` is a point of the law's grid.
  void check_compatible(const TimeGrid& grid) const {
    const TimeGrid& g = ensemble_.grid();
    const double ratio = grid.step() / g.step();
    const double r = std::round(ratio);
    if (r < 1.0 || std::abs(ratio - r) > 1e-9 * r || grid.t_start() < g.t_start() ||
        grid.t_end() > g.t_end() + 1e-12 * g.t_end() || !g.contains_point(grid.t_start())) {
      std::ostringstream os;
      os << "grid mismatch: law grid [" << g.t_start() << ", " << g.t_end() << "] / " << g.n_steps()
         << " steps cannot serve grid [" << grid.t_start() << ", " << grid.t_end() << "] / " << grid.n_steps()
         << " steps";
      throw ConfigError(os.str());
    }
  }

 private:
  PathEnsemble ensemble_;
  Provenance provenance_;
  std::vector<double> diagnostics_;
};

struct LawDriftOptions {
  double table_spacing = 0.025;      ///< node spacing of the tabulated drift
  std::size_t max_table_nodes = 8192;
  bool allow_table = true;
};

/// B(t, x; law_t) along a target grid, for a frozen reference law.
///
/// When the model declares a law coordinate and has a batched evaluator, the
/// drift is tabulated per time point on a uniform node grid covering the law's
/// atoms and read back by 4-point Lagrange interpolation; queries outside the
/// table fall back to direct evaluation against the atoms.
class LawDrift {
 public:
  LawDrift(const ModelSpec& model, const ReferenceLaw& law, const TimeGrid& grid, const Executor& exec = Executor{},
           LawDriftOptions opts = {})
      : model_(&model), law_(&law), grid_(grid), m_(model.noise_dim) {
    law.check_compatible(grid);
    if (law.ensemble().dim() != model.state_dim) {
      throw ConfigError("reference law dimension does not match model state dimension");
    }
    if (model.interaction_free()) return;
    steps_.resize(grid.n_steps());
    exec.for_each_index(grid.n_steps(), [&](std::size_t k) { build_step(k, opts); });
  }

  // Holds a pointer to the law; it must outlive this object.
  LawDrift(const ModelSpec&, ReferenceLaw&&, const TimeGrid&, const Executor& = Executor{}, LawDriftOptions = {}) = delete;

  [[nodiscard]] const TimeGrid& grid() const { return grid_; }
  [[nodiscard]] const ReferenceLaw& law() const { return *law_; }
  [[nodiscard]] bool tabulated() const { return !steps_.empty() && !steps_.front().nodes.empty(); }

  /// Drift for one path prefix ending at target step k.
  void evaluate(std::size_t k, const PathView& self, std::span<double> out) const {
    if (model_->interaction_free()) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    const Step& s = steps_.at(k);
    if (!s.nodes.empty() && interpolate(s, self.current()[*model_->law_coordinate], out)) return;
    direct(k, s, self, out);
  }

  /// Drift for all paths of `e` at target step k (n x m rows).
  void evaluate_all(std::size_t k, const PathEnsemble& e, std::span<double> out) const {
    for (std::size_t i = 0; i < e.n_paths(); ++i) evaluate(k, e.prefix(i, k), out.subspan(i * m_, m_));
  }

 private:
  struct Step {
    double lo = 0.0;
    double spacing = 0.0;
    std::vector<double> nodes;  // node values, G x m
    std::size_t n_nodes = 0;
    std::vector<double> atoms;  // contiguous atom states, for batched direct evaluation
  };

  void build_step(std::size_t k, const LawDriftOptions& opts) {
    Step& s = steps_[k];
    const std::size_t lk = law_->law_step(grid_, k);
    const double t = grid_.time(k);
    const bool batch = static_cast<bool>(model_->measure_drift_batch);
    if (batch) gather_states(law_->ensemble(), lk, s.atoms);
    if (!opts.allow_table || !batch || !model_->law_coordinate) return;

    const std::size_t c = *model_->law_coordinate;
    const std::size_t d = model_->state_dim;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t j = 0; j < law_->size(); ++j) {
      lo = std::min(lo, s.atoms[j * d + c]);
      hi = std::max(hi, s.atoms[j * d + c]);
    }
    double h = opts.table_spacing;
    const double pad = 0.5;
    lo -= pad + 2.0 * h;
    hi += pad + 2.0 * h;
    auto n_nodes = static_cast<std::size_t>(std::ceil((hi - lo) / h)) + 1;
    if (n_nodes > opts.max_table_nodes) {
      n_nodes = opts.max_table_nodes;
      h = (hi - lo) / static_cast<double>(n_nodes - 1);
    }
    std::vector<double> queries(n_nodes * d, 0.0);
    for (std::size_t g = 0; g < n_nodes; ++g) queries[g * d + c] = lo + static_cast<double>(g) * h;
    s.nodes.assign(n_nodes * m_, 0.0);
    model_->measure_drift_batch(t, queries, s.atoms, s.nodes);
    s.lo = lo;
    s.n_nodes = n_nodes;
    s.spacing = h;
  }

  bool interpolate(const Step& s, double x, std::span<double> out) const {
    const double pos = (x - s.lo) / s.spacing;
    if (!(pos >= 1.0) || !(pos < static_cast<double>(s.n_nodes) - 2.0)) return false;
    const auto g = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(g);
    const double wm = -f * (f - 1.0) * (f - 2.0) / 6.0;
    const double w0 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
    const double w1 = -(f + 1.0) * f * (f - 2.0) / 2.0;
    const double w2 = (f + 1.0) * f * (f - 1.0) / 6.0;
    const double* v = s.nodes.data() + (g - 1) * m_;
    for (std::size_t j = 0; j < m_; ++j) {
      out[j] = wm * v[j] + w0 * v[m_ + j] + w1 * v[2 * m_ + j] + w2 * v[3 * m_ + j];
    }
    return true;
  }

  void direct(std::size_t k, const Step& s, const PathView& self, std::span<double> out) const {
    const double t = grid_.time(k);
    if (model_->measure_drift_batch) {
      model_->measure_drift_batch(t, self.current(), s.atoms, out.first(m_));
      return;
    }
    const MeasureView mu(law_->ensemble(), law_->law_step(grid_, k));
    model_->measure_drift(t, self, mu, out);
  }

  const ModelSpec* model_;
  const ReferenceLaw* law_;
  TimeGrid grid_;
  std::size_t m_;
  std::vector<Step> steps_;
};

}  // namespace mfchaos
