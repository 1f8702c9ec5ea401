#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfchaos/sde_engine.hpp"

namespace mfchaos {

struct PicardOptions {
  std::size_t min_paths = 1000;      ///< smallest accepted N_ref
  double tolerance = 1e-3;           ///< target for the drift-change diagnostic
  bool early_stop = true;            ///< stop once the diagnostic is below tolerance
  Executor executor{};
  std::ostream* warn = &std::cerr;   ///< receives the non-convergence warning; may be null
};

namespace detail {

/// max over left points k of mean_i |B(X^i_k; a) - B(X^i_k; b)|^2 along `paths`.
inline double drift_field_change(const LawDrift& a, const LawDrift& b, const PathEnsemble& paths, std::size_t m,
                                 const Executor& exec) {
  const std::size_t n_steps = paths.grid().n_steps();
  std::vector<double> per_step(n_steps, 0.0);
  exec.for_each_index(n_steps, [&](std::size_t k) {
    std::vector<double> ba(m), bb(m);
    double acc = 0.0;
    for (std::size_t i = 0; i < paths.n_paths(); ++i) {
      const PathView p = paths.prefix(i, k);
      a.evaluate(k, p, ba);
      b.evaluate(k, p, bb);
      for (std::size_t j = 0; j < m; ++j) acc += (ba[j] - bb[j]) * (ba[j] - bb[j]);
    }
    per_step[k] = acc / static_cast<double>(paths.n_paths());
  });
  return *std::max_element(per_step.begin(), per_step.end());
}

}  // namespace detail

/// Approximates the McKean path-law by Picard iteration on independent ensembles.
///
/// A driftless ensemble seeds the iteration; iteration j simulates N_ref
/// independent copies with the measure argument frozen to the previous
/// ensemble, on fresh RNG substreams. The recorded diagnostic for iteration j
/// is the sup over grid points of the mean-square change of the drift field
/// between the previous and the new law, evaluated along the new paths.
inline ReferenceLaw build_reference_law(const ModelSpec& model, std::size_t n_ref, std::size_t n_picard,
                                        const TimeGrid& grid, const InitSampler& init, const RngPlan& rng,
                                        const PicardOptions& opts = {}) {
  if (n_picard == 0) throw ConfigError("reference law: n_picard must be at least 1");
  if (n_ref < opts.min_paths) {
    throw ConfigError("reference law: N_ref=" + std::to_string(n_ref) + " is below the configured minimum " +
                      std::to_string(opts.min_paths));
  }
  SimulationOptions sim;
  sim.executor = opts.executor;

  ModelSpec driftless = model;
  driftless.measure_drift = nullptr;
  driftless.measure_drift_batch = nullptr;
  const ReferenceLaw seed_law =
      ReferenceLaw::from_ensemble(simulate_interacting(driftless, n_ref, grid, init, rng.substream(0), sim), model.id);

  std::vector<std::optional<ReferenceLaw>> laws(2);
  std::vector<double> diagnostics;
  const ReferenceLaw* prev_law = &seed_law;
  auto prev_drift = std::make_unique<LawDrift>(model, *prev_law, grid, opts.executor);
  std::size_t used = 0;
  for (std::size_t j = 0; j < n_picard; ++j) {
    PathEnsemble next = simulate_independent(model, n_ref, *prev_drift, init, rng.substream(j + 1), sim);
    auto& slot = laws[j % 2];
    slot.emplace(ReferenceLaw::from_ensemble(std::move(next), model.id));
    auto drift = std::make_unique<LawDrift>(model, *slot, grid, opts.executor);
    diagnostics.push_back(
        detail::drift_field_change(*drift, *prev_drift, slot->ensemble(), model.noise_dim, opts.executor));
    prev_law = &*slot;
    prev_drift = std::move(drift);
    used = j + 1;
    if (opts.early_stop && diagnostics.back() <= opts.tolerance) break;
  }

  ReferenceLaw law(prev_law->ensemble(),
                   ReferenceLaw::Provenance{model.id, rng.master_seed(), used, opts.tolerance}, diagnostics);
  if (!law.converged() && opts.warn != nullptr) {
    *opts.warn << "warning: reference law for '" << model.id << "' not converged after " << used
               << " Picard iterations: drift change " << law.final_diagnostic() << " > tolerance " << opts.tolerance
               << '\n';
  }
  return law;
}

// ---------------------------------------------------------------------------
// Persistence: <path> holds the binary ensemble, <path>.json the metadata sidecar.
// ---------------------------------------------------------------------------

inline void save_reference_law(const std::string& path, const ReferenceLaw& law, const std::string& model_hash) {
  save_binary(path, law.ensemble());
  nlohmann::ordered_json meta;
  meta["format"] = "mfchaos-reference-law/1";
  meta["model_id"] = law.provenance().model_id;
  meta["model_hash"] = model_hash;
  meta["master_seed"] = law.provenance().master_seed;
  meta["n_picard"] = law.provenance().n_picard;
  meta["picard_tolerance"] = law.provenance().picard_tolerance;
  meta["diagnostics"] = law.diagnostics();
  meta["converged"] = law.converged();
  meta["n_ref"] = law.size();
  meta["dim"] = law.ensemble().dim();
  meta["t_start"] = law.grid().t_start();
  meta["t_end"] = law.grid().t_end();
  meta["n_steps"] = law.grid().n_steps();
  std::ofstream os(path + ".json");
  if (!os) throw ConfigError("cannot write " + path + ".json");
  os << meta.dump(2) << '\n';
}

/// Loads a persisted law; when expected_hash is given it must match the sidecar.
inline ReferenceLaw load_reference_law(const std::string& path, const std::optional<std::string>& expected_hash = {}) {
  std::ifstream is(path + ".json");
  if (!is) throw ConfigError("missing reference-law sidecar " + path + ".json");
  const auto meta = nlohmann::json::parse(is);
  if (meta.value("format", "") != "mfchaos-reference-law/1") throw ConfigError(path + ".json: unknown format");
  if (expected_hash && meta.at("model_hash").get<std::string>() != *expected_hash) {
    throw ConfigError("reference law " + path + " was built for a different model (hash " +
                      meta.at("model_hash").get<std::string>() + ", expected " + *expected_hash + ")");
  }
  PathEnsemble e = load_binary(path);
  ReferenceLaw::Provenance prov{meta.at("model_id").get<std::string>(), meta.at("master_seed").get<std::uint64_t>(),
                                meta.at("n_picard").get<std::size_t>(), meta.at("picard_tolerance").get<double>()};
  return ReferenceLaw(std::move(e), std::move(prov), meta.at("diagnostics").get<std::vector<double>>());
}

}  // namespace mfchaos
