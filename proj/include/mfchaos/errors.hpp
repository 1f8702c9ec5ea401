#pragma once

#include <stdexcept>
#include <string>

namespace mfchaos {

/// Invalid run description: bad grid, incompatible law, violated precondition.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A replication produced a non-finite coefficient or state.
class SimulationError : public std::runtime_error {
 public:
  explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

/// Model coefficients failed a construction-time audit (e.g. singular sigma).
class ModelError : public std::invalid_argument {
 public:
  explicit ModelError(const std::string& what) : std::invalid_argument(what) {}
};

/// A rate fit was asked for a series that carries no information (all zero).
class DegenerateSeries : public std::domain_error {
 public:
  explicit DegenerateSeries(const std::string& what) : std::domain_error(what) {}
};

}  // namespace mfchaos
