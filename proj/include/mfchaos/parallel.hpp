#pragma once

#include <cstddef>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>
#include <tbb/partitioner.h>
#include <tbb/task_arena.h>

#include "mfchaos/errors.hpp"

namespace mfchaos {

/// Runs index-parallel loops on a fixed number of workers.
///
/// Bodies must write results into per-index slots; callers reduce afterwards
/// in index order, so results never depend on the worker count.
class Executor {
 public:
  explicit Executor(std::size_t workers = 1) : workers_(workers == 0 ? 1 : workers) {
    if (workers_ > 1) {
      // Lift TBB's default cap (the hardware concurrency) to the requested count.
      control_ = std::make_shared<tbb::global_control>(tbb::global_control::max_allowed_parallelism, workers_);
      arena_ = std::make_shared<tbb::task_arena>(static_cast<int>(workers_));
    }
  }

  [[nodiscard]] std::size_t workers() const { return workers_; }

  template <class Body>
  void for_each_index(std::size_t n, Body&& body) const {
    if (workers_ == 1 || n < 2) {
      for (std::size_t i = 0; i < n; ++i) body(i);
      return;
    }
    arena_->execute([&] {
      tbb::parallel_for(
          tbb::blocked_range<std::size_t>(0, n),
          [&](const tbb::blocked_range<std::size_t>& r) {
            for (std::size_t i = r.begin(); i != r.end(); ++i) body(i);
          },
          tbb::static_partitioner{});
    });
  }

 private:
  std::size_t workers_;
  std::shared_ptr<tbb::global_control> control_;
  std::shared_ptr<tbb::task_arena> arena_;
};

inline constexpr const char* kWorkersEnv = "MFCHAOS_WORKERS";

/// Worker count precedence: explicit flag, then MFCHAOS_WORKERS, then config value.
inline std::size_t resolve_workers(std::optional<std::size_t> flag, std::size_t config_value) {
  if (flag) return *flag == 0 ? 1 : *flag;
  if (const char* env = std::getenv(kWorkersEnv); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || v == 0) {
      throw ConfigError(std::string(kWorkersEnv) + " must be a positive integer, got '" + env + "'");
    }
    return v;
  }
  return config_value == 0 ? 1 : config_value;
}

}  // namespace mfchaos
