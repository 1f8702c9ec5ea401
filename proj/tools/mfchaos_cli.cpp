// Command-line driver for the studies. Exit status: 0 all checks pass,
// 1 a check fails, 2 configuration error, 3 simulation error.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mfchaos/mfchaos.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
};

int run(const std::string& study, const Flags& f) {
  using namespace mfchaos;
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  cfg.study = study;
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  cfg.workers = resolve_workers(f.workers, cfg.workers);
  cfg.validate();
  const StudyOutput out = run_study(cfg);
  write_outputs(out, cfg.out);
  std::cout << out.summary << '\n' << "wrote " << cfg.out << '\n';
  return out.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field propagation-of-chaos laboratory"};
  app.set_version_flag("--version", mfchaos::kVersion);
  app.require_subcommand(1);
  Flags flags;
  const char* studies[] = {"rate", "condition-c", "inequalities", "tv-direct", "prop31", "reference-law"};
  for (const char* name : studies) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " study");
    sub->add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "master seed (overrides config)");
    sub->add_option("--workers", flags.workers, "worker threads (overrides MFCHAOS_WORKERS and config)");
    sub->add_option("--out", flags.out, "output directory (overrides config)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string study = app.get_subcommands().front()->get_name();
  try {
    return run(study, flags);
  } catch (const mfchaos::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const mfchaos::ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return 2;
  } catch (const mfchaos::SimulationError& e) {
    std::cerr << "simulation error: " << e.what() << '\n';
    return 3;
  }
}
