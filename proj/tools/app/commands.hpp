#pragma once

#include "config.hpp"

#include "cbf_guard/error.hpp"
#include "cbf_guard/sampled.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace cbf_guard::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitRunFailure = 2,
  kExitNoCandidate = 3,
};

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path trajectory;  // metrics subcommand
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

/// Sampled-data constants, the tightenings they require and the resulting
/// maximum hold time for a configured stack.
struct SampledReport {
  SampledDataConstants constants;
  std::vector<double> m_f;
  std::size_t accepted_samples = 0;
  bool l_pi_estimated = false;
  std::vector<double> required_tightenings;  // at dt_control
  std::vector<double> tightenings;           // applied: configured, or required for "auto"
  std::vector<double> dt_max_per_barrier;
  std::optional<double> dt_max;
  std::optional<double> epsilon_bar;
};

SampledReport analyze_sampled(const RunConfig& cfg, const ControlAffineSystem& sys,
                              const PolytopicInputSet& u_set, const std::optional<Policy>& policy);

nlohmann::json to_json(const SampledReport& report);
nlohmann::json to_json(const Metrics& metrics);

int exit_code_for(ErrorKind kind);

int run_simulate(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int run_synthesize(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int run_analyze(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int run_inactivity_map(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int run_metrics(const CommandOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace cbf_guard::app
