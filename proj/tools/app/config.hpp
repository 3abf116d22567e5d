#pragma once

#include "cbf_guard/barrier.hpp"
#include "cbf_guard/polytope.hpp"
#include "cbf_guard/sim.hpp"
#include "cbf_guard/synthesis.hpp"
#include "cbf_guard/system.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbf_guard::app {

/// Schema violation. The message starts with the JSON path of the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Matrix = std::vector<std::vector<double>>;

struct SystemConfig {
  std::string type = "double_integrator";  // double_integrator | planar_quadrotor | custom_linear
  QuadrotorParams params;
  Matrix a;
  Matrix b;

  bool operator==(const SystemConfig&) const = default;
};

struct BarrierConfig {
  std::vector<double> center;
  std::vector<double> p_diag;
  double gamma_slope = 1.0;
  std::optional<double> tightening = 0.0;  // nullopt: "auto"

  bool operator==(const BarrierConfig&) const = default;
};

struct BoxConfig {
  std::vector<double> lower;
  std::vector<double> upper;

  bool operator==(const BoxConfig&) const = default;
};

struct InputSetConfig {
  std::string type = "box";  // box | polytope
  BoxConfig box;
  Matrix a;
  std::vector<double> b;
  Matrix vertices;

  bool operator==(const InputSetConfig&) const = default;
};

struct WaypointConfig {
  double t = 0.0;
  std::array<double, 2> position{};

  bool operator==(const WaypointConfig&) const = default;
};

struct PolicyConfig {
  std::string type = "constant";  // constant | pd_tracking
  std::vector<double> value;
  double kp = 4.0;
  double kd = 3.0;
  std::vector<WaypointConfig> waypoints;

  bool operator==(const PolicyConfig&) const = default;
};

struct SampledConfig {
  std::optional<double> l_pi;  // nullopt: estimated
  std::size_t sup_samples = 100000;
  std::size_t lipschitz_pairs = 2000;
  std::optional<BoxConfig> domain;
  std::optional<double> f_bar;
  std::optional<double> g_bar;
  std::optional<std::vector<double>> m;

  bool operator==(const SampledConfig&) const = default;
};

struct GridConfig {
  BoxConfig bounds;
  std::vector<int> counts;

  bool operator==(const GridConfig&) const = default;
};

struct OuterSetConfig {
  std::string type = "barrier";  // barrier | box
  std::vector<double> center;
  std::vector<double> p_diag;
  BoxConfig box;

  bool operator==(const OuterSetConfig&) const = default;
};

struct SynthesisSection {
  std::size_t k = 2;
  std::vector<BoxConfig> theta_box;
  std::vector<SlopeRange> phi_box;
  double epsilon = 0.01;
  OuterSetConfig x_outer;
  std::optional<BoxConfig> domain;
  std::size_t state_samples = 10000;
  std::size_t iteration_budget = 100;
  int phi_retries = 5;
  std::size_t volume_samples = 100000;

  bool operator==(const SynthesisSection&) const = default;
};

struct OutputConfig {
  std::string trajectory = "trajectory.csv";
  std::string metrics = "metrics.json";
  std::string analysis = "analysis.json";
  std::string inactivity = "inactivity.csv";
  std::string synthesis = "synthesis.json";
  bool substep_rows = false;

  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  SystemConfig system;
  std::vector<BarrierConfig> barriers;
  std::optional<InputSetConfig> input_set;
  std::optional<PolicyConfig> policy;
  double dt_control = 0.01;
  std::optional<double> dt_integ;
  double horizon = 10.0;
  std::vector<double> x0;
  SampledConfig sampled;
  std::optional<GridConfig> grid;
  std::optional<SynthesisSection> synthesis;
  OutputConfig outputs;
  std::uint64_t seed = 0;

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

int state_dim(const SystemConfig& cfg);
int input_dim(const SystemConfig& cfg);

ControlAffineSystem build_system(const SystemConfig& cfg);
PolytopicInputSet build_input_set(const InputSetConfig& cfg);
Policy build_policy(const PolicyConfig& cfg, const SystemConfig& system);
Box build_box(const BoxConfig& cfg);

/// Stack from the configured barriers with every tightening at 0 ("auto"
/// entries included) or at the supplied values.
BarrierStack build_stack(const std::vector<BarrierConfig>& barriers,
                         const std::optional<std::vector<double>>& tightenings = std::nullopt);

/// Range for coordinates no barrier bounds: sampled.domain, else the
/// quadrotor working domain for that system.
std::optional<Box> state_domain(const RunConfig& cfg);

SynthesisConfig build_synthesis_config(const SynthesisSection& section, std::uint64_t seed);

}  // namespace cbf_guard::app
