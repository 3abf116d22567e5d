#include "commands.hpp"

#include "cbf_guard/filter.hpp"
#include "cbf_guard/synthesis.hpp"
#include "cbf_guard/trajectory_io.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>

namespace cbf_guard::app {

using nlohmann::json;

namespace {

json real_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

RunConfig load(const CommandOptions& opts) {
  RunConfig cfg = load_run_config(opts.config);
  if (opts.seed) cfg.seed = *opts.seed;
  return cfg;
}

template <typename T>
const T& require(const std::optional<T>& v, const char* path) {
  if (!v) throw ConfigError(std::string(path) + ": required field missing");
  return *v;
}

std::filesystem::path output_path(const CommandOptions& opts, const std::string& name) {
  std::filesystem::create_directories(opts.out_dir);
  return opts.out_dir / name;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path.string() + ": cannot open for writing");
  return out;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
}

bool has_auto_tightening(const RunConfig& cfg) {
  for (const auto& b : cfg.barriers) {
    if (!b.tightening) return true;
  }
  return false;
}

std::optional<Policy> optional_policy(const RunConfig& cfg) {
  if (!cfg.policy) return std::nullopt;
  return build_policy(*cfg.policy, cfg.system);
}

// Runs a command body and maps failures to the exit-code contract.
int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const SynthesisFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitNoCandidate;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch:
    case ErrorKind::InvalidArgument:
    case ErrorKind::Unsupported:
    case ErrorKind::UnboundedOrEmpty:
    case ErrorKind::MissingBounds:
    case ErrorKind::EmptyTightenedSet:
    case ErrorKind::InvalidTightening:
      return kExitConfigError;
    case ErrorKind::NoFeasibleCandidate:
      return kExitNoCandidate;
    default:
      return kExitRunFailure;
  }
}

SampledReport analyze_sampled(const RunConfig& cfg, const ControlAffineSystem& sys,
                              const PolytopicInputSet& u_set, const std::optional<Policy>& policy) {
  const std::size_t k = cfg.barriers.size();
  const BarrierStack stack = build_stack(cfg.barriers, std::vector<double>(k, 0.0));
  const std::optional<Box> domain = state_domain(cfg);

  SupNormEstimate sup = estimate_sup_norms(sys, stack, cfg.sampled.sup_samples, domain);
  if (cfg.sampled.f_bar) sup.f_bar = *cfg.sampled.f_bar;
  if (cfg.sampled.g_bar) sup.g_bar = *cfg.sampled.g_bar;
  if (cfg.sampled.m) sup.m = *cfg.sampled.m;

  SampledReport report;
  double l_pi = 0.0;
  if (cfg.sampled.l_pi) {
    l_pi = *cfg.sampled.l_pi;
  } else {
    if (!policy) throw ConfigError("$.sampled.l_pi: \"auto\" needs $.policy");
    const Policy& pi = *policy;
    l_pi = estimate_policy_lipschitz(
        sys, stack, u_set, [&](const StateVector& x) { return pi(0.0, x); },
        cfg.sampled.lipschitz_pairs, cfg.seed, domain);
    report.l_pi_estimated = true;
  }
  report.constants = make_sampled_constants(sys, u_set, sup, l_pi);
  report.m_f = sup.m_f;
  report.accepted_samples = sup.accepted;

  for (std::size_t i = 0; i < k; ++i) {
    report.required_tightenings.push_back(
        required_tightening(stack[i].gamma, report.constants, report.constants.m[i], cfg.dt_control));
    const auto& configured = cfg.barriers[i].tightening;
    report.tightenings.push_back(configured ? *configured : report.required_tightenings.back());
  }
  const bool all_positive = std::all_of(report.tightenings.begin(), report.tightenings.end(),
                                        [](double d) { return d > 0.0; });
  if (all_positive) {
    const BarrierStack tightened = stack.with_tightenings(report.tightenings);
    report.dt_max_per_barrier = per_barrier_sampling_times(tightened, report.constants);
    report.dt_max =
        *std::min_element(report.dt_max_per_barrier.begin(), report.dt_max_per_barrier.end());
  }
  try {
    report.epsilon_bar = epsilon_bar(stack, u_set, report.m_f);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NonpositiveMargin) throw;
  }
  return report;
}

json to_json(const SampledReport& r) {
  const auto& c = r.constants;
  json j = {{"L", c.lipschitz},
            {"f_bar", c.f_bar},
            {"g_bar", c.g_bar},
            {"u_bar", c.u_bar},
            {"l_pi", c.l_pi},
            {"l_pi_estimated", r.l_pi_estimated},
            {"M", c.m},
            {"M_f", r.m_f},
            {"accepted_samples", r.accepted_samples},
            {"required_tightenings", r.required_tightenings},
            {"d", r.tightenings},
            {"dt_max_per_barrier", r.dt_max_per_barrier}};
  j["dt_max"] = r.dt_max ? json(*r.dt_max) : json(nullptr);
  j["epsilon_bar"] = r.epsilon_bar ? json(*r.epsilon_bar) : json(nullptr);
  return j;
}

json to_json(const Metrics& m) {
  return {{"min_h", real_or_null(m.min_h)},
          {"violation_fraction", m.violation_fraction},
          {"input_total_variation", m.input_total_variation},
          {"switch_count", m.switch_count}};
}

int run_simulate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load(opts);
    const ControlAffineSystem sys = build_system(cfg.system);
    const PolytopicInputSet u_set = build_input_set(require(cfg.input_set, "$.input_set"));
    const Policy policy = build_policy(require(cfg.policy, "$.policy"), cfg.system);
    if (cfg.x0.empty()) throw ConfigError("$.x0: required field missing");

    std::optional<BarrierStack> stack;
    std::vector<double> tightenings;
    if (!cfg.barriers.empty()) {
      if (has_auto_tightening(cfg)) {
        tightenings = analyze_sampled(cfg, sys, u_set, policy).tightenings;
      } else {
        for (const auto& b : cfg.barriers) tightenings.push_back(*b.tightening);
      }
      stack.emplace(build_stack(cfg.barriers, tightenings));
    }

    SimulationSettings settings;
    settings.dt_control = cfg.dt_control;
    settings.dt_integ = cfg.dt_integ;
    settings.horizon = cfg.horizon;
    settings.record_substeps = cfg.outputs.substep_rows;
    const StateVector x0 = Eigen::Map<const Eigen::VectorXd>(
        cfg.x0.data(), static_cast<Eigen::Index>(cfg.x0.size()));
    const Trajectory traj = simulate(sys, policy, stack, u_set, settings, x0);

    {
      std::ofstream csv = open_output(output_path(opts, cfg.outputs.trajectory));
      write_trajectory_csv(csv, traj, cfg.outputs.substep_rows);
    }
    const Metrics metrics = compute_metrics(traj);
    json report = to_json(metrics);
    report["ticks"] = traj.times.size();
    report["tightenings"] = tightenings;
    report["final_state"] = vector_json(traj.final_state);
    if (traj.halt) {
      report["halt"] = {{"kind", std::string(to_string(traj.halt->kind))},
                        {"time", traj.halt->time},
                        {"state", vector_json(traj.halt->state)},
                        {"message", traj.halt->message}};
    } else {
      report["halt"] = nullptr;
    }
    write_json(output_path(opts, cfg.outputs.metrics), report);

    if (traj.halt) {
      err << "simulation halted at t=" << traj.halt->time << ": " << traj.halt->message << '\n';
      return static_cast<int>(kExitRunFailure);
    }
    if (!opts.quiet) out << report.dump(2) << '\n';
    return static_cast<int>(kExitOk);
  });
}

int run_synthesize(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load(opts);
    const ControlAffineSystem sys = build_system(cfg.system);
    const PolytopicInputSet u_set = build_input_set(require(cfg.input_set, "$.input_set"));
    const SynthesisSection& section = require(cfg.synthesis, "$.synthesis");
    const SynthesisConfig scfg = build_synthesis_config(section, cfg.seed);
    const auto path = output_path(opts, cfg.outputs.synthesis);

    auto rejections_json = [](const RejectionCounts& r) {
      return json{{"empty", r.empty},
                  {"containment", r.containment},
                  {"activity", r.activity},
                  {"feasibility", r.feasibility}};
    };
    try {
      const SynthesisResult result = synthesize(sys, u_set, scfg);
      json barriers = json::array();
      for (const auto& e : result.stack.entries()) {
        barriers.push_back({{"center", vector_json(e.barrier.center())},
                            {"p_diag", vector_json(e.barrier.p_diag())},
                            {"gamma_slope", e.gamma.slope()},
                            {"tightening", e.tightening}});
      }
      const json report = {
          {"status", "accepted"},
          {"barriers", barriers},
          {"volume", result.volume.volume},
          {"volume_half_width", result.volume.half_width},
          {"checks",
           {{"containment", result.checks.containment},
            {"activity", result.checks.activity},
            {"feasibility", result.checks.feasibility}}},
          {"accepted_iterations", result.accepted_iterations},
          {"best_iteration", result.best_iteration},
          {"rejections", rejections_json(result.rejections)},
          {"seed", cfg.seed}};
      write_json(path, report);
      if (!opts.quiet) out << report.dump(2) << '\n';
      return static_cast<int>(kExitOk);
    } catch (const SynthesisFailure& e) {
      write_json(path, {{"status", "no_feasible_candidate"},
                        {"rejections", rejections_json(e.rejections())},
                        {"seed", cfg.seed}});
      throw;
    }
  });
}

int run_analyze(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load(opts);
    const ControlAffineSystem sys = build_system(cfg.system);
    const PolytopicInputSet u_set = build_input_set(require(cfg.input_set, "$.input_set"));
    if (cfg.barriers.empty()) throw ConfigError("$.barriers: at least one barrier required");
    const SampledReport report = analyze_sampled(cfg, sys, u_set, optional_policy(cfg));
    json j = to_json(report);
    j["dt_control"] = cfg.dt_control;
    write_json(output_path(opts, cfg.outputs.analysis), j);
    if (!opts.quiet) out << j.dump(2) << '\n';
    return static_cast<int>(kExitOk);
  });
}

int run_inactivity_map(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load(opts);
    const ControlAffineSystem sys = build_system(cfg.system);
    const PolytopicInputSet u_set = build_input_set(require(cfg.input_set, "$.input_set"));
    const GridConfig& grid_cfg = require(cfg.grid, "$.grid");

    std::optional<std::vector<double>> tightenings;
    if (has_auto_tightening(cfg)) {
      tightenings = analyze_sampled(cfg, sys, u_set, optional_policy(cfg)).tightenings;
    }
    const BarrierStack stack = build_stack(cfg.barriers, tightenings);
    StateGrid grid;
    grid.lower = build_box(grid_cfg.bounds).lower;
    grid.upper = build_box(grid_cfg.bounds).upper;
    grid.counts = grid_cfg.counts;
    const std::vector<ActivityLabel> labels = inactivity_map(sys, stack, u_set, grid);
    {
      std::ofstream csv = open_output(output_path(opts, cfg.outputs.inactivity));
      write_inactivity_csv(csv, grid, labels);
    }
    if (!opts.quiet) {
      std::size_t counts[3] = {0, 0, 0};
      for (ActivityLabel l : labels) ++counts[static_cast<int>(l)];
      out << "active " << counts[0] << ", inactive " << counts[1] << ", outside " << counts[2]
          << '\n';
    }
    return static_cast<int>(kExitOk);
  });
}

int run_metrics(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::ifstream in(opts.trajectory);
    if (!in) throw ConfigError(opts.trajectory.string() + ": cannot open trajectory");
    const Trajectory traj = read_trajectory_csv(in);
    const json j = to_json(compute_metrics(traj));
    write_json(output_path(opts, "metrics.json"), j);
    if (!opts.quiet) out << j.dump(2) << '\n';
    return static_cast<int>(kExitOk);
  });
}

}  // namespace cbf_guard::app
