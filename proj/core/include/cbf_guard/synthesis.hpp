#pragma once

#include "cbf_guard/barrier.hpp"
#include "cbf_guard/error.hpp"
#include "cbf_guard/polytope.hpp"
#include "cbf_guard/system.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <variant>
#include <vector>

namespace cbf_guard {

/// Desired set X, either {h_X >= 0} or an axis box.
using OuterSet = std::variant<QuadraticBarrier, Box>;

/// Signed membership value of X: h_X(x) for a barrier, the smallest distance
/// to a face (negative outside) for a box.
double outer_value(const OuterSet& x_outer, const StateVector& x);

struct SlopeRange {
  double lower = 1.0;
  double upper = 1.0;

  bool operator==(const SlopeRange&) const = default;
};

struct SynthesisConfig {
  std::size_t k = 2;
  /// Per barrier, bounds on [p_diag; c] (length 2n).
  std::vector<Box> theta_box;
  /// Per barrier, bounds on the class-K_e slope.
  std::vector<SlopeRange> phi_box;
  double epsilon = 0.01;
  OuterSet x_outer = Box{};
  /// Range for coordinates no barrier constrains.
  std::optional<Box> domain;
  std::size_t state_samples = 10000;
  std::size_t iteration_budget = 100;
  std::uint64_t seed = 0;
  int phi_retries = 5;
  std::size_t volume_samples = 100000;

  /// Throws InvalidArgument on inconsistent fields.
  void validate(Eigen::Index state_dim) const;
};

struct VolumeEstimate {
  double volume = 0.0;
  double half_width = 0.0;
};

struct SynthesisChecks {
  bool containment = false;
  bool activity = false;
  bool feasibility = false;
};

struct RejectionCounts {
  std::size_t empty = 0;
  std::size_t containment = 0;
  std::size_t activity = 0;
  std::size_t feasibility = 0;
};

struct SynthesisResult {
  BarrierStack stack;
  VolumeEstimate volume;
  SynthesisChecks checks;
  std::size_t accepted_iterations = 0;
  std::size_t best_iteration = 0;
  RejectionCounts rejections;
};

/// NoFeasibleCandidate with the per-check rejection tallies.
class SynthesisFailure : public Error {
 public:
  SynthesisFailure(const std::string& message, RejectionCounts counts);
  const RejectionCounts& rejections() const { return counts_; }

 private:
  RejectionCounts counts_;
};

/// Up to `count` uniform draws from the stack's bounding box that land in
/// the safe set (at most 100 * count draws). Throws EmptyIntersection when
/// none land.
std::vector<StateVector> sample_intersection(const BarrierStack& stack, std::size_t count,
                                             const std::optional<Box>& domain,
                                             std::mt19937_64& rng);

/// True iff h_X >= 0 at every sample and a local minimization of h_X over the
/// safe set, started at the worst sample, stays above -1e-9.
bool containment_check(const BarrierStack& stack, const OuterSet& x_outer,
                       const std::vector<StateVector>& samples);

/// True iff max_i ||L_g h_i(x)|| >= epsilon at every sample.
bool activity_check(const ControlAffineSystem& sys, const BarrierStack& stack, double epsilon,
                    const std::vector<StateVector>& samples);

/// True iff max_{u in U} min_i (L_f h_i + L_g h_i u + gamma_i(h_i)) >= 0 at
/// every sample, each solved as an epigraph LP.
bool feasibility_check(const ControlAffineSystem& sys, const BarrierStack& stack,
                       const PolytopicInputSet& u_set, const std::vector<StateVector>& samples);

/// Rejection-sampling volume of the safe set inside `bbox` with a 95%
/// normal-approximation half-width.
VolumeEstimate volume_estimate(const BarrierStack& stack, const Box& bbox, std::size_t n_samples,
                               std::uint64_t seed);

SynthesisResult synthesize(const ControlAffineSystem& sys, const PolytopicInputSet& u_set,
                           const SynthesisConfig& cfg);

}  // namespace cbf_guard
