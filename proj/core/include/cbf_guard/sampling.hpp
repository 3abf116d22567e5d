#pragma once

#include "cbf_guard/types.hpp"

#include <cstdint>
#include <memory>
#include <random>

namespace cbf_guard {

/// Low-discrepancy points in a box. Wraps a Sobol engine; a prefix of the
/// sequence is the same regardless of how many points are drawn later, so
/// estimators built on it are monotone in the budget.
class SobolBoxSampler {
 public:
  explicit SobolBoxSampler(Box box);
  ~SobolBoxSampler();
  SobolBoxSampler(SobolBoxSampler&&) noexcept;
  SobolBoxSampler& operator=(SobolBoxSampler&&) noexcept;

  Eigen::VectorXd next();

 private:
  struct Engine;
  Box box_;
  std::unique_ptr<Engine> engine_;
};

/// Independent deterministic stream `stream` derived from `seed`.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

Eigen::VectorXd uniform_in_box(const Box& box, std::mt19937_64& rng);

/// Uniform direction on the unit sphere in R^n.
Eigen::VectorXd uniform_direction(Eigen::Index n, std::mt19937_64& rng);

}  // namespace cbf_guard
