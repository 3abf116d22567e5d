#include "cbf_guard/sampling.hpp"

#include "cbf_guard/error.hpp"

#include <boost/random/sobol.hpp>

namespace cbf_guard {

struct SobolBoxSampler::Engine {
  explicit Engine(std::size_t dim) : sobol(dim) {}
  boost::random::sobol sobol;
};

SobolBoxSampler::SobolBoxSampler(Box box) : box_(std::move(box)) {
  if (box_.dim() < 1) throw Error(ErrorKind::InvalidArgument, "sampling box has dimension 0");
  if (box_.empty()) throw Error(ErrorKind::InvalidArgument, "sampling box is empty");
  engine_ = std::make_unique<Engine>(static_cast<std::size_t>(box_.dim()));
}

SobolBoxSampler::~SobolBoxSampler() = default;
SobolBoxSampler::SobolBoxSampler(SobolBoxSampler&&) noexcept = default;
SobolBoxSampler& SobolBoxSampler::operator=(SobolBoxSampler&&) noexcept = default;

Eigen::VectorXd SobolBoxSampler::next() {
  // The engine yields one coordinate per call, cycling through dimensions.
  Eigen::VectorXd x(box_.dim());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double unit = static_cast<double>(engine_->sobol()) * 0x1p-64;
    x[j] = box_.lower[j] + unit * (box_.upper[j] - box_.lower[j]);
  }
  return x;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9U};
  return std::mt19937_64(seq);
}

Eigen::VectorXd uniform_in_box(const Box& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd x(box.dim());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    x[j] = box.lower[j] + unit(rng) * (box.upper[j] - box.lower[j]);
  }
  return x;
}

Eigen::VectorXd uniform_direction(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  do {
    for (Eigen::Index j = 0; j < n; ++j) v[j] = normal(rng);
  } while (v.norm() < 1e-12);
  return v.normalized();
}

}  // namespace cbf_guard
