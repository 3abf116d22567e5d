#include "cbf_guard/barrier.hpp"

#include "cbf_guard/error.hpp"
#include "cbf_guard/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cbf_guard {

ClassKe::ClassKe(double slope) : slope_(slope) {
  if (!(slope > 0.0) || !std::isfinite(slope)) {
    throw Error(ErrorKind::InvalidArgument, "class-K_e slope must be positive and finite");
  }
}

QuadraticBarrier::QuadraticBarrier(Eigen::VectorXd center, Eigen::VectorXd p_diag)
    : center_(std::move(center)), p_diag_(std::move(p_diag)) {
  if (center_.size() < 1) throw Error(ErrorKind::InvalidArgument, "barrier dimension must be >= 1");
  require_size(p_diag_, center_.size(), "p_diag");
  require_finite(center_, "barrier center");
  require_finite(p_diag_, "p_diag");
  if ((p_diag_.array() < 0.0).any()) {
    throw Error(ErrorKind::InvalidArgument, "p_diag entries must be nonnegative");
  }
}

double QuadraticBarrier::value(const StateVector& x) const {
  require_size(x, dim(), "state");
  const Eigen::ArrayXd d = (x - center_).array();
  return 1.0 - (p_diag_.array() * d * d).sum();
}

Eigen::VectorXd QuadraticBarrier::gradient(const StateVector& x) const {
  require_size(x, dim(), "state");
  return (-2.0 * p_diag_.array() * (x - center_).array()).matrix();
}

Box QuadraticBarrier::bounding_box(const std::optional<Box>& fallback) const {
  if (fallback) require_size(fallback->lower, dim(), "fallback bounds");
  Eigen::VectorXd lo(dim()), hi(dim());
  for (Eigen::Index j = 0; j < dim(); ++j) {
    if (p_diag_[j] > 0.0) {
      const double half = 1.0 / std::sqrt(p_diag_[j]);
      lo[j] = center_[j] - half;
      hi[j] = center_[j] + half;
    } else if (fallback) {
      lo[j] = fallback->lower[j];
      hi[j] = fallback->upper[j];
    } else {
      throw Error(ErrorKind::MissingBounds,
                  "coordinate " + std::to_string(j) + " is flat in the barrier; bounds required");
    }
  }
  return Box(lo, hi);
}

bool QuadraticBarrier::operator==(const QuadraticBarrier& other) const {
  return center_.size() == other.center_.size() && center_ == other.center_ &&
         p_diag_ == other.p_diag_;
}

LieDerivatives lie_derivatives(const ControlAffineSystem& sys, const QuadraticBarrier& barrier,
                               const StateVector& x) {
  if (barrier.dim() != sys.state_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "barrier and system state dimensions differ");
  }
  const Eigen::VectorXd grad = barrier.gradient(x);
  LieDerivatives out;
  out.lf_h = grad.dot(sys.drift(x));
  out.lg_h = sys.input_matrix(x).transpose() * grad;
  return out;
}

namespace {

// Box used for the witness search: flat-everywhere coordinates do not affect
// any h_i, so they are pinned to the mean center.
Box witness_search_box(const std::vector<BarrierEntry>& entries) {
  const Eigen::Index n = entries.front().barrier.dim();
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -inf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, inf);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (const auto& e : entries) {
    mean += e.barrier.center() / static_cast<double>(entries.size());
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p = e.barrier.p_diag()[j];
      if (p > 0.0) {
        const double half = 1.0 / std::sqrt(p);
        lo[j] = std::max(lo[j], e.barrier.center()[j] - half);
        hi[j] = std::min(hi[j], e.barrier.center()[j] + half);
      }
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!std::isfinite(lo[j])) lo[j] = hi[j] = mean[j];
  }
  return Box(lo, hi);
}

}  // namespace

BarrierStack::BarrierStack(std::vector<BarrierEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw Error(ErrorKind::InvalidArgument, "barrier stack needs K >= 1");
  const Eigen::Index n = entries_.front().barrier.dim();
  for (const auto& e : entries_) {
    if (e.barrier.dim() != n) {
      throw Error(ErrorKind::DimensionMismatch, "barriers in a stack must share the state dimension");
    }
    if (!(e.tightening >= 0.0) || !std::isfinite(e.tightening)) {
      throw Error(ErrorKind::InvalidTightening, "tightening must be finite and >= 0");
    }
  }

  const Box box = witness_search_box(entries_);
  if (box.empty()) {
    throw Error(ErrorKind::EmptyTightenedSet, "barrier bounding boxes do not intersect");
  }

  StateVector best = box.center();
  double best_value = min_tightened_value(best);
  auto consider = [&](const StateVector& x) {
    const double v = min_tightened_value(x);
    if (v > best_value) {
      best_value = v;
      best = x;
    }
  };
  for (const auto& e : entries_) {
    consider(e.barrier.center().cwiseMax(box.lower).cwiseMin(box.upper));
  }
  const Eigen::VectorXd width = box.upper - box.lower;
  if (width.maxCoeff() > 0.0) {
    SobolBoxSampler sampler(box);
    for (int s = 0; s < 2048; ++s) consider(sampler.next());
    // Compass search polish.
    Eigen::VectorXd step = 0.25 * width;
    for (int round = 0; round < 60 && step.maxCoeff() > 1e-12; ++round) {
      bool improved = false;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (step[j] <= 0.0) continue;
        for (double sign : {1.0, -1.0}) {
          StateVector x = best;
          x[j] += sign * step[j];
          const double v = min_tightened_value(x);
          if (v > best_value) {
            best_value = v;
            best = x;
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
  }
  if (best_value < -1e-12) {
    throw Error(ErrorKind::EmptyTightenedSet,
                "no state found with h_i(x) - d_i >= 0 for all i (best " +
                    std::to_string(best_value) + ")");
  }
  witness_ = best;
}

double BarrierStack::min_value(const StateVector& x) const {
  double v = std::numeric_limits<double>::infinity();
  for (const auto& e : entries_) v = std::min(v, e.barrier.value(x));
  return v;
}

double BarrierStack::min_tightened_value(const StateVector& x) const {
  double v = std::numeric_limits<double>::infinity();
  for (const auto& e : entries_) v = std::min(v, e.barrier.value(x) - e.tightening);
  return v;
}

Box BarrierStack::bounding_box(const std::optional<Box>& fallback) const {
  if (fallback) require_size(fallback->lower, dim(), "fallback bounds");
  const double inf = std::numeric_limits<double>::infinity();
  Box box(Eigen::VectorXd::Constant(dim(), -inf), Eigen::VectorXd::Constant(dim(), inf));
  for (const auto& e : entries_) {
    for (Eigen::Index j = 0; j < dim(); ++j) {
      const double p = e.barrier.p_diag()[j];
      if (p > 0.0) {
        const double half = 1.0 / std::sqrt(p);
        box.lower[j] = std::max(box.lower[j], e.barrier.center()[j] - half);
        box.upper[j] = std::min(box.upper[j], e.barrier.center()[j] + half);
      }
    }
  }
  if (fallback) box = box.intersect(*fallback);
  for (Eigen::Index j = 0; j < dim(); ++j) {
    if (!std::isfinite(box.lower[j]) || !std::isfinite(box.upper[j])) {
      throw Error(ErrorKind::MissingBounds,
                  "coordinate " + std::to_string(j) + " is flat in every barrier; bounds required");
    }
  }
  return box;
}

BarrierStack BarrierStack::with_tightenings(const std::vector<double>& tightenings) const {
  if (tightenings.size() != entries_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one tightening per barrier required");
  }
  std::vector<BarrierEntry> out = entries_;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].tightening = tightenings[i];
  return BarrierStack(std::move(out));
}

}  // namespace cbf_guard
