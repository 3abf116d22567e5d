#include "cbf_guard/polytope.hpp"

#include "cbf_guard/error.hpp"
#include "cbf_guard/lp.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>

namespace cbf_guard {

namespace {

void append_unique(std::vector<InputVector>& out, const InputVector& v, double tol) {
  for (const auto& w : out) {
    if ((w - v).cwiseAbs().maxCoeff() <= tol * (1.0 + v.cwiseAbs().maxCoeff())) return;
  }
  out.push_back(v);
}

}  // namespace

PolytopicInputSet::PolytopicInputSet(Eigen::MatrixXd a_u, Eigen::VectorXd b_u,
                                     std::vector<InputVector> vertices)
    : a_(std::move(a_u)), b_(std::move(b_u)), vertices_(std::move(vertices)) {
  if (a_.cols() < 1 || a_.rows() < 1) {
    throw Error(ErrorKind::InvalidArgument, "input polytope needs m >= 1 and at least one row");
  }
  require_size(b_, a_.rows(), "b_u");
  if (!a_.allFinite() || !b_.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "input polytope data must be finite");
  }

  // Non-empty and bounded: every coordinate direction has a finite optimum.
  const Eigen::Index m = a_.cols();
  for (Eigen::Index j = 0; j < m; ++j) {
    for (double sign : {1.0, -1.0}) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
      c[j] = sign;
      const LpResult r = solve_lp(c, a_, b_);
      if (r.status == LpStatus::Infeasible) {
        throw Error(ErrorKind::UnboundedOrEmpty, "input polytope is empty");
      }
      if (r.status != LpStatus::Optimal) {
        throw Error(ErrorKind::UnboundedOrEmpty, "input polytope is unbounded");
      }
    }
  }

  if (!vertices_.empty()) {
    for (const auto& v : vertices_) {
      require_size(v, m, "vertex");
      if (((a_ * v - b_).array() > 1e-10).any()) {
        throw Error(ErrorKind::InvalidArgument, "supplied vertex violates A_u v <= b_u");
      }
    }
  } else if (m <= kMaxEnumerationDim && a_.rows() <= kMaxEnumerationRows) {
    vertices_ = enumerate_vertices(a_, b_);
  }
}

PolytopicInputSet PolytopicInputSet::box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  require_size(upper, lower.size(), "box upper bound");
  if ((lower.array() > upper.array()).any()) {
    throw Error(ErrorKind::UnboundedOrEmpty, "box lower bound exceeds upper bound");
  }
  const Eigen::Index m = lower.size();
  if (m < 1 || m > 20) throw Error(ErrorKind::Unsupported, "box input sets need 1 <= m <= 20");
  Eigen::MatrixXd a(2 * m, m);
  a << Eigen::MatrixXd::Identity(m, m), -Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd b(2 * m);
  b << upper, -lower;

  std::vector<InputVector> corners;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    InputVector v(m);
    for (Eigen::Index j = 0; j < m; ++j) v[j] = (mask >> j) & 1U ? upper[j] : lower[j];
    append_unique(corners, v, 0.0);
  }
  PolytopicInputSet set(std::move(a), std::move(b), std::move(corners));
  set.axis_box_ = Box(lower, upper);
  return set;
}

bool PolytopicInputSet::contains(const InputVector& u, double tol) const {
  return u.size() == dim() && ((a_ * u - b_).array() <= tol).all();
}

bool PolytopicInputSet::operator==(const PolytopicInputSet& other) const {
  if (a_.rows() != other.a_.rows() || a_.cols() != other.a_.cols()) return false;
  if (a_ != other.a_ || b_ != other.b_ || vertices_.size() != other.vertices_.size()) return false;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (vertices_[i] != other.vertices_[i]) return false;
  }
  return true;
}

std::vector<InputVector> enumerate_vertices(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                            double tol) {
  const int q = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  std::vector<InputVector> out;
  if (q < m) return out;

  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = i;
  Eigen::MatrixXd sub(m, m);
  Eigen::VectorXd rhs(m);
  while (true) {
    for (int i = 0; i < m; ++i) {
      sub.row(i) = a.row(idx[i]);
      rhs[i] = b[idx[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (lu.isInvertible()) {
      const InputVector v = lu.solve(rhs);
      const double scale = 1.0 + v.cwiseAbs().maxCoeff();
      if (((a * v - b).array() <= tol * scale).all()) append_unique(out, v, 1e-9);
    }
    // Next combination in lexicographic order.
    int pos = m - 1;
    while (pos >= 0 && idx[pos] == q - m + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int i = pos + 1; i < m; ++i) idx[i] = idx[i - 1] + 1;
  }
  return out;
}

double support_function(const PolytopicInputSet& u_set, const Eigen::VectorXd& alpha) {
  require_size(alpha, u_set.dim(), "direction");
  if (!u_set.has_vertices()) {
    throw Error(ErrorKind::Unsupported,
                "support function needs a vertex list; polytope too large to enumerate");
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& v : u_set.vertices()) best = std::max(best, alpha.dot(v));
  return best;
}

double support_function_lp(const PolytopicInputSet& u_set, const Eigen::VectorXd& alpha) {
  require_size(alpha, u_set.dim(), "direction");
  const LpResult r = solve_lp(alpha, u_set.a(), u_set.b());
  if (r.status != LpStatus::Optimal) throw Error(ErrorKind::LpFailure, "support LP did not converge");
  return r.objective;
}

ChebyshevBall chebyshev(const PolytopicInputSet& u_set) {
  const Eigen::Index m = u_set.dim();
  const Eigen::Index q = u_set.num_constraints();
  // Variables (center, radius); the extra row keeps the radius nonnegative.
  Eigen::MatrixXd a(q + 1, m + 1);
  Eigen::VectorXd b(q + 1);
  a.topLeftCorner(q, m) = u_set.a();
  a.topRightCorner(q, 1) = u_set.a().rowwise().norm();
  b.head(q) = u_set.b();
  a.row(q).setZero();
  a(q, m) = -1.0;
  b[q] = 0.0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(m + 1);
  c[m] = 1.0;
  const LpResult r = solve_lp(c, a, b);
  if (r.status == LpStatus::Infeasible) throw Error(ErrorKind::UnboundedOrEmpty, "input polytope is empty");
  if (r.status == LpStatus::Unbounded) throw Error(ErrorKind::UnboundedOrEmpty, "input polytope is unbounded");
  if (r.status != LpStatus::Optimal) throw Error(ErrorKind::LpFailure, "Chebyshev LP did not converge");
  return ChebyshevBall{r.x.head(m), r.x[m]};
}

double max_input_norm(const PolytopicInputSet& u_set) {
  if (!u_set.has_vertices()) {
    throw Error(ErrorKind::Unsupported, "max input norm needs a vertex list");
  }
  double best = 0.0;
  for (const auto& v : u_set.vertices()) best = std::max(best, v.norm());
  return best;
}

}  // namespace cbf_guard
