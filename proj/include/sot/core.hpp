#ifndef SOT_CORE_HPP
#define SOT_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sot {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Nonnegative weights on discrete support points. Total mass is arbitrary.
class Marginal {
 public:
  Marginal() = default;

  explicit Marginal(Vector weights) : weights_(std::move(weights)) { validate(); }

  /// `support` holds one point per row (n x d).
  Marginal(Vector weights, Matrix support)
      : weights_(std::move(weights)), support_(std::move(support)) {
    validate();
    if (support_->rows() != weights_.size()) {
      throw std::invalid_argument("Marginal: support has " + std::to_string(support_->rows()) +
                                  " points but there are " + std::to_string(weights_.size()) +
                                  " weights");
    }
  }

  [[nodiscard]] const Vector& weights() const { return weights_; }
  [[nodiscard]] Eigen::Index size() const { return weights_.size(); }
  [[nodiscard]] double mass() const { return weights_.sum(); }
  [[nodiscard]] double operator[](Eigen::Index i) const { return weights_[i]; }

  [[nodiscard]] bool has_support() const { return support_.has_value(); }
  [[nodiscard]] const Matrix& support() const {
    if (!support_) throw std::logic_error("Marginal: no support points attached");
    return *support_;
  }

 private:
  void validate() const {
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
      const double w = weights_[i];
      if (!std::isfinite(w) || w < 0.0) {
        throw std::invalid_argument("Marginal: weight " + std::to_string(i) +
                                    " is negative or not finite");
      }
    }
  }

  Vector weights_;
  std::optional<Matrix> support_;
};

struct IndexPair {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  auto operator<=>(const IndexPair&) const = default;
};

/// Cost matrix over [0, +inf]. Blocked couplings are stored as +inf and
/// additionally listed in `inf_pattern()` (row-major order).
class CostMatrix {
 public:
  CostMatrix() = default;

  explicit CostMatrix(Matrix entries) : entries_(std::move(entries)) {
    finite_max_ = 0.0;
    for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
      for (Eigen::Index j = 0; j < entries_.cols(); ++j) {
        const double c = entries_(i, j);
        if (std::isnan(c) || c < 0.0) {
          throw std::invalid_argument("CostMatrix: entry (" + std::to_string(i) + ", " +
                                      std::to_string(j) + ") is negative or NaN");
        }
        if (std::isinf(c)) {
          inf_pattern_.push_back({i, j});
        } else {
          finite_max_ = std::max(finite_max_, c);
        }
      }
    }
  }

  [[nodiscard]] Eigen::Index rows() const { return entries_.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return entries_.cols(); }
  [[nodiscard]] const Matrix& entries() const { return entries_; }
  [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
  [[nodiscard]] bool blocked(Eigen::Index i, Eigen::Index j) const {
    return std::isinf(entries_(i, j));
  }
  [[nodiscard]] const std::vector<IndexPair>& inf_pattern() const { return inf_pattern_; }
  [[nodiscard]] bool fully_blocked() const {
    return static_cast<Eigen::Index>(inf_pattern_.size()) == entries_.size();
  }
  /// Largest finite entry (0 when everything is blocked).
  [[nodiscard]] double finite_max() const { return finite_max_; }

 private:
  Matrix entries_;
  std::vector<IndexPair> inf_pattern_;
  double finite_max_ = 0.0;
};

/// Nonnegative n x m coupling.
class TransportPlan {
 public:
  TransportPlan() = default;
  explicit TransportPlan(Matrix matrix) : matrix_(std::move(matrix)) {}

  [[nodiscard]] const Matrix& matrix() const { return matrix_; }
  [[nodiscard]] Eigen::Index rows() const { return matrix_.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return matrix_.cols(); }
  [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return matrix_(i, j); }

 private:
  Matrix matrix_;
};

struct SolverConfig {
  double epsilon = 0.05;
  double gamma = 2.0;
  int max_iter = 20000;
  double tol = 1e-10;
  bool log_domain = false;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw std::invalid_argument("SolverConfig: epsilon must be positive and finite");
    }
    // gamma = 0 is allowed: it is the first entry of the usual gamma schedule.
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
      throw std::invalid_argument("SolverConfig: gamma must be nonnegative and finite");
    }
    if (max_iter <= 0) throw std::invalid_argument("SolverConfig: max_iter must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("SolverConfig: tol must be positive");
  }
};

struct SolverResult {
  TransportPlan plan;
  Vector u;
  Vector v;
  // Dual potentials, only filled by the log-domain solver.
  Vector f;
  Vector g;
  int iterations = 0;
  bool converged = false;
  double transported_mass = 0.0;
  double cost = 0.0;
};

// ---------------------------------------------------------------------------
// Cost construction

/// Squared Euclidean distance, +inf where the distance exceeds `c_cut`.
/// Points are rows of `x` (n x d) and `y` (m x d).
///
/// The comparison allows a relative slack of 1e-12 so that grid points lying
/// exactly at distance `c_cut` (0.3 on an h = 1/200 grid, say) are not blocked
/// by rounding in the subtraction.
inline CostMatrix truncated_sq_cost(const Matrix& x, const Matrix& y, double c_cut) {
  if (x.cols() != y.cols()) {
    throw std::invalid_argument("truncated_sq_cost: point dimensions differ (" +
                                std::to_string(x.cols()) + " vs " + std::to_string(y.cols()) +
                                ")");
  }
  if (!(c_cut > 0.0)) throw std::invalid_argument("truncated_sq_cost: c_cut must be positive");
  const double threshold = std::isinf(c_cut) ? kInf : c_cut * (1.0 + 1e-12);
  Matrix c(x.rows(), y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      const double d2 = (x.row(i) - y.row(j)).squaredNorm();
      c(i, j) = std::sqrt(d2) <= threshold ? d2 : kInf;
    }
  }
  return CostMatrix(std::move(c));
}

/// 1-D convenience overload.
inline CostMatrix truncated_sq_cost(const Vector& x, const Vector& y, double c_cut) {
  return truncated_sq_cost(Matrix(x), Matrix(y), c_cut);
}

/// exp(-C / epsilon), with exact zeros on the inf-pattern.
inline Matrix gibbs_kernel(const CostMatrix& cost, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("gibbs_kernel: epsilon must be positive");
  Matrix k(cost.rows(), cost.cols());
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      k(i, j) = cost.blocked(i, j) ? 0.0 : std::exp(-cost(i, j) / epsilon);
    }
  }
  return k;
}

// ---------------------------------------------------------------------------
// Divergences

/// KL(P|Q) = sum P log(P/Q) - P + Q with 0 log 0 = 0. Returns +inf when P
/// puts mass where Q vanishes.
template <typename DerivedP, typename DerivedQ>
double kl_divergence(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw std::invalid_argument("kl_divergence: shape mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double pij = p(i, j);
      const double qij = q(i, j);
      if (pij > 0.0) {
        if (!(qij > 0.0)) return kInf;
        total += pij * std::log(pij / qij) - pij + qij;
      } else {
        total += qij;
      }
    }
  }
  return total;
}

/// H(P) = -sum P (log P - 1), 0 log 0 = 0.
template <typename Derived>
double entropy(const Eigen::MatrixBase<Derived>& p) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double pij = p(i, j);
      if (pij > 0.0) total -= pij * (std::log(pij) - 1.0);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Plan utilities

/// (P 1, P^T 1).
inline std::pair<Vector, Vector> marginals(const TransportPlan& plan) {
  return {plan.matrix().rowwise().sum(), plan.matrix().colwise().sum().transpose()};
}

inline double transported_mass(const TransportPlan& plan) { return plan.matrix().sum(); }

/// <P, C> over finite cost entries; blocked entries contribute nothing.
inline double plan_cost(const TransportPlan& plan, const CostMatrix& cost) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      if (!cost.blocked(i, j)) total += plan(i, j) * cost(i, j);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Grids and discretized densities

/// x_i = i / n for i = 0..n-1.
inline Vector uniform_grid(Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("uniform_grid: n must be >= 1");
  return Vector::LinSpaced(n, 0.0, static_cast<double>(n - 1)) / static_cast<double>(n);
}

/// Samples `density` on uniform_grid(n) and rescales so the weights sum to
/// `scale`. The resulting marginal carries the grid as its support.
inline Marginal discretize(const std::function<double(double)>& density, Eigen::Index n,
                           double scale) {
  const Vector x = uniform_grid(n);
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = density(x[i]);
  const double total = w.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::invalid_argument("discretize: density has no positive mass on the grid");
  }
  w *= scale / total;
  return Marginal(std::move(w), Matrix(x));
}

/// scale / D * (exp(-(x - center)^2 / width^2) + floor) on uniform_grid(n).
inline Marginal discretized_gaussian(double center, double width, double floor, Eigen::Index n,
                                     double scale) {
  if (!(width > 0.0)) throw std::invalid_argument("discretized_gaussian: width must be positive");
  return discretize(
      [=](double x) {
        const double z = (x - center) / width;
        return std::exp(-z * z) + floor;
      },
      n, scale);
}

/// (T^t f)[i] = f[(i + t) mod n].
inline Vector shift_operator(const Vector& f, long t) {
  const long n = static_cast<long>(f.size());
  Vector out(f.size());
  if (n == 0) return out;
  for (long i = 0; i < n; ++i) out[i] = f[((i + t) % n + n) % n];
  return out;
}

/// MATLAB-style circshift: element i moves to position i + k.
inline Vector circshift(const Vector& f, long k) { return shift_operator(f, -k); }

}  // namespace sot

#endif  // SOT_CORE_HPP
