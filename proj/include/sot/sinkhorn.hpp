#ifndef SOT_SINKHORN_HPP
#define SOT_SINKHORN_HPP

#include <sot/core.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace sot {

/// The standard-domain solver clamps log(e^{gamma/epsilon}) here so the cap
/// stays finite and blocked rows never produce 0 * inf. Problems with a
/// larger gamma/epsilon belong in the log domain.
inline constexpr double kStandardDomainLogCapLimit = 600.0;

namespace detail {

/// eps * log(w), -inf where w = 0.
inline Vector eps_log(const Vector& w, double eps) {
  Vector out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) out[i] = w[i] > 0.0 ? eps * std::log(w[i]) : -kInf;
  return out;
}

/// eps * log sum_j exp((pot_j - cost_j) / eps), max-shifted. Blocked entries
/// (cost = +inf) and absent mass (pot = -inf) contribute nothing; an empty
/// reduction returns -inf. `scratch` must have pot.size() entries.
template <typename RowExpr>
double soft_max(const Vector& pot, const RowExpr& cost_row, double eps, Eigen::ArrayXd& scratch) {
  scratch = pot.array() - cost_row.transpose().array();
  const double top = scratch.maxCoeff();
  if (top == -kInf) return -kInf;
  return top + eps * std::log(((scratch - top) * (1.0 / eps)).exp().sum());
}

/// exp((f_i + g_j - C_ij) / eps), exactly zero on the inf-pattern.
inline Matrix logdomain_plan(const Vector& f, const Vector& g, const CostMatrix& cost,
                             double eps) {
  Matrix p = Matrix::Zero(cost.rows(), cost.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (f[i] == -kInf) continue;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (cost.blocked(i, j) || g[j] == -kInf) continue;
      p(i, j) = std::exp((f[i] + g[j] - cost(i, j)) / eps);
    }
  }
  return p;
}

/// |log(new / old)| for scalings, treating 0 -> 0 as no change.
inline double scaling_change(const Vector& old_v, const Vector& new_v) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < old_v.size(); ++i) {
    const double a = old_v[i];
    const double b = new_v[i];
    if (a == b) continue;
    if (a == 0.0 || b == 0.0) return kInf;
    worst = std::max(worst, std::abs(std::log(b / a)));
  }
  return worst;
}

/// sup |new - old| / epsilon for potentials, treating -inf -> -inf as no change.
inline double potential_change(const Vector& old_p, const Vector& new_p, double epsilon) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < old_p.size(); ++i) {
    const double a = old_p[i];
    const double b = new_p[i];
    if (a == b) continue;
    if (std::isinf(a) || std::isinf(b)) return kInf;
    worst = std::max(worst, std::abs(b - a) / epsilon);
  }
  return worst;
}

inline void check_dimensions(const Marginal& a, const Marginal& b, const CostMatrix& c) {
  if (a.size() != c.rows() || b.size() != c.cols()) {
    throw std::invalid_argument("dimension mismatch: a has " + std::to_string(a.size()) +
                                " entries, b has " + std::to_string(b.size()) +
                                ", cost is " + std::to_string(c.rows()) + "x" +
                                std::to_string(c.cols()));
  }
}

/// min{cap, mass / denom}. Zero mass gives 0 (so 0/0 = 0); positive mass
/// over a vanished denominator gives the cap.
inline double capped_ratio(double mass, double denom, double cap) {
  if (mass == 0.0) return 0.0;
  if (!(denom > 0.0)) return cap;
  return std::min(cap, mass / denom);
}

inline void finish(SolverResult& r, const CostMatrix& c) {
  r.transported_mass = transported_mass(r.plan);
  r.cost = plan_cost(r.plan, c);
}

}  // namespace detail

/// Generalized Sinkhorn iteration for entropic sOT:
///   u <- min{e^{gamma/eps}, a ./ (K v)},  v <- min{e^{gamma/eps}, b ./ (K^T u)}
/// from u = v = 1, until the sup-norm change of log u and log v over one full
/// sweep drops below cfg.tol or cfg.max_iter sweeps have run.
inline SolverResult solve_sot(const Marginal& a, const Marginal& b, const CostMatrix& cost,
                              const SolverConfig& cfg) {
  cfg.validate();
  detail::check_dimensions(a, b, cost);
  const Matrix kernel = gibbs_kernel(cost, cfg.epsilon);
  const double cap = std::exp(std::min(cfg.gamma / cfg.epsilon, kStandardDomainLogCapLimit));
  const Vector& aw = a.weights();
  const Vector& bw = b.weights();

  SolverResult r;
  r.u = Vector::Ones(cost.rows());
  r.v = Vector::Ones(cost.cols());
  Vector u_next(cost.rows());
  Vector v_next(cost.cols());
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Vector kv = kernel * r.v;
    for (Eigen::Index i = 0; i < u_next.size(); ++i) {
      u_next[i] = detail::capped_ratio(aw[i], kv[i], cap);
    }
    const Vector ktu = kernel.transpose() * u_next;
    for (Eigen::Index j = 0; j < v_next.size(); ++j) {
      v_next[j] = detail::capped_ratio(bw[j], ktu[j], cap);
    }
    const double change =
        std::max(detail::scaling_change(r.u, u_next), detail::scaling_change(r.v, v_next));
    r.u.swap(u_next);
    r.v.swap(v_next);
    r.iterations = it;
    if (change < cfg.tol) {
      r.converged = true;
      break;
    }
  }
  r.plan = TransportPlan(r.u.asDiagonal() * kernel * r.v.asDiagonal());
  detail::finish(r, cost);
  return r;
}

namespace detail {

/// Kernel re-centred at a pair of potentials, for log-domain sweeps at
/// matrix-vector speed.
///
/// Potentials are split as f = f_abs + eps log u, g = g_abs + eps log v and
/// the stored kernel is exp((f_abs_i + g_abs_j - C_ij) / eps). The scalings
/// u, v stay within [e^-band, e^band]; an entry leaving that band is absorbed
/// into f_abs (g_abs) and its kernel row (column) rebuilt. Reductions whose
/// product falls outside a safe range are redone with the exact max-shifted
/// log-sum-exp, so the result never depends on underflowed kernel entries.
class StabilizedKernel {
 public:
  static constexpr double kBand = 40.0;
  static constexpr double kSafeLow = 1e-200;
  static constexpr double kSafeHigh = 1e200;
  static constexpr double kFlush = 1e-300;

  StabilizedKernel(const CostMatrix& cost, const Matrix& cost_t, double eps)
      : cost_(cost), c_(cost.entries()), ct_(cost_t), eps_(eps),
        f_abs_(Vector::Zero(cost.rows())), g_abs_(Vector::Zero(cost.cols())),
        u_(Vector::Ones(cost.rows())), v_(Vector::Ones(cost.cols())),
        f_(Vector::Zero(cost.rows())), g_(Vector::Zero(cost.cols())),
        k_(cost.rows(), cost.cols()), row_scratch_(cost.cols()), col_scratch_(cost.rows()) {
    for (Eigen::Index i = 0; i < k_.rows(); ++i) rebuild_row(i);
  }

  [[nodiscard]] const Vector& f() const { return f_; }
  [[nodiscard]] const Vector& g() const { return g_; }

  /// out_i = eps log sum_j exp((g_j - C_ij) / eps); -inf for an empty reduction.
  void row_soft_max(Vector& out) {
    prod_rows_.noalias() = k_ * v_;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const double p = prod_rows_[i];
      out[i] = (p > kSafeLow && p < kSafeHigh)
                   ? eps_ * std::log(p) - f_abs_[i]
                   : soft_max(g_, c_.row(i), eps_, row_scratch_);
    }
  }

  /// out_j = eps log sum_i exp((f_i - C_ij) / eps); -inf for an empty reduction.
  void col_soft_max(Vector& out) {
    prod_cols_.noalias() = k_.transpose() * u_;
    for (Eigen::Index j = 0; j < out.size(); ++j) {
      const double p = prod_cols_[j];
      out[j] = (p > kSafeLow && p < kSafeHigh)
                   ? eps_ * std::log(p) - g_abs_[j]
                   : soft_max(f_, ct_.row(j), eps_, col_scratch_);
    }
  }

  void set_f(const Vector& f) {
    f_ = f;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      if (f[i] == -kInf) {
        u_[i] = 0.0;
        continue;
      }
      const double d = (f[i] - f_abs_[i]) / eps_;
      if (std::abs(d) <= kBand) {
        u_[i] = std::exp(d);
      } else {
        f_abs_[i] = f[i];
        u_[i] = 1.0;
        rebuild_row(i);
      }
    }
  }

  void set_g(const Vector& g) {
    g_ = g;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      if (g[j] == -kInf) {
        v_[j] = 0.0;
        continue;
      }
      const double d = (g[j] - g_abs_[j]) / eps_;
      if (std::abs(d) <= kBand) {
        v_[j] = std::exp(d);
      } else {
        g_abs_[j] = g[j];
        v_[j] = 1.0;
        rebuild_col(j);
      }
    }
  }

 private:
  // Entries below kFlush are stored as zero: subnormals make the products
  // very slow, and m * kFlush * e^band is negligible next to kSafeLow.
  double entry(Eigen::Index i, Eigen::Index j) const {
    if (cost_.blocked(i, j)) return 0.0;
    const double k = std::exp((f_abs_[i] + g_abs_[j] - c_(i, j)) / eps_);
    return k < kFlush ? 0.0 : k;
  }
  void rebuild_row(Eigen::Index i) {
    for (Eigen::Index j = 0; j < k_.cols(); ++j) k_(i, j) = entry(i, j);
  }
  void rebuild_col(Eigen::Index j) {
    for (Eigen::Index i = 0; i < k_.rows(); ++i) k_(i, j) = entry(i, j);
  }

  const CostMatrix& cost_;
  const Matrix& c_;
  const Matrix& ct_;
  double eps_;
  Vector f_abs_, g_abs_, u_, v_, f_, g_;
  Matrix k_;
  Vector prod_rows_, prod_cols_;
  Eigen::ArrayXd row_scratch_, col_scratch_;
};

/// min{cap, log_mass - soft}, with -inf for absent mass and the cap when the
/// reduction was empty.
inline void capped_potential(const Vector& log_mass, const Vector& soft, double cap, Vector& out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out[i] = log_mass[i] == -kInf ? -kInf : std::min(cap, log_mass[i] - soft[i]);
  }
}

}  // namespace detail

/// Log-domain form of the same iteration on potentials f = eps log u,
/// g = eps log v, from f = g = 0:
///   f_i <- min{gamma, eps log a_i - eps log sum_j exp((g_j - C_ij) / eps)}
/// and symmetrically for g. Blocked entries never enter a reduction, so the
/// plan is exactly zero there, and every value stays finite for any epsilon
/// and gamma. Convergence is the sup-norm change of (f, g) / eps.
inline SolverResult solve_sot_logdomain(const Marginal& a, const Marginal& b,
                                        const CostMatrix& cost, const SolverConfig& cfg) {
  cfg.validate();
  detail::check_dimensions(a, b, cost);
  const double eps = cfg.epsilon;
  const Matrix ct = cost.entries().transpose();
  const Vector log_a = detail::eps_log(a.weights(), eps);
  const Vector log_b = detail::eps_log(b.weights(), eps);
  detail::StabilizedKernel kernel(cost, ct, eps);

  SolverResult r;
  Vector f(cost.rows()), g(cost.cols());
  Vector soft_rows(cost.rows()), soft_cols(cost.cols());
  for (int it = 1; it <= cfg.max_iter; ++it) {
    kernel.row_soft_max(soft_rows);
    detail::capped_potential(log_a, soft_rows, cfg.gamma, f);
    const double df = detail::potential_change(kernel.f(), f, eps);
    kernel.set_f(f);
    kernel.col_soft_max(soft_cols);
    detail::capped_potential(log_b, soft_cols, cfg.gamma, g);
    const double dg = detail::potential_change(kernel.g(), g, eps);
    kernel.set_g(g);
    r.iterations = it;
    if (std::max(df, dg) < cfg.tol) {
      r.converged = true;
      break;
    }
  }
  r.f = kernel.f();
  r.g = kernel.g();
  r.plan = TransportPlan(detail::logdomain_plan(r.f, r.g, cost, eps));
  r.u = (r.f / eps).array().exp();
  r.v = (r.g / eps).array().exp();
  detail::finish(r, cost);
  return r;
}

/// True when e^{gamma/eps} is too large for the standard-domain cap.
inline bool needs_log_domain(const SolverConfig& cfg) {
  return cfg.gamma / cfg.epsilon > kStandardDomainLogCapLimit;
}

/// Dispatches on cfg.log_domain. A standard-domain request whose cap would be
/// clamped runs in the log domain instead, so gamma keeps its meaning.
inline SolverResult solve(const Marginal& a, const Marginal& b, const CostMatrix& cost,
                          const SolverConfig& cfg) {
  if (cfg.log_domain || needs_log_domain(cfg)) return solve_sot_logdomain(a, b, cost, cfg);
  return solve_sot(a, b, cost, cfg);
}

struct GammaTracePoint {
  double gamma = 0.0;
  double transported_mass = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct GammaSelection {
  double gamma = 0.0;
  std::vector<GammaTracePoint> trace;
  /// False when no later entry agrees with the chosen one within mass_tol
  /// (a schedule of length 1, or nothing saturated); `gamma` is then the
  /// last usable entry.
  bool saturated = false;
  SolverResult result;  // solve at the selected gamma
};

inline const std::vector<double>& default_gamma_schedule() {
  static const std::vector<double> schedule{0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 100.0};
  return schedule;
}

inline double default_mass_tol(const Marginal& a, const Marginal& b) {
  return 1e-4 * std::min(a.mass(), b.mass());
}

/// Runs the solver for each gamma of an ascending schedule and returns the
/// first gamma whose transported mass agrees within mass_tol with that of
/// every later entry. Only converged solves take part when there are any:
/// at large gamma the scalings of blocked mass climb towards e^{gamma/eps}
/// and the iteration may stop early with marginals still violated. A
/// negative mass_tol selects default_mass_tol(a, b).
inline GammaSelection select_gamma(const Marginal& a, const Marginal& b, const CostMatrix& cost,
                                   const SolverConfig& cfg, const std::vector<double>& schedule,
                                   double mass_tol = -1.0) {
  if (schedule.empty()) throw std::invalid_argument("select_gamma: empty gamma schedule");
  for (std::size_t k = 1; k < schedule.size(); ++k) {
    if (!(schedule[k] > schedule[k - 1])) {
      throw std::invalid_argument("select_gamma: schedule must be strictly ascending");
    }
  }
  if (mass_tol < 0.0) mass_tol = default_mass_tol(a, b);

  GammaSelection sel;
  std::vector<SolverResult> results;
  results.reserve(schedule.size());
  for (double gamma : schedule) {
    SolverConfig c = cfg;
    c.gamma = gamma;
    results.push_back(solve(a, b, cost, c));
    const auto& r = results.back();
    sel.trace.push_back({gamma, r.transported_mass, r.converged, r.iterations});
  }
  std::vector<std::size_t> usable;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    if (sel.trace[k].converged) usable.push_back(k);
  }
  if (usable.empty()) {
    for (std::size_t k = 0; k < schedule.size(); ++k) usable.push_back(k);
  }
  // Scan from the top: extend the saturated run downwards while every mass
  // in it stays within mass_tol of every other.
  std::size_t first = usable.size() - 1;
  double lo = sel.trace[usable[first]].transported_mass;
  double hi = lo;
  while (first > 0) {
    const double m = sel.trace[usable[first - 1]].transported_mass;
    if (std::max(hi, m) - std::min(lo, m) > mass_tol) break;
    lo = std::min(lo, m);
    hi = std::max(hi, m);
    --first;
  }
  const std::size_t chosen = usable[first];
  for (std::size_t k = chosen + 1; k < schedule.size(); ++k) {
    sel.saturated = sel.saturated || std::abs(sel.trace[k].transported_mass -
                                              sel.trace[chosen].transported_mass) <= mass_tol;
  }
  sel.gamma = schedule[chosen];
  sel.result = std::move(results[chosen]);
  return sel;
}

}  // namespace sot

#endif  // SOT_SINKHORN_HPP
