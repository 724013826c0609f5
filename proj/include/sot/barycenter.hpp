#ifndef SOT_BARYCENTER_HPP
#define SOT_BARYCENTER_HPP

#include <sot/core.hpp>
#include <sot/sinkhorn.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace sot {

struct BarycenterProblem {
  std::vector<Marginal> marginals;
  std::vector<double> weights;  // lambda, strictly inside the simplex
  CostMatrix cost;
  SolverConfig cfg;

  void validate() const {
    cfg.validate();
    if (marginals.empty()) throw std::invalid_argument("barycenter: no marginals given");
    if (weights.size() != marginals.size()) {
      throw std::invalid_argument("barycenter: " + std::to_string(weights.size()) +
                                  " weights for " + std::to_string(marginals.size()) +
                                  " marginals");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      const double w = weights[j];
      if (!std::isfinite(w) || w < 0.0) {
        throw std::invalid_argument("barycenter: weight " + std::to_string(j) +
                                    " is negative or not finite");
      }
      if (w == 0.0) {
        throw std::invalid_argument(
            "barycenter: weight " + std::to_string(j) +
            " is zero; boundary weights define a discontinuous limit, pass interior weights "
            "such as (delta, 1 - delta) instead");
      }
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw std::invalid_argument("barycenter: weights sum to " + std::to_string(total) +
                                  ", expected 1");
    }
    for (std::size_t j = 0; j < marginals.size(); ++j) {
      if (marginals[j].size() != cost.cols()) {
        throw std::invalid_argument("barycenter: marginal " + std::to_string(j) + " has " +
                                    std::to_string(marginals[j].size()) +
                                    " entries but the cost has " + std::to_string(cost.cols()) +
                                    " columns");
      }
    }
  }
};

struct BarycenterResult {
  Marginal a;
  std::vector<TransportPlan> plans;
  std::vector<Vector> u, v;  // scalings (both domains)
  std::vector<Vector> f, g;  // potentials, log domain only
  std::vector<double> costs;  // <P_j, C>
  double weighted_cost = 0.0;  // sum_j lambda_j <P_j, C>
  int iterations = 0;
  bool converged = false;
};

/// Replaces zero weights by delta and rescales the others so the total stays
/// 1: (0, 1) becomes (delta, 1 - delta).
inline std::vector<double> limit_weights(std::vector<double> weights, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("limit_weights: delta must lie in (0, 1)");
  }
  std::size_t zeros = 0;
  double rest = 0.0;
  for (double w : weights) {
    if (w == 0.0) {
      ++zeros;
    } else {
      rest += w;
    }
  }
  const double free_mass = 1.0 - static_cast<double>(zeros) * delta;
  if (zeros == 0) return weights;
  if (!(free_mass > 0.0) || !(rest > 0.0)) {
    throw std::invalid_argument("limit_weights: delta too large for the number of zero weights");
  }
  for (double& w : weights) w = w == 0.0 ? delta : w * free_mass / rest;
  return weights;
}

/// Elementwise min{e^ratio q, bound}, the KL proximal step of the capped
/// l1 penalty. Evaluated in log form so a huge ratio never overflows.
inline Vector prox_kl_capped(const Vector& q, const Vector& bound, double ratio) {
  if (q.size() != bound.size()) throw std::invalid_argument("prox_kl_capped: size mismatch");
  Vector out(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (!(q[i] > 0.0) || !(bound[i] > 0.0)) {
      out[i] = 0.0;
    } else if (ratio + std::log(q[i]) >= std::log(bound[i])) {
      out[i] = bound[i];
    } else {
      out[i] = std::exp(ratio) * q[i];
    }
  }
  return out;
}

/// Elementwise weighted geometric mean prod_j p_j^lambda_j, with 0^lambda = 0.
inline Vector prox_geometric_mean(const std::vector<Vector>& p, const std::vector<double>& lambda) {
  if (p.empty() || p.size() != lambda.size()) {
    throw std::invalid_argument("prox_geometric_mean: need one weight per vector");
  }
  const Eigen::Index n = p.front().size();
  Vector log_sum = Vector::Zero(n);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j].size() != n) throw std::invalid_argument("prox_geometric_mean: size mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
      log_sum[i] += p[j][i] > 0.0 ? lambda[j] * std::log(p[j][i]) : -kInf;
    }
  }
  return log_sum.array().exp();
}

namespace detail {

inline void finish(BarycenterResult& r, const BarycenterProblem& prob) {
  r.costs.clear();
  r.weighted_cost = 0.0;
  for (std::size_t j = 0; j < r.plans.size(); ++j) {
    r.costs.push_back(plan_cost(r.plans[j], prob.cost));
    r.weighted_cost += prob.weights[j] * r.costs.back();
  }
}

}  // namespace detail

/// Diagonal scaling for the weighted sOT barycenter, from v_j = 1:
///   a = prod_j (K v_j)^lambda_j,  u_j = a ./ (K v_j),
///   v_j = min{b_j ./ (K^T u_j), e^{gamma / (lambda_j eps)}}.
/// Stops when log a and every log v_j change by less than cfg.tol in one
/// sweep. Rows with K v_j = 0 for some j get a = 0 and u_j = 0.
inline BarycenterResult solve_barycenter(const BarycenterProblem& prob) {
  prob.validate();
  const auto& cfg = prob.cfg;
  const std::size_t J = prob.marginals.size();
  const Eigen::Index n = prob.cost.rows();
  const Eigen::Index m = prob.cost.cols();
  const Matrix kernel = gibbs_kernel(prob.cost, cfg.epsilon);

  std::vector<double> caps(J);
  for (std::size_t j = 0; j < J; ++j) {
    caps[j] = std::exp(
        std::min(cfg.gamma / (prob.weights[j] * cfg.epsilon), kStandardDomainLogCapLimit));
  }

  BarycenterResult r;
  r.u.assign(J, Vector::Ones(n));
  r.v.assign(J, Vector::Ones(m));
  std::vector<Vector> kv(J);
  Vector a = Vector::Ones(n);
  Vector v_next(m);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    for (std::size_t j = 0; j < J; ++j) kv[j].noalias() = kernel * r.v[j];
    const Vector a_next = prox_geometric_mean(kv, prob.weights);
    double change = detail::scaling_change(a, a_next);
    a = a_next;
    for (std::size_t j = 0; j < J; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) r.u[j][i] = kv[j][i] > 0.0 ? a[i] / kv[j][i] : 0.0;
      const Vector ktu = kernel.transpose() * r.u[j];
      const Vector& bw = prob.marginals[j].weights();
      for (Eigen::Index k = 0; k < m; ++k) {
        v_next[k] = detail::capped_ratio(bw[k], ktu[k], caps[j]);
      }
      change = std::max(change, detail::scaling_change(r.v[j], v_next));
      r.v[j] = v_next;
    }
    r.iterations = it;
    if (change < cfg.tol) {
      r.converged = true;
      break;
    }
  }
  // Row sums of every plan equal a, so it is recomputed from the final v.
  for (std::size_t j = 0; j < J; ++j) kv[j].noalias() = kernel * r.v[j];
  a = prox_geometric_mean(kv, prob.weights);
  for (std::size_t j = 0; j < J; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) r.u[j][i] = kv[j][i] > 0.0 ? a[i] / kv[j][i] : 0.0;
    r.plans.emplace_back(r.u[j].asDiagonal() * kernel * r.v[j].asDiagonal());
  }
  r.a = Marginal(a);
  detail::finish(r, prob);
  return r;
}

/// Log-domain barycenter iteration, from f_j = g_j = 0. With
/// s_j = eps log sum_k exp((g_j,k - C_.k) / eps):
///   f_j <- sum_i lambda_i s_i - s_j,
///   g_j <- min{eps log b_j - eps log sum_i exp((f_j,i - C_i.) / eps), gamma / lambda_j}.
/// The barycenter is a = exp(sum_i lambda_i s_i / eps).
inline BarycenterResult solve_barycenter_logdomain(const BarycenterProblem& prob) {
  prob.validate();
  const auto& cfg = prob.cfg;
  const double eps = cfg.epsilon;
  const std::size_t J = prob.marginals.size();
  const Eigen::Index n = prob.cost.rows();
  const Eigen::Index m = prob.cost.cols();
  const Matrix ct = prob.cost.entries().transpose();

  std::vector<detail::StabilizedKernel> kernels;
  std::vector<Vector> log_b;
  kernels.reserve(J);
  for (std::size_t j = 0; j < J; ++j) {
    kernels.emplace_back(prob.cost, ct, eps);
    log_b.push_back(detail::eps_log(prob.marginals[j].weights(), eps));
  }

  std::vector<Vector> s(J, Vector(n));
  Vector mean(n), f(n), g(m), soft_cols(m);
  // Rows where some s_j is -inf carry no mass in any plan.
  auto geometric_mean = [&] {
    for (std::size_t j = 0; j < J; ++j) kernels[j].row_soft_max(s[j]);
    for (Eigen::Index i = 0; i < n; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < J; ++j) {
        if (s[j][i] == -kInf) {
          total = -kInf;
          break;
        }
        total += prob.weights[j] * s[j][i];
      }
      mean[i] = total;
    }
  };

  BarycenterResult r;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    geometric_mean();
    double change = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) f[i] = mean[i] == -kInf ? -kInf : mean[i] - s[j][i];
      change = std::max(change, detail::potential_change(kernels[j].f(), f, eps));
      kernels[j].set_f(f);
      kernels[j].col_soft_max(soft_cols);
      detail::capped_potential(log_b[j], soft_cols, cfg.gamma / prob.weights[j], g);
      change = std::max(change, detail::potential_change(kernels[j].g(), g, eps));
      kernels[j].set_g(g);
    }
    r.iterations = it;
    if (change < cfg.tol) {
      r.converged = true;
      break;
    }
  }
  // Final f-step so that every plan has row sums equal to a.
  geometric_mean();
  for (std::size_t j = 0; j < J; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) f[i] = mean[i] == -kInf ? -kInf : mean[i] - s[j][i];
    r.f.push_back(f);
    r.g.push_back(kernels[j].g());
    r.u.push_back((f / eps).array().exp());
    r.v.push_back((r.g.back() / eps).array().exp());
    r.plans.emplace_back(detail::logdomain_plan(f, r.g.back(), prob.cost, eps));
  }
  r.a = Marginal(Vector((mean / eps).array().exp()));
  detail::finish(r, prob);
  return r;
}

/// Dispatches on prob.cfg.log_domain, switching to the log domain when some
/// cap e^{gamma / (lambda_j eps)} is too large for the standard domain.
inline BarycenterResult barycenter(const BarycenterProblem& prob) {
  double smallest = 1.0;
  for (double w : prob.weights) smallest = std::min(smallest, w);
  const bool clamped = smallest > 0.0 &&
                       prob.cfg.gamma / (smallest * prob.cfg.epsilon) > kStandardDomainLogCapLimit;
  return prob.cfg.log_domain || clamped ? solve_barycenter_logdomain(prob)
                                        : solve_barycenter(prob);
}

/// Smallest L2 distance between `target` and any circular shift of `x`.
inline double shift_distance(const Vector& target, const Vector& x) {
  if (target.size() != x.size()) throw std::invalid_argument("shift_distance: size mismatch");
  double best = kInf;
  for (long k = 0; k < static_cast<long>(x.size()); ++k) {
    best = std::min(best, (target - circshift(x, k)).norm());
  }
  return x.size() == 0 ? 0.0 : best;
}

/// min_k |target - circshift(a, k)| / min_k |ref1 - circshift(ref2, k)|.
/// Shifts by n repeat shift 0, so k runs over 0..n-1.
inline double resemblance(const Vector& a, const Vector& target, const Vector& ref1,
                          const Vector& ref2) {
  const double denom = shift_distance(ref1, ref2);
  if (!(denom > 0.0)) {
    throw std::invalid_argument(
        "resemblance: reference marginals coincide up to a shift, the ratio is undefined");
  }
  return shift_distance(target, a) / denom;
}

inline double resemblance(const Marginal& a, const Marginal& target, const Marginal& ref1,
                          const Marginal& ref2) {
  return resemblance(a.weights(), target.weights(), ref1.weights(), ref2.weights());
}

}  // namespace sot

#endif  // SOT_BARYCENTER_HPP
