// Two Gaussian bumps on [0, 1) whose far tails are blocked by a distance
// cutoff. Prints the transported mass for a few gamma values and the
// marginals actually reached.
#include <sot/core.hpp>
#include <sot/sinkhorn.hpp>

#include <cstdio>

int main() {
  const Eigen::Index n = 200;
  const sot::Marginal a = sot::discretized_gaussian(0.2, 0.1, 0.001, n, 1.0);
  const sot::Marginal b = sot::discretized_gaussian(0.8, 0.1, 0.001, n, 1.0);
  const sot::Vector x = sot::uniform_grid(n);
  const sot::CostMatrix cost = sot::truncated_sq_cost(x, x, 0.5);

  sot::SolverConfig cfg{.epsilon = 0.01, .gamma = 0.0, .max_iter = 100000, .tol = 1e-8,
                        .log_domain = true};
  std::printf("%8s %12s %10s\n", "gamma", "mass", "iters");
  for (double gamma : {0.0, 0.1, 0.2, 0.5, 2.0}) {
    cfg.gamma = gamma;
    const auto r = sot::solve(a, b, cost, cfg);
    std::printf("%8.2f %12.6f %10d%s\n", gamma, r.transported_mass, r.iterations,
                r.converged ? "" : " (not converged)");
  }

  // Where the mass goes at gamma = 2: only the inner tails can meet.
  cfg.gamma = 2.0;
  const auto r = sot::solve(a, b, cost, cfg);
  const auto [sent, received] = sot::marginals(r.plan);
  std::printf("\n%6s %10s %10s %10s %10s\n", "x", "a", "sent", "b", "received");
  for (Eigen::Index i = 0; i < n; i += 10) {
    std::printf("%6.3f %10.6f %10.6f %10.6f %10.6f\n", x[i], a[i], sent[i], b[i], received[i]);
  }
  return 0;
}
