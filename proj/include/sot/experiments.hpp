#ifndef SOT_EXPERIMENTS_HPP
#define SOT_EXPERIMENTS_HPP

#include <sot/barycenter.hpp>
#include <sot/core.hpp>
#include <sot/parallel.hpp>
#include <sot/sinkhorn.hpp>
#include <sot/table.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sot {

inline constexpr const char* kVersion = "0.1.0";

/// Output of one scripted experiment: named tables plus pass/fail checks of
/// the qualitative claims it reproduces.
struct ExperimentResult {
  std::string name;
  nlohmann::ordered_json spec;
  std::vector<std::pair<std::string, Table>> tables;
  nlohmann::ordered_json checks = nlohmann::ordered_json::object();

  [[nodiscard]] const Table& table(const std::string& key) const {
    for (const auto& [k, t] : tables) {
      if (k == key) return t;
    }
    throw std::out_of_range("experiment " + name + " has no table " + key);
  }

  [[nodiscard]] bool all_checks_pass() const {
    for (const auto& [key, value] : checks.items()) {
      if (value.is_boolean() && !value.get<bool>()) return false;
    }
    return true;
  }
};

/// Gaussian marginal pair shared by several experiments.
struct GaussianPair {
  Eigen::Index n = 200;
  double center_a = 0.2;
  double center_b = 0.8;
  double width = 0.1;
  double floor = 0.001;
  double mass_a = 1.0;
  double mass_b = 1.0;

  [[nodiscard]] Marginal a() const { return discretized_gaussian(center_a, width, floor, n, mass_a); }
  [[nodiscard]] Marginal b() const { return discretized_gaussian(center_b, width, floor, n, mass_b); }
  [[nodiscard]] nlohmann::ordered_json to_json() const {
    return {{"n", n},           {"center_a", center_a}, {"center_b", center_b},
            {"width", width},   {"floor", floor},       {"mass_a", mass_a},
            {"mass_b", mass_b}};
  }
};

inline nlohmann::ordered_json to_json(const SolverConfig& cfg) {
  return {{"epsilon", cfg.epsilon},
          {"gamma", cfg.gamma},
          {"max_iter", cfg.max_iter},
          {"tol", cfg.tol},
          {"log_domain", cfg.log_domain}};
}

// ---------------------------------------------------------------------------
// gamma sweep

struct GammaSweepSpec {
  GaussianPair marginals;
  double c_cut = 0.5;
  SolverConfig cfg{.epsilon = 0.01, .gamma = 0.0, .max_iter = 400000, .tol = 1e-9,
                   .log_domain = true};
  std::vector<double> schedule{0.0, 0.1, 0.2, 0.5, 100.0};
  double mass_tol = -1.0;  // negative: default_mass_tol
  double expected_gamma = 0.5;
  double saturation_tol = 1e-3;
};

/// Transported mass per gamma of the schedule and the gamma picked by
/// select_gamma.
inline ExperimentResult run_gamma_sweep(const GammaSweepSpec& spec = {}) {
  const Marginal a = spec.marginals.a();
  const Marginal b = spec.marginals.b();
  const Vector x = uniform_grid(spec.marginals.n);
  const CostMatrix cost = truncated_sq_cost(x, x, spec.c_cut);
  const GammaSelection sel = select_gamma(a, b, cost, spec.cfg, spec.schedule, spec.mass_tol);

  ExperimentResult out;
  out.name = "gamma-sweep";
  out.spec = {{"marginals", spec.marginals.to_json()}, {"c_cut", spec.c_cut},
              {"solver", to_json(spec.cfg)},          {"schedule", spec.schedule},
              {"mass_tol", spec.mass_tol < 0 ? default_mass_tol(a, b) : spec.mass_tol},
              {"expected_gamma", spec.expected_gamma}, {"saturation_tol", spec.saturation_tol}};
  Table t{{"gamma", "transported_mass", "converged", "iterations"}, {}};
  for (const auto& p : sel.trace) {
    t.add({p.gamma, p.transported_mass, p.converged ? 1.0 : 0.0, double(p.iterations)});
  }
  out.tables.emplace_back("gamma_sweep", std::move(t));

  out.checks["selected_gamma"] = sel.gamma;
  out.checks["saturated"] = sel.saturated;
  double at_expected = -1.0;
  for (const auto& p : sel.trace) {
    if (p.gamma == spec.expected_gamma) at_expected = p.transported_mass;
  }
  if (at_expected >= 0.0) {
    out.checks["saturation_gap"] = std::abs(sel.trace.back().transported_mass - at_expected);
    out.checks["saturates_at_expected_gamma"] =
        std::abs(sel.trace.back().transported_mass - at_expected) <= spec.saturation_tol;
  }
  if (sel.trace.front().gamma == 0.0) {
    out.checks["gamma0_mass"] = sel.trace.front().transported_mass;
    out.checks["gamma0_mass_small"] = sel.trace.front().transported_mass < 0.05;
  }
  return out;
}

// ---------------------------------------------------------------------------
// epsilon and cutoff sweeps

namespace detail {

/// Per-grid-point profile rows: key, index, x, a, b, P 1, P^T 1.
inline void add_profile(Table& t, double key, const Vector& x, const Marginal& a,
                        const Marginal& b, const TransportPlan& plan) {
  const auto [rows, cols] = marginals(plan);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    t.add({key, double(i), x[i], a[i], b[i], rows[i], cols[i]});
  }
}

/// sum_j x_j w_j / sum_j w_j.
inline double mean_position(const Vector& x, const Vector& w) {
  const double total = w.sum();
  return total > 0.0 ? x.dot(w) / total : 0.0;
}

}  // namespace detail

struct EpsilonSweepSpec {
  GaussianPair marginals{.mass_a = 0.5, .mass_b = 1.0};
  double c_cut = 0.7;
  SolverConfig cfg{.epsilon = 1.0, .gamma = 2.0, .max_iter = 100000, .tol = 1e-9,
                   .log_domain = false};
  std::vector<double> epsilons{1.0, 0.5, 0.1, 0.05, 0.025};
  double residual_tol = 1e-2;
};

/// For each epsilon: how much of a and b gets transported, and where the
/// transported part of b sits (mean position of P^T 1).
inline ExperimentResult run_epsilon_sweep(const EpsilonSweepSpec& spec = {}) {
  const Marginal a = spec.marginals.a();
  const Marginal b = spec.marginals.b();
  const Vector x = uniform_grid(spec.marginals.n);
  const CostMatrix cost = truncated_sq_cost(x, x, spec.c_cut);

  std::vector<SolverResult> results(spec.epsilons.size());
  parallel_for(0, spec.epsilons.size(), [&](std::size_t k) {
    SolverConfig cfg = spec.cfg;
    cfg.epsilon = spec.epsilons[k];
    results[k] = solve(a, b, cost, cfg);
  });

  ExperimentResult out;
  out.name = "epsilon-sweep";
  out.spec = {{"marginals", spec.marginals.to_json()}, {"c_cut", spec.c_cut},
              {"solver", to_json(spec.cfg)},          {"epsilons", spec.epsilons},
              {"residual_tol", spec.residual_tol}};
  Table summary{{"epsilon", "transported_mass", "a_residual_l1", "b_transported_mass",
                 "b_mean_position", "converged", "iterations"},
                {}};
  Table profiles{{"epsilon", "index", "x", "a", "b", "a_transported", "b_transported"}, {}};
  bool a_transported = true;
  bool b_half = true;
  bool decreasing = true;
  double previous_mean = kInf;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    const auto [rows, cols] = marginals(r.plan);
    const double residual = (a.weights() - rows).lpNorm<1>();
    const double mean = detail::mean_position(x, cols);
    summary.add({spec.epsilons[k], r.transported_mass, residual, cols.sum(), mean,
                 r.converged ? 1.0 : 0.0, double(r.iterations)});
    detail::add_profile(profiles, spec.epsilons[k], x, a, b, r.plan);
    a_transported = a_transported && residual <= spec.residual_tol;
    b_half = b_half && std::abs(cols.sum() - a.mass()) <= spec.residual_tol;
    decreasing = decreasing && mean < previous_mean;
    previous_mean = mean;
  }
  out.tables.emplace_back("epsilon_sweep", std::move(summary));
  out.tables.emplace_back("epsilon_profiles", std::move(profiles));
  out.checks["a_fully_transported"] = a_transported;
  out.checks["b_reached_mass_matches_a"] = b_half;
  out.checks["b_mean_position_decreasing"] = decreasing;
  return out;
}

struct CutoffSweepSpec {
  GaussianPair marginals;
  std::vector<double> cutoffs{0.25, 0.35, 0.50, 0.55, 10.0};
  SolverConfig cfg{.epsilon = 0.05, .gamma = 2.0, .max_iter = 100000, .tol = 1e-9,
                   .log_domain = false};
  double full_transport_mass = 0.999;
};

/// Transported mass and profiles for each cutoff.
inline ExperimentResult run_cutoff_sweep(const CutoffSweepSpec& spec = {}) {
  const Marginal a = spec.marginals.a();
  const Marginal b = spec.marginals.b();
  const Vector x = uniform_grid(spec.marginals.n);

  std::vector<SolverResult> results(spec.cutoffs.size());
  parallel_for(0, spec.cutoffs.size(), [&](std::size_t k) {
    results[k] = solve(a, b, truncated_sq_cost(x, x, spec.cutoffs[k]), spec.cfg);
  });

  ExperimentResult out;
  out.name = "cutoff-sweep";
  out.spec = {{"marginals", spec.marginals.to_json()},
              {"cutoffs", spec.cutoffs},
              {"solver", to_json(spec.cfg)},
              {"full_transport_mass", spec.full_transport_mass}};
  Table summary{{"c_cut", "transported_mass", "cost", "converged", "iterations"}, {}};
  Table profiles{{"c_cut", "index", "x", "a", "b", "a_transported", "b_transported"}, {}};
  bool nondecreasing = true;
  double previous = -kInf;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    summary.add({spec.cutoffs[k], r.transported_mass, r.cost, r.converged ? 1.0 : 0.0,
                 double(r.iterations)});
    detail::add_profile(profiles, spec.cutoffs[k], x, a, b, r.plan);
    // Tolerance for the entropic blur at equal cutoffs.
    nondecreasing = nondecreasing && r.transported_mass >= previous - 1e-9;
    previous = r.transported_mass;
  }
  out.tables.emplace_back("cutoff_sweep", std::move(summary));
  out.tables.emplace_back("cutoff_profiles", std::move(profiles));
  out.checks["mass_nondecreasing_in_cutoff"] = nondecreasing;
  out.checks["largest_cutoff_mass"] = results.back().transported_mass;
  out.checks["largest_cutoff_full_transport"] =
      results.back().transported_mass >= spec.full_transport_mass;
  return out;
}

// ---------------------------------------------------------------------------
// barycenter phase diagram

struct BarycenterGridSpec {
  Eigen::Index n = 200;
  double indicator_lo = 0.1;
  double indicator_hi = 0.3;
  double floor = 0.001;
  double mass_b1 = 1.0;
  double center_b2 = 0.8;
  double width_b2 = 0.1;
  double mass_b2 = 1.2;
  std::vector<double> cutoffs{1.00, 0.50, 0.40, 0.30, 0.28, 0.26, 0.24, 0.22, 0.20};
  std::vector<double> lambda1{0.9, 0.5, 0.1};
  // At epsilon = 1e-2 the entropic blur (about 0.1 in x) washes out the
  // indicator's shape; the barycenters are stationary well before 5000 sweeps.
  SolverConfig cfg{.epsilon = 5e-4, .gamma = 2.0, .max_iter = 5000, .tol = 1e-9,
                   .log_domain = true};

  [[nodiscard]] Marginal b1() const {
    const double lo = indicator_lo;
    const double hi = indicator_hi;
    const double fl = floor;
    // Small slack so grid points landing on the interval ends count as inside.
    return discretize(
        [=](double t) { return (t >= lo - 1e-12 && t <= hi + 1e-12 ? 1.0 : 0.0) + fl; }, n,
        mass_b1);
  }
  [[nodiscard]] Marginal b2() const {
    return discretized_gaussian(center_b2, width_b2, floor, n, mass_b2);
  }
};

/// Barycenters of (b1, b2) over the cutoff x lambda grid, with their
/// resemblance to each marginal.
inline ExperimentResult run_barycenter_grid(const BarycenterGridSpec& spec = {}) {
  const Marginal b1 = spec.b1();
  const Marginal b2 = spec.b2();
  const Vector x = uniform_grid(spec.n);
  const std::size_t cells = spec.cutoffs.size() * spec.lambda1.size();

  std::vector<BarycenterResult> results(cells);
  parallel_for(0, cells, [&](std::size_t k) {
    const double c_cut = spec.cutoffs[k / spec.lambda1.size()];
    const double l1 = spec.lambda1[k % spec.lambda1.size()];
    BarycenterProblem prob{{b1, b2}, {l1, 1.0 - l1}, truncated_sq_cost(x, x, c_cut), spec.cfg};
    results[k] = barycenter(prob);
  });

  ExperimentResult out;
  out.name = "barycenter-grid";
  out.spec = {{"n", spec.n},
              {"b1", {{"indicator", {spec.indicator_lo, spec.indicator_hi}},
                      {"floor", spec.floor},
                      {"mass", spec.mass_b1}}},
              {"b2", {{"center", spec.center_b2},
                      {"width", spec.width_b2},
                      {"floor", spec.floor},
                      {"mass", spec.mass_b2}}},
              {"cutoffs", spec.cutoffs},
              {"lambda1", spec.lambda1},
              {"solver", to_json(spec.cfg)}};
  Table grid{{"c_cut", "lambda1", "lambda2", "resem_b1", "resem_b2", "barycenter_mass",
              "weighted_cost", "converged", "iterations"},
             {}};
  Table profiles{{"c_cut", "lambda1", "index", "x", "a"}, {}};
  for (std::size_t k = 0; k < cells; ++k) {
    const double c_cut = spec.cutoffs[k / spec.lambda1.size()];
    const double l1 = spec.lambda1[k % spec.lambda1.size()];
    const auto& r = results[k];
    grid.add({c_cut, l1, 1.0 - l1, resemblance(r.a, b1, b1, b2), resemblance(r.a, b2, b1, b2),
              r.a.mass(), r.weighted_cost, r.converged ? 1.0 : 0.0, double(r.iterations)});
    for (Eigen::Index i = 0; i < x.size(); ++i) profiles.add({c_cut, l1, double(i), x[i], r.a[i]});
  }

  // The ordering of the two resemblances at lambda1 = max is compared between
  // the largest and the second-largest cutoff (1.0 and 0.5 by default).
  if (spec.cutoffs.size() >= 2 && !spec.lambda1.empty()) {
    const auto& rows = grid.rows;
    const std::size_t l = spec.lambda1.size();
    const bool normal = rows[0][3] < rows[0][4];
    const bool reversed = rows[l][4] < rows[l][3];
    out.checks["large_cutoff_resembles_heavier_marginal"] = normal;
    out.checks["small_cutoff_reverses_resemblance"] = reversed;
  }
  out.tables.emplace_back("barycenter_grid", std::move(grid));
  out.tables.emplace_back("barycenter_profiles", std::move(profiles));
  return out;
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"gamma-sweep", "epsilon-sweep", "cutoff-sweep",
                                              "barycenter-grid"};
  return names;
}

/// Runs a named experiment with its default spec.
inline ExperimentResult run_experiment(const std::string& name) {
  if (name == "gamma-sweep") return run_gamma_sweep();
  if (name == "epsilon-sweep") return run_epsilon_sweep();
  if (name == "cutoff-sweep") return run_cutoff_sweep();
  if (name == "barycenter-grid") return run_barycenter_grid();
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

/// Writes every table as <table>.csv and a manifest <name>.json into `dir`.
/// Nothing time- or host-dependent goes into the files.
inline nlohmann::ordered_json write_experiment(const ExperimentResult& r,
                                               const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["experiment"] = r.name;
  manifest["version"] = kVersion;
  manifest["spec"] = r.spec;
  manifest["outputs"] = nlohmann::ordered_json::array();
  for (const auto& [key, table] : r.tables) {
    const std::string file = key + ".csv";
    table.write_csv((dir / file).string());
    manifest["outputs"].push_back({{"file", file}, {"columns", table.columns},
                                   {"rows", table.rows.size()}});
  }
  manifest["checks"] = r.checks;
  const auto path = dir / (r.name + ".json");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << manifest.dump(2) << '\n';
  return manifest;
}

}  // namespace sot

#endif  // SOT_EXPERIMENTS_HPP
