#ifndef SOT_ORACLE_HPP
#define SOT_ORACLE_HPP

#include <sot/core.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sot {

/// Min-cost max-flow by successive shortest paths with Johnson potentials.
/// Capacities are integers; costs must be nonnegative on the forward arcs.
class MinCostFlow {
 public:
  using Flow = std::int64_t;

  struct Arc {
    int to;
    Flow cap;
    double cost;
  };

  explicit MinCostFlow(int nodes) : graph_(static_cast<std::size_t>(nodes)) {}

  /// Returns an arc id usable with flow_on().
  int add_arc(int from, int to, Flow cap, double cost) {
    const int id = static_cast<int>(arcs_.size());
    arcs_.push_back({to, cap, cost});
    arcs_.push_back({from, 0, -cost});
    graph_[static_cast<std::size_t>(from)].push_back(id);
    graph_[static_cast<std::size_t>(to)].push_back(id + 1);
    return id;
  }

  /// Flow pushed through arc `id` (the capacity of its reverse arc).
  [[nodiscard]] Flow flow_on(int id) const { return arcs_[static_cast<std::size_t>(id) ^ 1].cap; }

  /// Sends as much flow as possible from s to t at minimum cost.
  std::pair<Flow, double> run(int s, int t) {
    const std::size_t n = graph_.size();
    std::vector<double> potential(n, 0.0), dist(n);
    std::vector<int> via(n);
    Flow total_flow = 0;
    double total_cost = 0.0;
    while (true) {
      std::fill(dist.begin(), dist.end(), kInf);
      std::fill(via.begin(), via.end(), -1);
      dist[static_cast<std::size_t>(s)] = 0.0;
      using Item = std::pair<double, int>;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
      heap.emplace(0.0, s);
      while (!heap.empty()) {
        const auto [d, node] = heap.top();
        heap.pop();
        if (d > dist[static_cast<std::size_t>(node)]) continue;
        for (int id : graph_[static_cast<std::size_t>(node)]) {
          const Arc& arc = arcs_[static_cast<std::size_t>(id)];
          if (arc.cap <= 0) continue;
          // Rounding can make a reduced cost slightly negative; clamp it.
          const double reduced = std::max(
              0.0, arc.cost + potential[static_cast<std::size_t>(node)] -
                       potential[static_cast<std::size_t>(arc.to)]);
          const double nd = d + reduced;
          if (nd < dist[static_cast<std::size_t>(arc.to)]) {
            dist[static_cast<std::size_t>(arc.to)] = nd;
            via[static_cast<std::size_t>(arc.to)] = id;
            heap.emplace(nd, arc.to);
          }
        }
      }
      if (dist[static_cast<std::size_t>(t)] == kInf) break;
      for (std::size_t v = 0; v < n; ++v) {
        if (dist[v] < kInf) potential[v] += dist[v];
      }
      Flow push = std::numeric_limits<Flow>::max();
      for (int v = t; v != s;) {
        const int id = via[static_cast<std::size_t>(v)];
        push = std::min(push, arcs_[static_cast<std::size_t>(id)].cap);
        v = arcs_[static_cast<std::size_t>(id) ^ 1].to;
      }
      for (int v = t; v != s;) {
        const int id = via[static_cast<std::size_t>(v)];
        arcs_[static_cast<std::size_t>(id)].cap -= push;
        arcs_[static_cast<std::size_t>(id) ^ 1].cap += push;
        total_cost += static_cast<double>(push) * arcs_[static_cast<std::size_t>(id)].cost;
        v = arcs_[static_cast<std::size_t>(id) ^ 1].to;
      }
      total_flow += push;
    }
    return {total_flow, total_cost};
  }

 private:
  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> graph_;
};

/// Real masses are turned into integer capacities by this factor, rounding
/// half to even. Results are exact for the scaled instance.
inline constexpr double kOracleScale = 1e9;

/// Comparisons against oracle answers use this absolute slack.
inline constexpr double kOracleSlack = 1e-6;

struct ExactSolution {
  double theta_bar = 0.0;  // maximal transportable mass
  TransportPlan plan;
  double cost = 0.0;  // minimal <P, C> among plans moving theta_bar
};

namespace detail {

inline MinCostFlow::Flow to_capacity(double mass) {
  return static_cast<MinCostFlow::Flow>(std::nearbyint(mass * kOracleScale));
}

}  // namespace detail

/// Maximizes the transported mass over plans with P 1 <= a, P^T 1 <= b that
/// vanish on the inf-pattern, then minimizes <P, C> at that mass. Solved as
/// min-cost max-flow on source -> i (a_i) -> j (C_ij finite) -> sink (b_j).
inline ExactSolution solve_sot_exact(const Marginal& a, const Marginal& b, const CostMatrix& c) {
  if (a.size() != c.rows() || b.size() != c.cols()) {
    throw std::invalid_argument("solve_sot_exact: dimension mismatch");
  }
  const int n = static_cast<int>(c.rows());
  const int m = static_cast<int>(c.cols());
  const int source = n + m;
  const int sink = n + m + 1;
  MinCostFlow net(n + m + 2);
  for (int i = 0; i < n; ++i) net.add_arc(source, i, detail::to_capacity(a[i]), 0.0);
  for (int j = 0; j < m; ++j) net.add_arc(n + j, sink, detail::to_capacity(b[j]), 0.0);
  std::vector<int> arc_id(static_cast<std::size_t>(n) * static_cast<std::size_t>(m), -1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      if (c.blocked(i, j)) continue;
      const auto cap = std::min(detail::to_capacity(a[i]), detail::to_capacity(b[j]));
      arc_id[static_cast<std::size_t>(i * m + j)] = net.add_arc(i, n + j, cap, c(i, j));
    }
  }
  const auto [flow, cost] = net.run(source, sink);

  Matrix p = Matrix::Zero(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const int id = arc_id[static_cast<std::size_t>(i * m + j)];
      if (id >= 0) p(i, j) = static_cast<double>(net.flow_on(id)) / kOracleScale;
    }
  }
  ExactSolution out;
  out.theta_bar = static_cast<double>(flow) / kOracleScale;
  out.cost = cost / kOracleScale;
  out.plan = TransportPlan(std::move(p));
  return out;
}

/// North-west corner rule: fill (i, j) with the smaller remaining budget and
/// advance past whichever side is used up (both on a tie, judged relative to
/// the total mass).
inline TransportPlan northwest_corner(const Marginal& a, const Marginal& b) {
  const double total = std::max(a.mass(), b.mass());
  const double tie = 1e-12 * std::max(1.0, total);
  if (std::abs(a.mass() - b.mass()) > tie) {
    throw std::invalid_argument("northwest_corner: marginals carry different mass (" +
                                std::to_string(a.mass()) + " vs " + std::to_string(b.mass()) +
                                ")");
  }
  const Eigen::Index n = a.size();
  const Eigen::Index m = b.size();
  Matrix p = Matrix::Zero(n, m);
  Vector row = a.weights();
  Vector col = b.weights();
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  while (i < n && j < m) {
    const double q = std::min(row[i], col[j]);
    p(i, j) = q;
    row[i] -= q;
    col[j] -= q;
    const bool row_done = row[i] <= tie;
    const bool col_done = col[j] <= tie;
    if (row_done) ++i;
    if (col_done) ++j;
    if (!row_done && !col_done) ++i;  // unreachable except through rounding
  }
  return TransportPlan(std::move(p));
}

enum class CumulativeOrder { StrictlyLess, LessOrEqual, Equal, NotComparable };

inline const char* to_string(CumulativeOrder o) {
  switch (o) {
    case CumulativeOrder::StrictlyLess: return "StrictlyLess";
    case CumulativeOrder::LessOrEqual: return "LessOrEqual";
    case CumulativeOrder::Equal: return "Equal";
    case CumulativeOrder::NotComparable: return "NotComparable";
  }
  return "?";
}

/// Cumulative order u <=_C v: prefix sums of u stay below those of v for
/// k < n and the totals agree, all up to the absolute tolerance `tol`.
/// StrictlyLess: some prefix is below by more than tol. Equal: u == v.
/// LessOrEqual: comparable with every prefix within tol, yet u != v.
inline CumulativeOrder cumsum_compare(const Vector& u, const Vector& v, double tol = 1e-12) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cumsum_compare: lengths differ (" + std::to_string(u.size()) +
                                " vs " + std::to_string(v.size()) + ")");
  }
  double su = 0.0;
  double sv = 0.0;
  bool strict = false;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    su += u[k];
    sv += v[k];
    if (k + 1 == u.size()) break;
    if (su > sv + tol) return CumulativeOrder::NotComparable;
    if (su < sv - tol) strict = true;
  }
  if (std::abs(su - sv) > tol) return CumulativeOrder::NotComparable;
  if (strict) return CumulativeOrder::StrictlyLess;
  return u == v ? CumulativeOrder::Equal : CumulativeOrder::LessOrEqual;
}

inline bool cumulatively_leq(CumulativeOrder o) { return o != CumulativeOrder::NotComparable; }

/// True when a and b carry the same mass and all of it can be moved without
/// touching the inf-pattern.
inline bool complete_transport_feasible(const Marginal& a, const Marginal& b,
                                        const CostMatrix& c) {
  if (std::abs(a.mass() - b.mass()) > kOracleSlack) return false;
  const auto exact = solve_sot_exact(a, b, c);
  return exact.theta_bar >= a.mass() - kOracleSlack;
}

}  // namespace sot

#endif  // SOT_ORACLE_HPP
