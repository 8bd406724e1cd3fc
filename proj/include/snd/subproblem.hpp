#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "snd/instance.hpp"
#include "snd/qp.hpp"

namespace snd {

struct SubTolerances {
  double feas_tol = 1e-7;
  double dual_tol = 1e-7;
  double gap_tol = 1e-6;  // relative strong-duality gap
};

struct FlowSolution {
  std::vector<std::vector<double>> x;  // x[e][k], zero on closed edges
  double objective = 0.0;
};

// Feasible point of the dual (alpha free, beta >= 0, A'p <= f - alpha).
// p is canonicalized so each commodity's sink potential is zero.
struct DualSolution {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<std::vector<double>> p;  // p[k][n]
};

struct FarkasCertificate {
  std::vector<double> beta;            // >= 0, covers every edge
  std::vector<std::vector<double>> p;  // p[k][n]
  double violation = 0.0;              // sum_k <p,d> - sum_e z_e u_e beta_e > 0 at the queried z
};

enum class SubStatus { Optimal, Infeasible };

struct SubproblemResult {
  SubStatus status = SubStatus::Optimal;
  std::optional<FlowSolution> flow;
  std::optional<DualSolution> dual;
  std::optional<FarkasCertificate> farkas;
};

struct NumericalError : std::runtime_error {
  NumericalError(const std::string& msg, double prim, double dual, double gap)
      : std::runtime_error(msg + " (primal residual " + std::to_string(prim) + ", dual residual " +
                           std::to_string(dual) + ", gap " + std::to_string(gap) + ")"),
        primal_residual(prim),
        dual_residual(dual),
        gap(gap) {}
  double primal_residual, dual_residual, gap;
};

struct InfeasibleScenario : std::runtime_error {
  explicit InfeasibleScenario(std::vector<int> scen)
      : std::runtime_error(make_message(scen)), scenarios(std::move(scen)) {}
  std::vector<int> scenarios;  // 0-based ids

 private:
  static std::string make_message(const std::vector<int>& scen) {
    std::ostringstream oss;
    oss << "design has no feasible routing in scenario(s)";
    for (int r : scen) oss << ' ' << (r + 1);
    return oss.str();
  }
};

namespace detail {

// Sink (anchor) node of a commodity in a scenario: the most negative demand,
// ties broken by lowest index. Node 0 for all-zero demand.
inline int commodity_sink(const Instance& inst, int k, int r) {
  int best = 0;
  double best_d = inst.scenarios.demand(0, k, r);
  for (int n = 1; n < inst.num_nodes(); ++n) {
    const double d = inst.scenarios.demand(n, k, r);
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  return best;
}

inline double demand_scale(const Instance& inst, int r) {
  double s = 0.0;
  for (int k = 0; k < inst.num_commodities(); ++k)
    for (int n = 0; n < inst.num_nodes(); ++n) s = std::max(s, std::abs(inst.scenarios.demand(n, k, r)));
  return s;
}

struct ReducedMap {
  std::vector<int> open_edges;       // ascending edge ids with weight > 0
  std::vector<int> x_col_of_edge;    // first of K consecutive x columns, -1 if closed
  std::vector<int> y_col_of_edge;    // edge-total column (free), -1 if closed (phase two only)
  std::vector<int> s_col_of_edge;    // capacity slack column, -1 if none
  std::vector<int> cpl_row_of_edge;  // coupling row sum_k x - y = 0; its dual is alpha
  std::vector<int> cap_row_of_edge;  // -1 if closed or uncapacitated
  std::vector<int> row_of_node_com;  // k * N + n -> row id, -1 if dropped
  int n_cols = 0;
  int n_rows = 0;
};

}  // namespace detail

inline constexpr double kWeightTol = 1e-9;

// Edge weight of the Benders cut built from a dual solution:
//   w_e = u_e beta_e + (gamma/2) (alpha_e + beta_e)^2,
// with the conventions beta = 0 when u = inf and alpha + beta = 0 when
// gamma = inf.
inline std::vector<double> cut_edge_weights(const Instance& inst, const DualSolution& dual) {
  const int E = inst.num_edges();
  std::vector<double> w(static_cast<std::size_t>(E), 0.0);
  for (int e = 0; e < E; ++e) {
    const double u = inst.capacity[static_cast<std::size_t>(e)];
    const double a = dual.alpha[static_cast<std::size_t>(e)];
    const double b = dual.beta[static_cast<std::size_t>(e)];
    double we = 0.0;
    if (u != kInf) we += u * b;
    if (inst.gamma != kInf) we += 0.5 * inst.gamma * (a + b) * (a + b);
    w[static_cast<std::size_t>(e)] = we;
  }
  return w;
}

// q(z, alpha, beta, p; d^r): the valid lower bound on f(z; d^r) induced by a
// feasible dual solution.
inline double dual_bound_value(const Instance& inst, const DesignVector& z, const DualSolution& dual, int r) {
  double q = 0.0;
  for (int k = 0; k < inst.num_commodities(); ++k)
    for (int n = 0; n < inst.num_nodes(); ++n)
      q += dual.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] * inst.scenarios.demand(n, k, r);
  const auto w = cut_edge_weights(inst, dual);
  for (int e = 0; e < inst.num_edges(); ++e)
    if (z.open[static_cast<std::size_t>(e)]) q -= w[static_cast<std::size_t>(e)];
  return q;
}

// Residual of the dual feasibility constraints A'p <= f - alpha, beta >= 0;
// <= 0 means feasible.
inline double dual_feasibility_violation(const Instance& inst, const DualSolution& dual) {
  double worst = -kInf;
  for (int e = 0; e < inst.num_edges(); ++e) {
    worst = std::max(worst, -dual.beta[static_cast<std::size_t>(e)]);
    const auto& ed = inst.network.edges[static_cast<std::size_t>(e)];
    for (int k = 0; k < inst.num_commodities(); ++k) {
      const double atp = dual.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(ed.from)] -
                         dual.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(ed.to)];
      worst = std::max(worst, atp - (inst.flow_cost[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)] -
                                     dual.alpha[static_cast<std::size_t>(e)]));
    }
  }
  return worst;
}

namespace detail {

// Dual completion for closed edges: the feasible (alpha_e, beta_e) minimizing
// the cut weight u beta + (gamma/2)(alpha+beta)^2 subject to
// alpha_e <= slack_e := min_k (f_e^k - (A'p^k)_e).
inline void complete_closed_edge(double slack, double u, double gamma, double& alpha, double& beta) {
  if (slack >= 0.0) {
    alpha = 0.0;
    beta = 0.0;
    return;
  }
  alpha = slack;
  if (gamma == kInf) {
    if (u == kInf)
      throw NumericalError("dual completion impossible: closed uncapacitated edge with negative reduced cost "
                           "slack under gamma = inf",
                           0, -slack, 0);
    beta = -slack;
    return;
  }
  if (u == kInf) {
    beta = 0.0;
    return;
  }
  beta = std::max(0.0, -slack - u / gamma);
}

struct BuiltSubproblem {
  QpProblem qp;
  ReducedMap map;
  std::vector<int> sinks;            // per commodity
  std::vector<int> component_label;  // open support components
};

// Reduced perspective subproblem over edges with weight[e] > 0. For binary
// designs weight is 0/1; the root phase passes fractional weights, which
// scales each open edge's capacity to u*weight and quadratic coefficient to
// 1/(gamma*weight). Phase two introduces a free edge-total variable y_e with
// coupling row sum_k x - y = 0, so the quadratic is diagonal and the
// coupling multiplier is exactly the dual alpha of the edge.
inline BuiltSubproblem build_subproblem(const Instance& inst, const std::vector<double>& weight, int r,
                                        bool phase_one) {
  const int N = inst.num_nodes(), E = inst.num_edges(), K = inst.num_commodities();
  BuiltSubproblem out;
  auto& map = out.map;
  map.x_col_of_edge.assign(static_cast<std::size_t>(E), -1);
  map.y_col_of_edge.assign(static_cast<std::size_t>(E), -1);
  map.s_col_of_edge.assign(static_cast<std::size_t>(E), -1);
  map.cpl_row_of_edge.assign(static_cast<std::size_t>(E), -1);
  map.cap_row_of_edge.assign(static_cast<std::size_t>(E), -1);
  map.row_of_node_com.assign(static_cast<std::size_t>(N) * static_cast<std::size_t>(K), -1);

  std::vector<char> open(static_cast<std::size_t>(E), 0);
  for (int e = 0; e < E; ++e)
    if (weight[static_cast<std::size_t>(e)] > kWeightTol) {
      open[static_cast<std::size_t>(e)] = 1;
      map.open_edges.push_back(e);
    }

  out.sinks.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) out.sinks[static_cast<std::size_t>(k)] = commodity_sink(inst, k, r);
  out.component_label = undirected_components(inst.network, open);

  // With gamma = inf there is no quadratic term: the edge-total variable is
  // eliminated and the problem is a pure LP in (x, s).
  const bool use_y = !phase_one && inst.gamma != kInf;

  int col = 0;
  for (int e : map.open_edges) {
    map.x_col_of_edge[static_cast<std::size_t>(e)] = col;
    col += K;
  }
  if (use_y)
    for (int e : map.open_edges) map.y_col_of_edge[static_cast<std::size_t>(e)] = col++;
  for (int e : map.open_edges)
    if (inst.capacity[static_cast<std::size_t>(e)] != kInf) map.s_col_of_edge[static_cast<std::size_t>(e)] = col++;

  int row = 0;
  for (int k = 0; k < K; ++k) {
    const int sink = out.sinks[static_cast<std::size_t>(k)];
    const int sink_comp = out.component_label[static_cast<std::size_t>(sink)];
    for (int n = 0; n < N; ++n) {
      if (phase_one) {
        if (n == sink) continue;  // artificial arcs join everything through the sink
      } else {
        const int comp = out.component_label[static_cast<std::size_t>(n)];
        const int anchor = (comp == sink_comp) ? sink : comp;
        if (n == anchor) continue;
      }
      map.row_of_node_com[static_cast<std::size_t>(k) * static_cast<std::size_t>(N) + static_cast<std::size_t>(n)] = row++;
    }
  }
  int n_art = 0;
  if (phase_one) n_art = 2 * (N - 1) * K;
  const int art_col0 = col;
  col += n_art;

  if (use_y)
    for (int e : map.open_edges) map.cpl_row_of_edge[static_cast<std::size_t>(e)] = row++;
  for (int e : map.open_edges)
    if (inst.capacity[static_cast<std::size_t>(e)] != kInf) map.cap_row_of_edge[static_cast<std::size_t>(e)] = row++;

  map.n_cols = col;
  map.n_rows = row;

  auto& qp = out.qp;
  qp.A.resize(row, col);
  qp.b = Eigen::VectorXd::Zero(row);
  qp.c = Eigen::VectorXd::Zero(col);
  if (use_y) qp.qdiag = Eigen::VectorXd::Zero(col);
  qp.nonneg.assign(static_cast<std::size_t>(col), 1);

  std::vector<Eigen::Triplet<double>> at;
  for (int e : map.open_edges) {
    const auto& ed = inst.network.edges[static_cast<std::size_t>(e)];
    const int xc = map.x_col_of_edge[static_cast<std::size_t>(e)];
    const int yc = map.y_col_of_edge[static_cast<std::size_t>(e)];
    const int cpl_row = map.cpl_row_of_edge[static_cast<std::size_t>(e)];
    const int cap_row = map.cap_row_of_edge[static_cast<std::size_t>(e)];
    const double w = weight[static_cast<std::size_t>(e)];
    for (int k = 0; k < K; ++k) {
      const int rf = map.row_of_node_com[static_cast<std::size_t>(k) * static_cast<std::size_t>(N) +
                                         static_cast<std::size_t>(ed.from)];
      const int rt = map.row_of_node_com[static_cast<std::size_t>(k) * static_cast<std::size_t>(N) +
                                         static_cast<std::size_t>(ed.to)];
      if (rf >= 0) at.emplace_back(rf, xc + k, 1.0);
      if (rt >= 0) at.emplace_back(rt, xc + k, -1.0);
      if (use_y)
        at.emplace_back(cpl_row, xc + k, 1.0);
      else if (cap_row >= 0)
        at.emplace_back(cap_row, xc + k, 1.0);
      qp.c[xc + k] = phase_one ? 0.0 : inst.flow_cost[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
    }
    if (yc >= 0) {
      at.emplace_back(cpl_row, yc, -1.0);
      qp.nonneg[static_cast<std::size_t>(yc)] = 0;  // y is free
      qp.qdiag[yc] = 1.0 / (inst.gamma * w);
      if (cap_row >= 0) at.emplace_back(cap_row, yc, 1.0);
    }
    if (cap_row >= 0) {
      at.emplace_back(cap_row, map.s_col_of_edge[static_cast<std::size_t>(e)], 1.0);
      qp.b[cap_row] = inst.capacity[static_cast<std::size_t>(e)] * w;
    }
  }
  if (phase_one) {
    int ac = art_col0;
    for (int k = 0; k < K; ++k) {
      const int sink = out.sinks[static_cast<std::size_t>(k)];
      for (int n = 0; n < N; ++n) {
        if (n == sink) continue;
        const int rn = map.row_of_node_com[static_cast<std::size_t>(k) * static_cast<std::size_t>(N) +
                                           static_cast<std::size_t>(n)];
        at.emplace_back(rn, ac, 1.0);  // artificial arc n -> sink
        qp.c[ac++] = 1.0;
        at.emplace_back(rn, ac, -1.0);  // artificial arc sink -> n
        qp.c[ac++] = 1.0;
      }
    }
  }
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      const int rn = map.row_of_node_com[static_cast<std::size_t>(k) * static_cast<std::size_t>(N) +
                                         static_cast<std::size_t>(n)];
      if (rn >= 0) qp.b[rn] = inst.scenarios.demand(n, k, r);
    }
  qp.A.setFromTriplets(at.begin(), at.end());
  return out;
}

// Analytic infeasibility certificate for a commodity whose demand does not
// balance within a component of the open support.
inline std::optional<FarkasCertificate> component_balance_certificate(const Instance& inst,
                                                                      const std::vector<double>& weight, int r,
                                                                      const BuiltSubproblem& built, double tol) {
  const int N = inst.num_nodes(), K = inst.num_commodities(), E = inst.num_edges();
  for (int k = 0; k < K; ++k) {
    std::vector<double> comp_sum(static_cast<std::size_t>(N), 0.0);
    for (int n = 0; n < N; ++n)
      comp_sum[static_cast<std::size_t>(built.component_label[static_cast<std::size_t>(n)])] +=
          inst.scenarios.demand(n, k, r);
    for (int c = 0; c < N; ++c) {
      if (std::abs(comp_sum[static_cast<std::size_t>(c)]) <= tol) continue;
      FarkasCertificate cert;
      cert.p.assign(static_cast<std::size_t>(K), std::vector<double>(static_cast<std::size_t>(N), 0.0));
      const double s = comp_sum[static_cast<std::size_t>(c)] > 0 ? 1.0 : -1.0;
      for (int n = 0; n < N; ++n)
        if (built.component_label[static_cast<std::size_t>(n)] == c)
          cert.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] = s;
      // pin the sink potential to zero
      const double shift =
          cert.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(built.sinks[static_cast<std::size_t>(k)])];
      for (int n = 0; n < N; ++n) cert.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] -= shift;
      cert.beta.assign(static_cast<std::size_t>(E), 0.0);
      double viol = 0.0;
      for (int kk = 0; kk < K; ++kk)
        for (int n = 0; n < N; ++n)
          viol += cert.p[static_cast<std::size_t>(kk)][static_cast<std::size_t>(n)] * inst.scenarios.demand(n, kk, r);
      for (int e = 0; e < E; ++e) {
        const auto& ed = inst.network.edges[static_cast<std::size_t>(e)];
        double atp = 0.0;
        for (int kk = 0; kk < K; ++kk)
          atp = std::max(atp, cert.p[static_cast<std::size_t>(kk)][static_cast<std::size_t>(ed.from)] -
                                  cert.p[static_cast<std::size_t>(kk)][static_cast<std::size_t>(ed.to)]);
        cert.beta[static_cast<std::size_t>(e)] = std::max(0.0, atp);
        if (weight[static_cast<std::size_t>(e)] > kWeightTol && inst.capacity[static_cast<std::size_t>(e)] != kInf)
          viol -= weight[static_cast<std::size_t>(e)] * inst.capacity[static_cast<std::size_t>(e)] *
                  cert.beta[static_cast<std::size_t>(e)];
      }
      cert.violation = viol;
      if (viol > tol) return cert;
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Solves the second-stage routing problem at a (possibly fractional) design
// weight vector. Feasible: returns primal flows plus optimal duals of the
// perspective dual; infeasible: returns a Farkas certificate from the
// phase-one LP. `assume_feasible` skips the phase-one screen (callers may use
// it when feasibility is already certified; feasibility is monotone in z).
inline SubproblemResult solve_subproblem_weighted(const Instance& inst, const std::vector<double>& weight, int r,
                                                  const SubTolerances& tol = {}, bool assume_feasible = false) {
  const int N = inst.num_nodes(), E = inst.num_edges(), K = inst.num_commodities();
  const double dscale = detail::demand_scale(inst, r);
  const double bal_tol = tol.feas_tol * (1.0 + dscale);

  auto built = detail::build_subproblem(inst, weight, r, /*phase_one=*/false);

  if (!assume_feasible) {
    if (auto cert = detail::component_balance_certificate(inst, weight, r, built, bal_tol)) {
      SubproblemResult res;
      res.status = SubStatus::Infeasible;
      res.farkas = std::move(*cert);
      return res;
    }
    auto p1 = detail::build_subproblem(inst, weight, r, /*phase_one=*/true);
    QpSettings p1_settings;
    p1_settings.gap_tol = 1e-9;
    auto sol = solve_qp(p1.qp, p1_settings);
    if (sol.status == QpStatus::NumericalFailure)
      throw NumericalError("phase-one LP failed", sol.primal_residual, sol.dual_residual, sol.gap);
    if (sol.objective > bal_tol) {
      // Infeasible: phase-one duals are the certificate. beta is recomputed
      // as the minimal feasible value, which can only increase the violation.
      FarkasCertificate cert;
      cert.p.assign(static_cast<std::size_t>(K), std::vector<double>(static_cast<std::size_t>(N), 0.0));
      for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n) {
          const int row = p1.map.row_of_node_com[static_cast<std::size_t>(k) * static_cast<std::size_t>(N) +
                                                 static_cast<std::size_t>(n)];
          if (row >= 0) cert.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] = sol.lambda[row];
        }
      cert.beta.assign(static_cast<std::size_t>(E), 0.0);
      double viol = 0.0;
      for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n)
          viol += cert.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] * inst.scenarios.demand(n, k, r);
      for (int e = 0; e < E; ++e) {
        const auto& ed = inst.network.edges[static_cast<std::size_t>(e)];
        double atp = 0.0;
        for (int k = 0; k < K; ++k)
          atp = std::max(atp, cert.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(ed.from)] -
                                  cert.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(ed.to)]);
        const bool open = weight[static_cast<std::size_t>(e)] > kWeightTol;
        const bool capped = inst.capacity[static_cast<std::size_t>(e)] != kInf;
        if (open && !capped) continue;  // beta forced 0; A'p <= 0 holds there up to tolerance
        cert.beta[static_cast<std::size_t>(e)] = std::max(0.0, atp);
        if (open && capped)
          viol -= weight[static_cast<std::size_t>(e)] * inst.capacity[static_cast<std::size_t>(e)] *
                  cert.beta[static_cast<std::size_t>(e)];
      }
      cert.violation = viol;
      if (viol > bal_tol) {
        SubproblemResult res;
        res.status = SubStatus::Infeasible;
        res.farkas = std::move(cert);
        return res;
      }
      // The positive phase-one value was solver noise on a (near-)feasible
      // problem: no certificate separates, so fall through to phase two,
      // whose own residual contract is the final arbiter.
    }
  }

  QpSettings settings;
  settings.primal_tol = std::min(1e-9, 0.01 * tol.feas_tol);
  settings.dual_tol = std::min(1e-9, 0.01 * tol.dual_tol);
  settings.gap_tol = 0.01 * tol.gap_tol;
  auto sol = solve_qp(built.qp, settings);
  if (sol.status == QpStatus::NumericalFailure) {
    settings.max_iter = 240;
    settings.primal_tol *= 10;
    settings.dual_tol *= 10;
    settings.gap_tol *= 10;
    sol = solve_qp(built.qp, settings);
  }

  SubproblemResult res;
  res.status = SubStatus::Optimal;
  FlowSolution flow;
  flow.x.assign(static_cast<std::size_t>(E), std::vector<double>(static_cast<std::size_t>(K), 0.0));
  for (int e : built.map.open_edges) {
    const int xc = built.map.x_col_of_edge[static_cast<std::size_t>(e)];
    for (int k = 0; k < K; ++k)
      flow.x[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)] = std::max(0.0, sol.v[xc + k]);
  }
  // objective in perspective form (equals f(z;d) at binary designs)
  double obj = 0.0;
  for (int e : built.map.open_edges) {
    double ysum = 0.0;
    for (int k = 0; k < K; ++k) {
      obj += inst.flow_cost[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)] *
             flow.x[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
      ysum += flow.x[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
    }
    if (inst.gamma != kInf) obj += ysum * ysum / (2.0 * inst.gamma * weight[static_cast<std::size_t>(e)]);
  }
  flow.objective = obj;

  DualSolution dual;
  dual.alpha.assign(static_cast<std::size_t>(E), 0.0);
  dual.beta.assign(static_cast<std::size_t>(E), 0.0);
  dual.p.assign(static_cast<std::size_t>(K), std::vector<double>(static_cast<std::size_t>(N), 0.0));
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      const int row = built.map.row_of_node_com[static_cast<std::size_t>(k) * static_cast<std::size_t>(N) +
                                                static_cast<std::size_t>(n)];
      if (row >= 0) dual.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] = sol.lambda[row];
    }
  for (int e : built.map.open_edges) {
    // alpha is the coupling-row multiplier (gamma < inf) or -beta (pure LP);
    // beta is the capacity row's reduced cost on the slack
    double beta = 0.0;
    const int sc = built.map.s_col_of_edge[static_cast<std::size_t>(e)];
    if (sc >= 0) beta = std::max(0.0, sol.w[sc]);
    const int cpl = built.map.cpl_row_of_edge[static_cast<std::size_t>(e)];
    const double alpha = cpl >= 0 ? sol.lambda[cpl] : -beta;
    dual.alpha[static_cast<std::size_t>(e)] = alpha;
    dual.beta[static_cast<std::size_t>(e)] = beta;
  }
  // closed edges: feasible completion with the smallest cut weight
  for (int e = 0; e < E; ++e) {
    if (weight[static_cast<std::size_t>(e)] > kWeightTol) continue;
    const auto& ed = inst.network.edges[static_cast<std::size_t>(e)];
    double slack = kInf;
    for (int k = 0; k < K; ++k) {
      const double atp = dual.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(ed.from)] -
                         dual.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(ed.to)];
      slack = std::min(slack, inst.flow_cost[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)] - atp);
    }
    detail::complete_closed_edge(slack, inst.capacity[static_cast<std::size_t>(e)], inst.gamma,
                                 dual.alpha[static_cast<std::size_t>(e)], dual.beta[static_cast<std::size_t>(e)]);
  }

  // tolerance contract: primal feasibility, dual feasibility, strong duality
  double prim_res = 0.0;
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      double net = 0.0;
      for (int e : built.map.open_edges) {
        const auto& ed = inst.network.edges[static_cast<std::size_t>(e)];
        if (ed.from == n) net += flow.x[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
        if (ed.to == n) net -= flow.x[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
      }
      prim_res = std::max(prim_res, std::abs(net - inst.scenarios.demand(n, k, r)));
    }
  for (int e : built.map.open_edges) {
    if (inst.capacity[static_cast<std::size_t>(e)] == kInf) continue;
    double ysum = 0.0;
    for (int k = 0; k < K; ++k) ysum += flow.x[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
    prim_res = std::max(prim_res, ysum - inst.capacity[static_cast<std::size_t>(e)] *
                                             weight[static_cast<std::size_t>(e)]);
  }
  const double dual_res = dual_feasibility_violation(inst, dual);
  DesignVector zw;  // weighted dual objective needs the weights, not a binary design
  double dual_obj = 0.0;
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n)
      dual_obj += dual.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] * inst.scenarios.demand(n, k, r);
  {
    const auto cw = cut_edge_weights(inst, dual);
    for (int e = 0; e < E; ++e) dual_obj -= weight[static_cast<std::size_t>(e)] * cw[static_cast<std::size_t>(e)];
  }
  const double gap = std::abs(flow.objective - dual_obj) / (1.0 + std::abs(flow.objective));
  if (prim_res > tol.feas_tol * (1.0 + dscale) || dual_res > tol.dual_tol || gap > tol.gap_tol)
    throw NumericalError("subproblem solve did not reach the requested tolerances", prim_res, dual_res, gap);

  res.flow = std::move(flow);
  res.dual = std::move(dual);
  return res;
}

inline std::vector<double> design_weights(const DesignVector& z) {
  std::vector<double> w(z.open.size());
  for (std::size_t e = 0; e < z.open.size(); ++e) w[e] = z.open[e] ? 1.0 : 0.0;
  return w;
}

inline SubproblemResult solve_subproblem(const Instance& inst, const DesignVector& z, int r,
                                         const SubTolerances& tol = {}, bool assume_feasible = false) {
  return solve_subproblem_weighted(inst, design_weights(z), r, tol, assume_feasible);
}

struct TrueCost {
  double mean = 0.0;                 // <c,z> + average second-stage cost over W
  double fixed = 0.0;                // <c,z>
  std::vector<double> per_scenario;  // f(z; d^r) for r in W, in W order
};

// Appendix-A equivalence value: nominal transport cost plus
// lambda * sqrt(sum_r sum_e (sum_k x)^2). Test-side companion of the
// regularized objective.
inline double robust_equivalence_value(const Instance& inst, const std::vector<FlowSolution>& flows,
                                       double lambda) {
  double nominal = 0.0, sq = 0.0;
  for (const auto& fs : flows) {
    for (int e = 0; e < inst.num_edges(); ++e) {
      double ysum = 0.0;
      for (int k = 0; k < inst.num_commodities(); ++k) {
        nominal += inst.flow_cost[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)] *
                   fs.x[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
        ysum += fs.x[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
      }
      sq += ysum * ysum;
    }
  }
  return nominal + lambda * std::sqrt(sq);
}

// Scenario oracle with a monotone feasibility cache: feasibility of z is
// monotone (z' >= z feasible whenever z is), and a Farkas certificate built
// at z stays valid at any z'' <= z. Caches are per scenario; solve_many
// assigns each scenario to one worker, so results and cache evolution are
// deterministic regardless of thread count.
class ScenarioOracle {
 public:
  ScenarioOracle(const Instance& inst, SubTolerances tol = {}, int threads = 1)
      : inst_(inst), tol_(tol), threads_(std::max(1, threads)), cache_(static_cast<std::size_t>(inst.num_scenarios())) {}

  const Instance& instance() const { return inst_; }
  const SubTolerances& tolerances() const { return tol_; }
  int threads() const { return threads_; }

  SubproblemResult solve(const DesignVector& z, int r) const {
    auto& cache = cache_[static_cast<std::size_t>(r)];
    std::unique_lock lock(cache.mu);
    for (const auto& feas : cache.feasible)
      if (superset(z.open, feas)) {
        lock.unlock();
        auto res = solve_subproblem(inst_, z, r, tol_, /*assume_feasible=*/true);
        return res;
      }
    for (const auto& [design, cert] : cache.infeasible)
      if (superset(design, z.open)) {
        FarkasCertificate c = cert;
        c.violation = certificate_violation(z, c, r);
        if (c.violation > 0.0) {
          SubproblemResult res;
          res.status = SubStatus::Infeasible;
          res.farkas = std::move(c);
          return res;
        }
        break;  // stale certificate no longer separates; fall through to a fresh solve
      }
    lock.unlock();

    auto res = solve_subproblem(inst_, z, r, tol_);
    lock.lock();
    if (res.status == SubStatus::Optimal) {
      cache.feasible.push_back(z.open);
      if (cache.feasible.size() > kCacheCap) cache.feasible.pop_front();
    } else {
      cache.infeasible.push_back({z.open, *res.farkas});
      if (cache.infeasible.size() > kCacheCap) cache.infeasible.pop_front();
    }
    return res;
  }

  // Solves the requested scenarios concurrently; results are returned in the
  // order of `scenarios`.
  std::vector<SubproblemResult> solve_many(const DesignVector& z, const std::vector<int>& scenarios) const {
    std::vector<SubproblemResult> out(scenarios.size());
    const int workers = std::min<int>(threads_, static_cast<int>(scenarios.size()));
    if (workers <= 1) {
      for (std::size_t i = 0; i < scenarios.size(); ++i) out[i] = solve(z, scenarios[i]);
      return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex err_mu;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= scenarios.size()) return;
          try {
            out[i] = solve(z, scenarios[i]);
          } catch (...) {
            std::scoped_lock lk(err_mu);
            if (!error) error = std::current_exception();
            return;
          }
        }
      });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return out;
  }

  // Value of the certificate's separating inequality at z for scenario r.
  double certificate_violation(const DesignVector& z, const FarkasCertificate& cert, int r) const {
    double viol = 0.0;
    for (int k = 0; k < inst_.num_commodities(); ++k)
      for (int n = 0; n < inst_.num_nodes(); ++n)
        viol += cert.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] * inst_.scenarios.demand(n, k, r);
    for (int e = 0; e < inst_.num_edges(); ++e) {
      if (!z.open[static_cast<std::size_t>(e)]) continue;
      const double u = inst_.capacity[static_cast<std::size_t>(e)];
      if (u != kInf) viol -= u * cert.beta[static_cast<std::size_t>(e)];
    }
    return viol;
  }

 private:
  static constexpr std::size_t kCacheCap = 64;

  static bool superset(const std::vector<char>& big, const std::vector<char>& small) {
    for (std::size_t i = 0; i < big.size(); ++i)
      if (small[i] && !big[i]) return false;
    return true;
  }

  struct Cache {
    std::mutex mu;
    std::deque<std::vector<char>> feasible;
    std::deque<std::pair<std::vector<char>, FarkasCertificate>> infeasible;
  };

  const Instance& inst_;
  SubTolerances tol_;
  int threads_;
  mutable std::vector<Cache> cache_;
};

// <c,z> + mean second-stage cost over the scenario subset W; throws
// InfeasibleScenario listing every infeasible member of W.
inline TrueCost true_cost(const ScenarioOracle& oracle, const DesignVector& z, const std::vector<int>& W) {
  const auto& inst = oracle.instance();
  TrueCost out;
  for (int e = 0; e < inst.num_edges(); ++e)
    if (z.open[static_cast<std::size_t>(e)]) out.fixed += inst.fixed_cost[static_cast<std::size_t>(e)];
  auto results = oracle.solve_many(z, W);
  std::vector<int> infeasible;
  for (std::size_t i = 0; i < W.size(); ++i)
    if (results[i].status == SubStatus::Infeasible) infeasible.push_back(W[i]);
  if (!infeasible.empty()) throw InfeasibleScenario(infeasible);
  out.per_scenario.resize(W.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < W.size(); ++i) {
    out.per_scenario[i] = results[i].flow->objective;
    sum += out.per_scenario[i];
  }
  out.mean = out.fixed + (W.empty() ? 0.0 : sum / static_cast<double>(W.size()));
  return out;
}

inline TrueCost true_cost(const Instance& inst, const DesignVector& z, const std::vector<int>& W,
                          const SubTolerances& tol = {}, int threads = 1) {
  ScenarioOracle oracle(inst, tol, threads);
  return true_cost(oracle, z, W);
}

}  // namespace snd
