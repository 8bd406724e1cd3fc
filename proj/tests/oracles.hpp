#pragma once

// Test-side oracles, independent of the implementation paths they check.

#include <limits>
#include <vector>

#include "snd/instance.hpp"
#include "snd/qp.hpp"
#include "snd/simplex.hpp"
#include "snd/subproblem.hpp"

namespace snd::testing {

// Solves an LpModel through the interior-point code path (an algorithm family
// independent of the simplex under test). Bounds are shifted/split into
// standard form.
struct LpOracleResult {
  bool feasible = true;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

inline LpOracleResult lp_oracle(const LpModel& model) {
  const int n = model.num_cols();
  const int m = model.num_rows();
  // columns: one per structural variable (shifted to >= 0 when lower finite,
  // free otherwise), plus an upper-bound slack per finite upper, plus a row
  // slack per inequality, plus artificial pair per row for feasibility detect
  int cols = n;
  std::vector<int> ub_slack(static_cast<std::size_t>(n), -1);
  for (int j = 0; j < n; ++j)
    if (model.upper[j] != kInf) ub_slack[static_cast<std::size_t>(j)] = cols++;
  std::vector<int> row_slack(static_cast<std::size_t>(m), -1);
  for (int i = 0; i < m; ++i)
    if (model.sense[static_cast<std::size_t>(i)] != RowSense::EQ) row_slack[static_cast<std::size_t>(i)] = cols++;

  const int rows = m + static_cast<int>(std::count_if(ub_slack.begin(), ub_slack.end(), [](int s) { return s >= 0; }));

  QpProblem qp;
  qp.A.resize(rows, cols);
  qp.b = Eigen::VectorXd::Zero(rows);
  qp.c = Eigen::VectorXd::Zero(cols);
  qp.nonneg.assign(static_cast<std::size_t>(cols), 1);

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = model.rhs;
  for (int j = 0; j < n; ++j) {
    const double lo = model.lower[j];
    if (lo == -kInf)
      qp.nonneg[static_cast<std::size_t>(j)] = 0;  // free
    else if (lo != 0.0)
      for (int i = 0; i < m; ++i) rhs[i] -= model.A(i, j) * lo;  // x = lo + x'
    for (int i = 0; i < m; ++i)
      if (model.A(i, j) != 0.0) trips.emplace_back(i, j, model.A(i, j));
    qp.c[j] = model.obj[j];
  }
  for (int i = 0; i < m; ++i) {
    if (row_slack[static_cast<std::size_t>(i)] >= 0)
      trips.emplace_back(i, row_slack[static_cast<std::size_t>(i)],
                         model.sense[static_cast<std::size_t>(i)] == RowSense::LE ? 1.0 : -1.0);
    qp.b[i] = rhs[i];
  }
  int extra = m;
  double obj_shift = 0.0;
  for (int j = 0; j < n; ++j) {
    const double lo = model.lower[j];
    if (lo != -kInf && lo != 0.0) obj_shift += model.obj[j] * lo;
    if (ub_slack[static_cast<std::size_t>(j)] >= 0) {
      trips.emplace_back(extra, j, 1.0);
      trips.emplace_back(extra, ub_slack[static_cast<std::size_t>(j)], 1.0);
      qp.b[extra] = model.upper[j] - (lo == -kInf ? 0.0 : lo);
      ++extra;
    }
  }
  qp.A.setFromTriplets(trips.begin(), trips.end());

  // phase one with artificial column pair per row
  QpProblem p1 = qp;
  p1.A.conservativeResize(rows, cols + 2 * rows);
  std::vector<Eigen::Triplet<double>> art;
  for (int col = 0; col < cols; ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.A, col); it; ++it)
      art.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < rows; ++i) {
    art.emplace_back(i, cols + 2 * i, 1.0);
    art.emplace_back(i, cols + 2 * i + 1, -1.0);
  }
  p1.A.setFromTriplets(art.begin(), art.end());
  p1.c = Eigen::VectorXd::Zero(cols + 2 * rows);
  for (int i = 0; i < 2 * rows; ++i) p1.c[cols + i] = 1.0;
  p1.nonneg = qp.nonneg;
  p1.nonneg.resize(static_cast<std::size_t>(cols + 2 * rows), 1);
  QpSettings s;
  s.gap_tol = 1e-9;
  auto sol1 = solve_qp(p1, s);
  LpOracleResult out;
  const double scale = 1.0 + qp.b.lpNorm<Eigen::Infinity>();
  if (sol1.objective > 1e-6 * scale) {
    out.feasible = false;
    return out;
  }
  auto sol = solve_qp(qp, s);
  out.objective = sol.objective + obj_shift;
  return out;
}

// Exhaustive enumeration over designs (free edges as a bitmask over
// non-fixed-open edges, cardinality respected): per-design total cost and the
// optimum. Infeasible designs carry +inf.
struct EnumerationResult {
  double optimum = kInf;
  DesignVector argmin;
  std::vector<double> total_cost;                   // by mask
  std::vector<std::vector<double>> scenario_cost;   // by mask, then scenario; empty rows when infeasible
  std::vector<DesignVector> designs;                // by mask
};

inline EnumerationResult enumerate_designs(const Instance& inst, const SubTolerances& tol = {}) {
  const int E = inst.num_edges();
  std::vector<int> free_edges;
  for (int e = 0; e < E; ++e)
    if (!inst.is_fixed_open(e)) free_edges.push_back(e);
  const int F = static_cast<int>(free_edges.size());
  if (F > 20) throw std::invalid_argument("enumeration oracle limited to 20 free edges");

  ScenarioOracle oracle(inst, tol, 2);
  std::vector<int> all_scen(static_cast<std::size_t>(inst.num_scenarios()));
  for (int r = 0; r < inst.num_scenarios(); ++r) all_scen[static_cast<std::size_t>(r)] = r;

  EnumerationResult out;
  const std::uint64_t masks = 1ull << F;
  out.total_cost.assign(masks, kInf);
  out.scenario_cost.resize(masks);
  out.designs.resize(masks);
  for (std::uint64_t mask = 0; mask < masks; ++mask) {
    DesignVector z = DesignVector::fixed_only(inst);
    for (int t = 0; t < F; ++t)
      if (mask & (1ull << t)) z.open[static_cast<std::size_t>(free_edges[static_cast<std::size_t>(t)])] = 1;
    out.designs[mask] = z;
    if (z.count_open() > inst.cardinality) continue;
    try {
      const auto tc = true_cost(oracle, z, all_scen);
      out.total_cost[mask] = tc.mean;
      out.scenario_cost[mask] = tc.per_scenario;
      if (tc.mean < out.optimum) {
        out.optimum = tc.mean;
        out.argmin = z;
      }
    } catch (const InfeasibleScenario&) {
      // stays +inf
    }
  }
  return out;
}

}  // namespace snd::testing
