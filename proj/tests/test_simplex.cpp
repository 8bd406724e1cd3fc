#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "snd/rng.hpp"
#include "snd/simplex.hpp"

using namespace snd;
using namespace snd::testing;
using Catch::Approx;

namespace {

LpModel empty_model(int rows, int cols) {
  LpModel lp;
  lp.A.setZero(rows, cols);
  lp.rhs.setZero(rows);
  lp.sense.assign(static_cast<std::size_t>(rows), RowSense::LE);
  lp.obj.setZero(cols);
  lp.lower = Eigen::VectorXd::Zero(cols);
  lp.upper = Eigen::VectorXd::Constant(cols, kInf);
  return lp;
}

}  // namespace

TEST_CASE("two-variable textbook LP") {
  // max x + y s.t. x + 2y <= 4, 3x + y <= 6, bounds [0, inf)
  auto lp = empty_model(2, 2);
  lp.A << 1, 2, 3, 1;
  lp.rhs << 4, 6;
  lp.obj << -1, -1;  // minimize the negation
  const auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  REQUIRE(sol.objective == Approx(-2.8).margin(1e-9));
  REQUIRE(sol.x[0] == Approx(1.6).margin(1e-9));
  REQUIRE(sol.x[1] == Approx(1.2).margin(1e-9));
  // duals reproduce the objective at optimality
  REQUIRE(sol.row_duals.dot(lp.rhs) == Approx(-2.8).margin(1e-8));
}

TEST_CASE("bounded variables and equality rows") {
  // min -x - 2y s.t. x + y = 3, x in [0,2], y in [0,2]
  auto lp = empty_model(1, 2);
  lp.A << 1, 1;
  lp.rhs << 3;
  lp.sense = {RowSense::EQ};
  lp.obj << -1, -2;
  lp.upper = Eigen::VectorXd::Constant(2, 2.0);
  const auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  REQUIRE(sol.x[0] == Approx(1.0).margin(1e-9));
  REQUIRE(sol.x[1] == Approx(2.0).margin(1e-9));
}

TEST_CASE("infeasible and unbounded detection") {
  auto lp = empty_model(2, 1);
  lp.A << 1, 1;
  lp.rhs << 1, 2;
  lp.sense = {RowSense::LE, RowSense::GE};  // x <= 1 and x >= 2
  lp.obj << 1;
  REQUIRE(solve_lp(lp).status == LpStatus::Infeasible);

  auto lp2 = empty_model(1, 2);
  lp2.A << 1, 0;
  lp2.rhs << 1;
  lp2.obj << 0, -1;  // y unbounded above
  REQUIRE(solve_lp(lp2).status == LpStatus::Unbounded);
}

TEST_CASE("free and shifted-bound variables") {
  // min x + y with x free, y in [-1, 5], x + y >= 2
  auto lp = empty_model(1, 2);
  lp.A << 1, 1;
  lp.rhs << 2;
  lp.sense = {RowSense::GE};
  lp.obj << 1, 1;
  lp.lower << -kInf, -1;
  lp.upper << kInf, 5;
  const auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  REQUIRE(sol.objective == Approx(2.0).margin(1e-9));
}

TEST_CASE("random LPs agree with the interior-point oracle") {
  Rng rng(321);
  int solved = 0;
  for (int trial = 0; trial < 120; ++trial) {
    Rng sub = rng.derive(static_cast<std::uint64_t>(trial));
    const int n = static_cast<int>(sub.uniform_int(2, 12));
    const int m = static_cast<int>(sub.uniform_int(1, 8));
    auto lp = empty_model(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j)
        if (sub.uniform() < 0.7) lp.A(i, j) = sub.uniform(-2.0, 2.0);
      lp.rhs[i] = sub.uniform(-1.0, 6.0);
      const double roll = sub.uniform();
      lp.sense[static_cast<std::size_t>(i)] = roll < 0.5 ? RowSense::LE : (roll < 0.8 ? RowSense::GE : RowSense::EQ);
    }
    for (int j = 0; j < n; ++j) {
      lp.obj[j] = sub.uniform(-3.0, 3.0);
      lp.lower[j] = 0.0;
      lp.upper[j] = sub.uniform() < 0.8 ? sub.uniform(0.5, 4.0) : kInf;  // mostly boxed => bounded LPs
    }
    const auto mine = solve_lp(lp);
    if (mine.status == LpStatus::Unbounded) continue;
    const auto ref = lp_oracle(lp);
    if (mine.status == LpStatus::Infeasible) {
      REQUIRE_FALSE(ref.feasible);
      continue;
    }
    REQUIRE(mine.status == LpStatus::Optimal);
    REQUIRE(ref.feasible);
    REQUIRE(mine.objective == Approx(ref.objective).epsilon(1e-6).margin(1e-6));
    ++solved;
  }
  REQUIRE(solved >= 30);
}

TEST_CASE("warm starts reach the same optimum after appending a row") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Rng sub = rng.derive(static_cast<std::uint64_t>(trial));
    const int n = 6;
    auto lp = empty_model(3, n);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < n; ++j) lp.A(i, j) = sub.uniform(0.0, 2.0);
      lp.rhs[i] = sub.uniform(2.0, 8.0);
    }
    for (int j = 0; j < n; ++j) {
      lp.obj[j] = sub.uniform(-2.0, 0.0);
      lp.upper[j] = 3.0;
    }
    auto first = solve_lp(lp);
    REQUIRE(first.status == LpStatus::Optimal);

    // append a violated row and re-solve warm from the repaired basis
    auto lp2 = empty_model(4, n);
    lp2.A.topRows(3) = lp.A;
    lp2.rhs.head(3) = lp.rhs;
    lp2.obj = lp.obj;
    lp2.upper = lp.upper;
    for (int j = 0; j < n; ++j) lp2.A(3, j) = 1.0;
    lp2.rhs[3] = 0.8 * first.x.sum();

    LpBasis warm = first.basis;  // old slack ids n..n+2 keep their meaning
    warm.basic.push_back(n + 3);
    warm.at_upper.resize(static_cast<std::size_t>(n + 4), 0);
    auto warm_sol = solve_lp(lp2, &warm);
    auto cold_sol = solve_lp(lp2);
    REQUIRE(warm_sol.status == LpStatus::Optimal);
    REQUIRE(cold_sol.status == LpStatus::Optimal);
    REQUIRE(warm_sol.objective == Approx(cold_sol.objective).epsilon(1e-8).margin(1e-8));
  }
}

TEST_CASE("degenerate LP terminates") {
  // many redundant rows through the origin
  auto lp = empty_model(6, 3);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 3; ++j) lp.A(i, j) = (i + j) % 3 == 0 ? 1.0 : 0.5;
  lp.rhs.setZero();
  lp.obj << -1, -1, -1;
  lp.upper = Eigen::VectorXd::Constant(3, 1.0);
  const auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  REQUIRE(sol.objective == Approx(0.0).margin(1e-9));
}
