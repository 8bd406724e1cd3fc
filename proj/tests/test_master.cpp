#include <catch2/catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "snd/master.hpp"

using namespace snd;
using namespace snd::testing;
using Catch::Approx;

namespace {

Cut t1_single_cut() {
  Cut cut;
  cut.kind = CutKind::Optimality;
  cut.target = CutTarget::single();
  cut.offset = 30.0;
  cut.slope.assign(3, 0.0);
  cut.slope[kT1E1] = -2.0;
  cut.slope[kT1E2] = -2.0;
  cut.slope[kT1E3] = -4.5;
  return cut;
}

}  // namespace

TEST_CASE("relaxation with one single cut matches the LP oracle") {
  const auto inst = make_t1();
  MasterModel master(inst, {});
  master.add_regular(t1_single_cut());
  master.start_tree();
  auto relax = master.solve_relaxation({}, nullptr, nullptr);
  REQUIRE(relax.feasible);
  // opening e3 costs 10 but only lowers the cut by 4.5, so the LP prefers
  // z = (1,1,0) at 1 + 1 + 26 = 28
  REQUIRE(relax.bound == Approx(28.0).margin(1e-7));
  REQUIRE(relax.z[kT1E1] == Approx(1.0).margin(1e-7));
  REQUIRE(relax.z[kT1E2] == Approx(1.0).margin(1e-7));
  REQUIRE(relax.z[kT1E3] == Approx(0.0).margin(1e-7));
  REQUIRE(relax.integral);

  // independent interior-point oracle agrees
  LpModel lp;
  lp.A.setZero(2, 4);
  lp.rhs.resize(2);
  lp.sense = {RowSense::LE, RowSense::GE};
  for (int e = 0; e < 3; ++e) lp.A(0, e) = 1.0;
  lp.rhs[0] = 3.0;
  const auto cut = t1_single_cut();
  for (int e = 0; e < 3; ++e) lp.A(1, e) = -cut.slope[static_cast<std::size_t>(e)];
  lp.A(1, 3) = 1.0;
  lp.rhs[1] = cut.offset;
  lp.obj.resize(4);
  lp.obj << 1, 10, 1, 1;  // canonical fixed costs + eta/|R|
  lp.lower = Eigen::VectorXd::Zero(4);
  lp.upper = Eigen::VectorXd::Constant(4, 1.0);
  lp.upper[3] = kInf;
  const auto ref = lp_oracle(lp);
  REQUIRE(ref.feasible);
  REQUIRE(relax.bound == Approx(ref.objective).margin(1e-6));
}

TEST_CASE("relaxation with no cuts rests at the fixed-open design") {
  auto inst = make_t1();
  inst.fixed_open = {kT1E1};
  MasterModel master(inst, {});
  master.start_tree();
  auto relax = master.solve_relaxation({}, nullptr, nullptr);
  REQUIRE(relax.feasible);
  REQUIRE(relax.bound == Approx(inst.fixed_cost[kT1E1]).margin(1e-8));
  REQUIRE(relax.z[kT1E1] == Approx(1.0));
  REQUIRE(relax.eta[0] == Approx(0.0).margin(1e-9));
}

TEST_CASE("fixing an edge plus a feasibility cut moves the relaxation") {
  const auto inst = make_t1();
  MasterModel master(inst, {});
  Cut feas;
  feas.kind = CutKind::Feasibility;
  feas.offset = 5.0;
  feas.slope = {0.0, 0.0, 0.0};
  feas.slope[kT1E2] = -10.0;
  feas.slope[kT1E3] = -10.0;
  master.add_regular(feas);
  master.start_tree();
  std::vector<signed char> fixing(3, -1);
  fixing[kT1E1] = 0;
  auto relax = master.solve_relaxation(fixing, nullptr, nullptr);
  REQUIRE(relax.feasible);
  REQUIRE(relax.z[kT1E1] == Approx(0.0).margin(1e-9));
  REQUIRE(relax.z[kT1E2] + relax.z[kT1E3] >= 0.5 - 1e-9);
}

TEST_CASE("full deterministic callback reaches the enumeration optimum on T1") {
  const auto inst = make_t1();
  const auto enumeration = enumerate_designs(inst);
  REQUIRE(enumeration.optimum == Approx(33.5).margin(1e-6));

  MasterModel master(inst, {});
  ScenarioOracle oracle(inst);
  long calls = 0;
  auto callback = [&](const DesignVector& z, const std::vector<double>& eta, long) -> CallbackResult {
    ++calls;
    const auto res = oracle.solve(z, 0);
    CallbackResult out;
    if (res.status == SubStatus::Infeasible) {
      out.cuts.push_back(feasibility_cut(inst, *res.farkas, 0));
      return out;
    }
    const auto cut = single_cut(inst, {{0, &*res.dual}}, SingleCutMode::Deterministic);
    if (cut_value(cut, z) > eta[0] + 1e-7 * (1 + std::abs(cut_value(cut, z)))) {
      out.cuts.push_back(cut);
      return out;
    }
    out.accept = true;
    return out;
  };
  auto result = branch_and_cut(master, callback);
  REQUIRE(result.has_incumbent);
  REQUIRE_FALSE(result.stats.truncated);
  REQUIRE(result.incumbent == enumeration.argmin);
  REQUIRE(result.incumbent_obj == Approx(33.5).margin(1e-6));
  REQUIRE(result.lower_bound == Approx(33.5).margin(1e-6));
  REQUIRE(calls >= 1);
}

TEST_CASE("always-accept callback with empty pool returns the fixed-open design") {
  auto inst = make_t1();
  inst.fixed_open = {kT1E3};
  MasterModel master(inst, {});
  auto callback = [](const DesignVector&, const std::vector<double>&, long) {
    return CallbackResult{true, {}};
  };
  auto result = branch_and_cut(master, callback);
  REQUIRE(result.has_incumbent);
  REQUIRE(result.incumbent.open == std::vector<char>{0, 1, 0});
  REQUIRE(result.incumbent_obj == Approx(10.0).margin(1e-8));
}

TEST_CASE("node budget truncates with a valid bound") {
  const auto inst = make_t1();
  MasterModel master(inst, {});
  ScenarioOracle oracle(inst);
  auto callback = [&](const DesignVector& z, const std::vector<double>& eta, long) -> CallbackResult {
    const auto res = oracle.solve(z, 0);
    CallbackResult out;
    if (res.status == SubStatus::Infeasible) {
      out.cuts.push_back(feasibility_cut(inst, *res.farkas, 0));
    } else {
      const auto cut = single_cut(inst, {{0, &*res.dual}}, SingleCutMode::Deterministic);
      if (cut_value(cut, z) > eta[0] + 1e-7) out.cuts.push_back(cut);
      else out.accept = true;
    }
    return out;
  };
  BranchAndCutBudget budget;
  budget.max_nodes = 1;
  auto result = branch_and_cut(master, callback, budget);
  REQUIRE(result.stats.truncated);
  REQUIRE(result.lower_bound <= 33.5 + 1e-6);
}

TEST_CASE("cardinality budget of one forces the direct edge") {
  auto inst = make_t1();
  inst.cardinality = 1;
  MasterModel master(inst, {});
  ScenarioOracle oracle(inst);
  auto callback = [&](const DesignVector& z, const std::vector<double>& eta, long) -> CallbackResult {
    const auto res = oracle.solve(z, 0);
    CallbackResult out;
    if (res.status == SubStatus::Infeasible) {
      out.cuts.push_back(feasibility_cut(inst, *res.farkas, 0));
    } else {
      const auto cut = single_cut(inst, {{0, &*res.dual}}, SingleCutMode::Deterministic);
      if (cut_value(cut, z) > eta[0] + 1e-7) out.cuts.push_back(cut);
      else out.accept = true;
    }
    return out;
  };
  auto result = branch_and_cut(master, callback);
  REQUIRE(result.has_incumbent);
  REQUIRE(result.incumbent == t1_design(0, 0, 1));
  REQUIRE(result.incumbent_obj == Approx(37.5).margin(1e-6));
}

TEST_CASE("infeasible master is reported before the tree starts") {
  auto inst = make_t1();
  inst.fixed_open = {0, 1};
  inst.cardinality = 1;
  // instance-level validation would flag this too; the master guards itself
  MasterModel master(inst, {});
  auto callback = [](const DesignVector&, const std::vector<double>&, long) {
    return CallbackResult{true, {}};
  };
  auto result = branch_and_cut(master, callback);
  REQUIRE(result.infeasible);
}

TEST_CASE("callback is never invoked twice at the same design") {
  Rng rng(2718);
  for (int trial = 0; trial < 6; ++trial) {
    Rng sub = rng.derive(static_cast<std::uint64_t>(trial));
    auto inst = random_small_instance(sub, 5, 8, 1, 3);
    MasterModel master(inst, {});
    ScenarioOracle oracle(inst, {}, 2);
    std::vector<int> all;
    for (int r = 0; r < inst.num_scenarios(); ++r) all.push_back(r);

    std::set<std::uint64_t> seen;
    bool repeated = false;
    auto callback = [&](const DesignVector& z, const std::vector<double>& eta, long) -> CallbackResult {
      repeated = repeated || !seen.insert(design_hash(z)).second;
      CallbackResult out;
      const auto results = oracle.solve_many(z, all);
      std::vector<std::pair<int, const DualSolution*>> duals;
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (results[i].status == SubStatus::Infeasible) {
          out.cuts.push_back(feasibility_cut(inst, *results[i].farkas, all[i]));
          return out;
        }
        duals.push_back({all[i], &*results[i].dual});
      }
      const auto cut = single_cut(inst, duals, SingleCutMode::Deterministic);
      if (cut_value(cut, z) > eta[0] + 1e-7 * (1 + std::abs(cut_value(cut, z)))) {
        out.cuts.push_back(cut);
        return out;
      }
      out.accept = true;
      return out;
    };
    auto result = branch_and_cut(master, callback);
    REQUIRE_FALSE(repeated);
    (void)result;
  }
}

TEST_CASE("exactness with deterministic cuts on random instances") {
  Rng rng(1618);
  int solved = 0;
  for (int trial = 0; trial < 20 && solved < 5; ++trial) {
    Rng sub = rng.derive(static_cast<std::uint64_t>(trial));
    auto inst = random_small_instance(sub, 5, 9, 2, 4);
    const auto enumeration = enumerate_designs(inst);
    if (enumeration.optimum == kInf) continue;

    MasterConfig cfg;
    cfg.layout = EpigraphLayout::PerScenario;
    MasterModel master(inst, cfg);
    ScenarioOracle oracle(inst, {}, 2);
    std::vector<int> all;
    for (int r = 0; r < inst.num_scenarios(); ++r) all.push_back(r);

    auto callback = [&](const DesignVector& z, const std::vector<double>& eta, long) -> CallbackResult {
      CallbackResult out;
      const auto results = oracle.solve_many(z, all);
      std::vector<std::pair<int, const DualSolution*>> duals;
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (results[i].status == SubStatus::Infeasible)
          out.cuts.push_back(feasibility_cut(inst, *results[i].farkas, all[i]));
        else
          duals.push_back({all[i], &*results[i].dual});
      }
      if (!out.cuts.empty()) return out;
      bool improves = false;
      for (const auto& cut : multi_cut(inst, duals)) {
        const double val = cut_value(cut, z);
        if (val > eta[static_cast<std::size_t>(cut.target.index)] + 1e-8 * (1 + std::abs(val))) {
          out.cuts.push_back(cut);
          improves = true;
        }
      }
      out.accept = !improves;
      return out;
    };
    auto result = branch_and_cut(master, callback);
    REQUIRE(result.has_incumbent);
    // the tree's incumbent reaches the enumeration optimum
    const auto tc = true_cost(oracle, result.incumbent, all);
    REQUIRE(tc.mean == Approx(enumeration.optimum).epsilon(1e-6).margin(1e-6));
    REQUIRE(result.lower_bound <= enumeration.optimum + 1e-6 * (1 + enumeration.optimum));
    ++solved;
  }
  REQUIRE(solved >= 5);
}
