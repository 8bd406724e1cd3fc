#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <queue>
#include <unordered_set>
#include <vector>

#include "snd/cuts.hpp"
#include "snd/instance.hpp"
#include "snd/simplex.hpp"

namespace snd {

enum class EpigraphLayout { Single, PerScenario, PerCluster };

struct MasterConfig {
  EpigraphLayout layout = EpigraphLayout::Single;
  int clusters = 1;             // PerCluster only
  std::vector<int> cluster_of;  // scenario -> cluster, PerCluster only
  double integrality_tol = 1e-6;
  double prune_tol = 1e-9;
  std::size_t initial_active_cap = 512;  // newest regular cuts activated at tree start
};

struct NodeRelaxation {
  bool feasible = false;
  std::vector<double> z;    // fractional design
  std::vector<double> eta;
  double bound = kInf;      // +inf when infeasible
  bool integral = false;
  LpBasis basis;
};

struct BranchAndCutBudget {
  long max_nodes = std::numeric_limits<long>::max();
  double time_limit_s = kInf;
  std::function<bool()> external_stop;  // optional
};

struct CallbackResult {
  bool accept = false;
  std::vector<Cut> cuts;
};

// callback(z_integer, eta values at the node, node id) -> cuts or Accept
using MasterCallback = std::function<CallbackResult(const DesignVector&, const std::vector<double>&, long)>;

struct TreeStats {
  long nodes = 0;
  long lp_solves = 0;
  long callback_calls = 0;
  long revisits = 0;
  bool truncated = false;
};

struct BranchAndCutResult {
  bool infeasible = false;  // master itself infeasible (budget below fixed_open)
  bool has_incumbent = false;
  DesignVector incumbent;
  double incumbent_obj = kInf;  // master objective under the cuts present at acceptance
  double lower_bound = -kInf;
  TreeStats stats;
};

// Master problem: min <c,z> + (1/|R|) sum eta over designs respecting the
// cardinality budget and fixed_open, with epigraph variables bounded below by
// the cut pools. Regular cuts persist across trees; lazy cuts are the ones a
// callback generated inside the current tree.
class MasterModel {
 public:
  MasterModel(const Instance& inst, MasterConfig cfg) : inst_(inst), cfg_(std::move(cfg)) {
    switch (cfg_.layout) {
      case EpigraphLayout::Single: n_eta_ = 1; break;
      case EpigraphLayout::PerScenario: n_eta_ = inst.num_scenarios(); break;
      case EpigraphLayout::PerCluster: n_eta_ = cfg_.clusters; break;
    }
  }

  const Instance& instance() const { return inst_; }
  const MasterConfig& config() const { return cfg_; }
  int num_eta() const { return n_eta_; }
  CutPool& regular_pool() { return regular_; }
  const CutPool& regular_pool() const { return regular_; }
  CutPool& lazy_pool() { return lazy_; }
  const CutPool& lazy_pool() const { return lazy_; }

  bool add_regular(Cut cut) {
    if (!regular_.add(std::move(cut))) return false;
    return true;
  }
  bool add_lazy(Cut cut) {
    if (!lazy_.add(std::move(cut))) return false;
    rows_.push_back({true, lazy_.size() - 1});  // lazy cuts are active immediately
    return true;
  }

  // Moves every lazy cut into the regular pool ("purge"): they will be
  // enforced as ordinary constraints in later trees.
  void harvest_lazy() {
    for (const auto& cut : lazy_.cuts()) regular_.add(cut);
    lazy_.clear();
  }

  // Chooses the active row set for a fresh tree: the newest regular cuts up
  // to the cap (older ones re-activate on violation).
  void start_tree() {
    rows_.clear();
    const std::size_t total = regular_.size();
    const std::size_t skip = total > cfg_.initial_active_cap ? total - cfg_.initial_active_cap : 0;
    for (std::size_t i = skip; i < total; ++i) rows_.push_back({false, i});
    inactive_checked_upto_ = skip;
  }

  // eta columns covered by a cut target under this layout. Resolution may
  // widen the covered set (summing more epigraph variables), which preserves
  // validity because second-stage costs are nonnegative.
  std::vector<int> eta_columns(const CutTarget& t) const {
    std::vector<int> cols;
    auto all = [&] {
      cols.resize(static_cast<std::size_t>(n_eta_));
      for (int i = 0; i < n_eta_; ++i) cols[static_cast<std::size_t>(i)] = i;
    };
    switch (cfg_.layout) {
      case EpigraphLayout::Single:
        cols = {0};
        break;
      case EpigraphLayout::PerScenario:
        switch (t.kind) {
          case CutTarget::Kind::Single: all(); break;
          case CutTarget::Kind::Scenario: cols = {t.index}; break;
          case CutTarget::Kind::Cluster: all(); break;  // not native here; widen
          case CutTarget::Kind::Aggregate: cols = t.scenarios; break;
        }
        break;
      case EpigraphLayout::PerCluster:
        switch (t.kind) {
          case CutTarget::Kind::Single: all(); break;
          case CutTarget::Kind::Scenario: cols = {cfg_.cluster_of[static_cast<std::size_t>(t.index)]}; break;
          case CutTarget::Kind::Cluster: cols = {t.index}; break;
          case CutTarget::Kind::Aggregate: {
            std::vector<char> seen(static_cast<std::size_t>(n_eta_), 0);
            for (int r : t.scenarios) seen[static_cast<std::size_t>(cfg_.cluster_of[static_cast<std::size_t>(r)])] = 1;
            for (int c = 0; c < n_eta_; ++c)
              if (seen[static_cast<std::size_t>(c)]) cols.push_back(c);
            break;
          }
        }
        break;
    }
    return cols;
  }

  // Node LP with lazy activation of violated pool cuts: the returned point
  // satisfies every cut in both pools even though only active rows sit in the
  // simplex tableau.
  NodeRelaxation solve_relaxation(const std::vector<signed char>& fixing, const LpBasis* warm, TreeStats* stats) {
    LpBasis basis = warm && warm->valid() ? *warm : LpBasis{};
    NodeRelaxation out;
    for (int round = 0; round < 64; ++round) {
      LpModel lp = build_lp(fixing);
      repair_basis(basis, lp);
      auto sol = solve_lp(lp, basis.valid() ? &basis : nullptr);
      if (stats) ++stats->lp_solves;
      if (sol.status == LpStatus::Infeasible) {
        out.feasible = false;
        out.bound = kInf;
        return out;
      }
      if (sol.status == LpStatus::Unbounded)
        throw std::runtime_error("master relaxation unbounded in an epigraph variable");
      if (sol.status == LpStatus::IterationLimit)
        throw std::runtime_error("master LP hit its iteration limit");
      basis = sol.basis;

      // activate violated pool cuts and re-solve until clean
      std::vector<double> zf(sol.x.data(), sol.x.data() + inst_.num_edges());
      std::vector<double> eta(sol.x.data() + inst_.num_edges(), sol.x.data() + inst_.num_edges() + n_eta_);
      const std::size_t before = rows_.size();
      std::unordered_set<std::size_t> active_ids;
      for (const auto& [is_lazy, idx] : rows_)
        if (!is_lazy) active_ids.insert(idx);
      for (std::size_t i = 0; i < regular_.size(); ++i) {
        if (active_ids.count(i)) continue;
        if (violated(regular_[i], zf, eta)) rows_.push_back({false, i});
      }
      if (rows_.size() == before) {
        out.feasible = true;
        out.bound = sol.objective;
        out.z = std::move(zf);
        out.eta = std::move(eta);
        out.basis = std::move(basis);
        out.integral = true;
        for (int e = 0; e < inst_.num_edges(); ++e) {
          const double v = out.z[static_cast<std::size_t>(e)];
          if (std::min(v, 1.0 - v) > cfg_.integrality_tol) {
            out.integral = false;
            break;
          }
        }
        return out;
      }
    }
    throw std::runtime_error("cut activation loop did not settle");
  }

  // Master objective of a fixed design under the current pools (small LP over
  // eta alone); kInf when a feasibility cut excludes the design.
  double master_objective_at(const DesignVector& z) const {
    double fixed = 0.0;
    for (int e = 0; e < inst_.num_edges(); ++e)
      if (z.open[static_cast<std::size_t>(e)]) fixed += inst_.fixed_cost[static_cast<std::size_t>(e)];

    std::vector<const Cut*> opt_cuts;
    auto scan = [&](const CutPool& pool) -> bool {
      for (const auto& cut : pool.cuts()) {
        if (cut.kind == CutKind::Feasibility) {
          if (cut_value(cut, z) > 1e-9) return false;
        } else {
          opt_cuts.push_back(&cut);
        }
      }
      return true;
    };
    if (!scan(regular_) || !scan(lazy_)) return kInf;

    LpModel lp;
    const int m = static_cast<int>(opt_cuts.size());
    lp.A.setZero(m, n_eta_);
    lp.rhs.resize(m);
    lp.sense.assign(static_cast<std::size_t>(m), RowSense::GE);
    for (int i = 0; i < m; ++i) {
      for (int col : eta_columns(opt_cuts[static_cast<std::size_t>(i)]->target)) lp.A(i, col) = 1.0;
      lp.rhs[i] = cut_value(*opt_cuts[static_cast<std::size_t>(i)], z);
    }
    lp.obj = Eigen::VectorXd::Constant(n_eta_, 1.0 / inst_.num_scenarios());
    lp.lower = Eigen::VectorXd::Zero(n_eta_);
    lp.upper = Eigen::VectorXd::Constant(n_eta_, kInf);
    auto sol = solve_lp(lp);
    if (sol.status != LpStatus::Optimal) return kInf;
    return fixed + sol.objective;
  }

 private:
  bool violated(const Cut& cut, const std::vector<double>& zf, const std::vector<double>& eta) const {
    const double slack_tol = 1e-9 * (1.0 + std::abs(cut.offset));
    if (cut.kind == CutKind::Feasibility) return cut_value(cut, zf) > slack_tol;
    double lhs = 0.0;
    for (int col : eta_columns(cut.target)) lhs += eta[static_cast<std::size_t>(col)];
    return lhs < cut_value(cut, zf) - slack_tol;
  }

  LpModel build_lp(const std::vector<signed char>& fixing) const {
    const int E = inst_.num_edges();
    const int n = E + n_eta_;
    const int m = 1 + static_cast<int>(rows_.size());
    LpModel lp;
    lp.A.setZero(m, n);
    lp.rhs.resize(m);
    lp.sense.resize(static_cast<std::size_t>(m));
    lp.obj.setZero(n);
    lp.lower.setZero(n);
    lp.upper.resize(n);

    for (int e = 0; e < E; ++e) {
      lp.obj[e] = inst_.fixed_cost[static_cast<std::size_t>(e)];
      lp.lower[e] = 0.0;
      lp.upper[e] = 1.0;
    }
    for (int e : inst_.fixed_open) lp.lower[e] = 1.0;
    if (!fixing.empty())
      for (int e = 0; e < E; ++e) {
        if (fixing[static_cast<std::size_t>(e)] == 0) lp.upper[e] = 0.0;
        if (fixing[static_cast<std::size_t>(e)] == 1) lp.lower[e] = 1.0;
      }
    for (int i = 0; i < n_eta_; ++i) {
      lp.obj[E + i] = 1.0 / inst_.num_scenarios();
      lp.lower[E + i] = 0.0;
      lp.upper[E + i] = kInf;
    }

    // budget row
    for (int e = 0; e < E; ++e) lp.A(0, e) = 1.0;
    lp.sense[0] = RowSense::LE;
    lp.rhs[0] = static_cast<double>(inst_.cardinality);

    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto& [is_lazy, idx] = rows_[i];
      const Cut& cut = is_lazy ? lazy_[idx] : regular_[idx];
      const int row = 1 + static_cast<int>(i);
      for (int e = 0; e < E; ++e) lp.A(row, e) = -cut.slope[static_cast<std::size_t>(e)];
      if (cut.kind == CutKind::Optimality) {
        for (int col : eta_columns(cut.target)) lp.A(row, E + col) += 1.0;
        lp.sense[static_cast<std::size_t>(row)] = RowSense::GE;
      } else {
        for (int e = 0; e < E; ++e) lp.A(row, e) = cut.slope[static_cast<std::size_t>(e)];
        lp.sense[static_cast<std::size_t>(row)] = RowSense::LE;
        lp.rhs[row] = -cut.offset;
        continue;
      }
      lp.rhs[row] = cut.offset;
    }
    return lp;
  }

  // Extends a warm basis to newly appended rows (their slacks become basic).
  void repair_basis(LpBasis& basis, const LpModel& lp) const {
    if (!basis.valid()) return;
    const int n = lp.num_cols();
    const int m = lp.num_rows();
    const int m_old = static_cast<int>(basis.basic.size());
    if (m_old > m) {
      basis = LpBasis{};
      return;
    }
    for (int i = m_old; i < m; ++i) basis.basic.push_back(n + i);
    basis.at_upper.resize(static_cast<std::size_t>(n + m), 0);
  }

  const Instance& inst_;
  MasterConfig cfg_;
  int n_eta_ = 1;
  CutPool regular_;
  CutPool lazy_;
  std::vector<std::pair<bool, std::size_t>> rows_;  // active rows: (from lazy pool?, index)
  std::size_t inactive_checked_upto_ = 0;
};

// Best-first branch-and-cut over the master with most-fractional branching
// (ties by larger fixed cost, then lower index). At integer nodes the
// callback either returns cuts, which join the lazy pool and trigger a
// re-solve, or accepts the point as incumbent at its master objective. The
// returned lower bound is valid for the master with both pools applied.
inline BranchAndCutResult branch_and_cut(MasterModel& master, const MasterCallback& callback,
                                         const BranchAndCutBudget& budget = {},
                                         const std::vector<std::pair<DesignVector, double>>& seeds = {},
                                         std::ostream* tree_log = nullptr) {
  const auto& inst = master.instance();
  const int E = inst.num_edges();
  BranchAndCutResult out;

  if (static_cast<std::int64_t>(inst.fixed_open.size()) > inst.cardinality) {
    out.infeasible = true;
    return out;
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto out_of_budget = [&](long nodes) {
    if (nodes >= budget.max_nodes) return true;
    if (budget.external_stop && budget.external_stop()) return true;
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return elapsed >= budget.time_limit_s;
  };

  for (const auto& [z, obj] : seeds) {
    if (obj < out.incumbent_obj) {
      out.incumbent = z;
      out.incumbent_obj = obj;
      out.has_incumbent = true;
    }
  }

  struct Node {
    double bound;
    long id;
    int depth;
    std::vector<signed char> fixing;
    LpBasis basis;
  };
  auto cmp = [](const Node& a, const Node& b) {
    return a.bound > b.bound || (a.bound == b.bound && a.id > b.id);
  };
  std::priority_queue<Node, std::vector<Node>, decltype(cmp)> open(cmp);

  long next_id = 0;
  open.push({-kInf, next_id++, 0, std::vector<signed char>(static_cast<std::size_t>(E), -1), LpBasis{}});

  double fathomed_min = kInf;
  std::unordered_set<std::uint64_t> visited;
  master.start_tree();

  const double scale_tol = 1e-9;
  while (!open.empty()) {
    if (out_of_budget(out.stats.nodes)) {
      out.stats.truncated = true;
      break;
    }
    Node node = open.top();
    open.pop();
    const double prune_cut = out.incumbent_obj - scale_tol * (1.0 + std::abs(out.incumbent_obj));
    if (node.bound >= prune_cut) {
      fathomed_min = std::min(fathomed_min, node.bound);
      // best-first: everything left is at least as bad
      while (!open.empty()) {
        fathomed_min = std::min(fathomed_min, open.top().bound);
        open.pop();
      }
      break;
    }
    ++out.stats.nodes;

    NodeRelaxation relax;
    bool accepted = false;
    for (;;) {  // cut-and-resolve loop at this node
      relax = master.solve_relaxation(node.fixing, node.basis.valid() ? &node.basis : nullptr, &out.stats);
      if (!relax.feasible) break;
      node.basis = relax.basis;
      if (relax.bound >= prune_cut) break;
      if (!relax.integral) break;

      DesignVector z;
      z.open.resize(static_cast<std::size_t>(E));
      for (int e = 0; e < E; ++e) z.open[static_cast<std::size_t>(e)] = relax.z[static_cast<std::size_t>(e)] > 0.5;
      const auto h = design_hash(z);
      if (visited.count(h)) {  // the tree never queries the same point twice
        ++out.stats.revisits;
        accepted = true;
        break;
      }
      visited.insert(h);
      ++out.stats.callback_calls;
      auto res = callback(z, relax.eta, node.id);
      bool any_new = false;
      for (auto& cut : res.cuts) any_new = master.add_lazy(std::move(cut)) || any_new;
      if (res.accept || !any_new) {
        accepted = true;
        break;
      }
      // new lazy cuts are active; re-solve the same node
    }

    if (!relax.feasible) {
      continue;  // infeasible subtree contributes +inf
    }
    if (relax.bound >= prune_cut || accepted) {
      fathomed_min = std::min(fathomed_min, relax.bound);
      if (accepted && relax.bound < out.incumbent_obj) {
        out.incumbent_obj = relax.bound;
        out.has_incumbent = true;
        out.incumbent.open.resize(static_cast<std::size_t>(E));
        for (int e = 0; e < E; ++e)
          out.incumbent.open[static_cast<std::size_t>(e)] = relax.z[static_cast<std::size_t>(e)] > 0.5;
      }
      if (tree_log)
        (*tree_log) << node.id << ',' << node.depth << ',' << relax.bound << ",0\n";
      continue;
    }

    // branch on the most fractional edge
    int branch_edge = -1;
    double best_frac = -1.0;
    for (int e = 0; e < E; ++e) {
      const double v = relax.z[static_cast<std::size_t>(e)];
      const double frac = std::min(v, 1.0 - v);
      if (frac <= master.config().integrality_tol) continue;
      const double ce = inst.fixed_cost[static_cast<std::size_t>(e)];
      if (frac > best_frac + 1e-12 ||
          (std::abs(frac - best_frac) <= 1e-12 && branch_edge >= 0 &&
           ce > inst.fixed_cost[static_cast<std::size_t>(branch_edge)])) {
        best_frac = frac;
        branch_edge = e;
      }
    }
    if (tree_log)
      (*tree_log) << node.id << ',' << node.depth << ',' << relax.bound << ',' << best_frac << "\n";
    if (branch_edge < 0) {  // numerically integral after all
      fathomed_min = std::min(fathomed_min, relax.bound);
      continue;
    }
    for (int val : {1, 0}) {
      Node child;
      child.bound = relax.bound;
      child.id = next_id++;
      child.depth = node.depth + 1;
      child.fixing = node.fixing;
      child.fixing[static_cast<std::size_t>(branch_edge)] = static_cast<signed char>(val);
      child.basis = node.basis;
      open.push(std::move(child));
    }
  }

  while (!open.empty()) {
    fathomed_min = std::min(fathomed_min, open.top().bound);
    open.pop();
  }
  out.lower_bound = std::min(fathomed_min, out.incumbent_obj);
  if (out.lower_bound == -kInf && !out.stats.truncated && !out.has_incumbent) out.lower_bound = kInf;
  return out;
}

}  // namespace snd
