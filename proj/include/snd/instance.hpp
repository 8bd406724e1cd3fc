#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "snd/network.hpp"

namespace snd {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Demand tensor d[n, k, r]. Positive entries are supplies, negative entries
// sinks; every (commodity, scenario) slice balances to zero.
struct ScenarioSet {
  int num_commodities = 0;
  int num_scenarios = 0;
  int num_nodes = 0;
  std::vector<double> data;  // scenario-major, then commodity, then node

  double demand(int node, int commodity, int scenario) const {
    return data[idx(node, commodity, scenario)];
  }
  double& demand(int node, int commodity, int scenario) { return data[idx(node, commodity, scenario)]; }

  void resize(int nodes, int commodities, int scenarios) {
    num_nodes = nodes;
    num_commodities = commodities;
    num_scenarios = scenarios;
    data.assign(static_cast<std::size_t>(nodes) * static_cast<std::size_t>(commodities) *
                    static_cast<std::size_t>(scenarios),
                0.0);
  }

  std::size_t idx(int node, int commodity, int scenario) const {
    return (static_cast<std::size_t>(scenario) * static_cast<std::size_t>(num_commodities) +
            static_cast<std::size_t>(commodity)) *
               static_cast<std::size_t>(num_nodes) +
           static_cast<std::size_t>(node);
  }
};

// Immutable after construction; safe to share read-only across workers.
struct Instance {
  Network network;
  std::vector<double> fixed_cost;               // c_e, per edge
  std::vector<std::vector<double>> flow_cost;   // f[e][k]
  std::vector<double> capacity;                 // u_e, +inf allowed
  double gamma = 1.0;                           // > 0, or +inf for no quadratic term
  std::int64_t cardinality = 0;                 // c0
  std::vector<int> fixed_open;                  // edge ids pinned open, sorted
  ScenarioSet scenarios;

  int num_nodes() const { return network.num_nodes; }
  int num_edges() const { return network.num_edges(); }
  int num_commodities() const { return scenarios.num_commodities; }
  int num_scenarios() const { return scenarios.num_scenarios; }

  bool is_fixed_open(int e) const {
    return std::binary_search(fixed_open.begin(), fixed_open.end(), e);
  }
};

// First-stage decision: which candidate edges are open.
struct DesignVector {
  std::vector<char> open;

  int count_open() const { return static_cast<int>(std::count(open.begin(), open.end(), char(1))); }

  static DesignVector all_open(int num_edges) {
    DesignVector z;
    z.open.assign(static_cast<std::size_t>(num_edges), 1);
    return z;
  }
  static DesignVector all_closed(int num_edges) {
    DesignVector z;
    z.open.assign(static_cast<std::size_t>(num_edges), 0);
    return z;
  }
  static DesignVector fixed_only(const Instance& inst) {
    DesignVector z = all_closed(inst.num_edges());
    for (int e : inst.fixed_open) z.open[static_cast<std::size_t>(e)] = 1;
    return z;
  }

  friend bool operator==(const DesignVector&, const DesignVector&) = default;
};

inline std::uint64_t design_hash(const DesignVector& z) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char b : z.open) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ull;
  }
  return h;
}

struct Diagnostic {
  std::string invariant;
  std::string message;
};

inline constexpr double kBalanceTol = 1e-9;

// Checks every type invariant; returns an empty list iff the instance is
// well-formed. Diagnostics, not failures.
inline std::vector<Diagnostic> validate_instance(const Instance& inst) {
  std::vector<Diagnostic> out;
  const int N = inst.num_nodes();
  const int E = inst.num_edges();

  if (N < 1) out.push_back({"nodes", "instance has no nodes"});
  for (int e = 0; e < E; ++e) {
    const auto& ed = inst.network.edges[static_cast<std::size_t>(e)];
    if (ed.from < 0 || ed.from >= N || ed.to < 0 || ed.to >= N)
      out.push_back({"edge range", "edge " + std::to_string(e + 1) + " references a node outside 1.." + std::to_string(N)});
    if (ed.from == ed.to)
      out.push_back({"self loop", "edge " + std::to_string(e + 1) + " is a self loop"});
  }
  for (int e = 0; e + 1 < E; ++e)
    if (inst.network.edges[static_cast<std::size_t>(e)] == inst.network.edges[static_cast<std::size_t>(e) + 1])
      out.push_back({"duplicate edge", "duplicate directed edge at position " + std::to_string(e + 1)});
  if (!inst.network.is_canonical()) out.push_back({"canonical order", "edge list is not in canonical order"});

  auto check_size = [&](std::size_t got, const char* what) {
    if (got != static_cast<std::size_t>(E))
      out.push_back({"array size", std::string(what) + " has " + std::to_string(got) + " entries, expected " + std::to_string(E)});
  };
  check_size(inst.fixed_cost.size(), "fixed_cost");
  check_size(inst.flow_cost.size(), "flow_cost");
  check_size(inst.capacity.size(), "capacity");

  for (int e = 0; e < E && e < static_cast<int>(inst.fixed_cost.size()); ++e) {
    const double c = inst.fixed_cost[static_cast<std::size_t>(e)];
    if (!(c >= 0.0) || !std::isfinite(c))
      out.push_back({"fixed cost", "fixed_cost of edge " + std::to_string(e + 1) + " must be finite and nonnegative"});
  }
  for (int e = 0; e < E && e < static_cast<int>(inst.capacity.size()); ++e) {
    const double u = inst.capacity[static_cast<std::size_t>(e)];
    if (!(u > 0.0))
      out.push_back({"capacity", "capacity of edge " + std::to_string(e + 1) + " must be positive or infinite"});
  }
  for (int e = 0; e < E && e < static_cast<int>(inst.flow_cost.size()); ++e) {
    if (static_cast<int>(inst.flow_cost[static_cast<std::size_t>(e)].size()) != inst.num_commodities()) {
      out.push_back({"array size", "flow_cost of edge " + std::to_string(e + 1) + " does not cover every commodity"});
      continue;
    }
    for (double f : inst.flow_cost[static_cast<std::size_t>(e)])
      if (!(f >= 0.0) || !std::isfinite(f))
        out.push_back({"flow cost", "flow_cost of edge " + std::to_string(e + 1) + " must be finite and nonnegative"});
  }

  if (!(inst.gamma > 0.0))
    out.push_back({"gamma", "gamma must be positive or infinite"});
  if (inst.cardinality < 0)
    out.push_back({"cardinality", "cardinality budget must be nonnegative"});
  if (static_cast<std::int64_t>(inst.fixed_open.size()) > inst.cardinality)
    out.push_back({"cardinality below fixed_open",
                   "cardinality budget " + std::to_string(inst.cardinality) + " is below |fixed_open| = " +
                       std::to_string(inst.fixed_open.size())});
  for (int e : inst.fixed_open)
    if (e < 0 || e >= E)
      out.push_back({"fixed_open range", "fixed_open references edge " + std::to_string(e + 1) + " outside 1.." + std::to_string(E)});
  if (!std::is_sorted(inst.fixed_open.begin(), inst.fixed_open.end()))
    out.push_back({"fixed_open order", "fixed_open list must be sorted"});

  const auto& sc = inst.scenarios;
  if (sc.num_nodes != N)
    out.push_back({"scenario shape", "scenario tensor covers " + std::to_string(sc.num_nodes) + " nodes, expected " + std::to_string(N)});
  if (sc.num_nodes == N) {
    for (int r = 0; r < sc.num_scenarios; ++r) {
      for (int k = 0; k < sc.num_commodities; ++k) {
        double sum = 0.0;
        for (int n = 0; n < N; ++n) sum += sc.demand(n, k, r);
        if (std::abs(sum) > kBalanceTol)
          out.push_back({"unbalanced demand",
                         "unbalanced demand, commodity " + std::to_string(k + 1) + ", scenario " + std::to_string(r + 1) +
                             " (sum " + std::to_string(sum) + ")"});
      }
    }
  }
  return out;
}

// Design-vector invariants relative to an instance.
inline std::vector<Diagnostic> validate_design(const Instance& inst, const DesignVector& z) {
  std::vector<Diagnostic> out;
  if (static_cast<int>(z.open.size()) != inst.num_edges()) {
    out.push_back({"design size", "design has wrong number of edges"});
    return out;
  }
  if (z.count_open() > inst.cardinality)
    out.push_back({"cardinality", "design opens more edges than the budget allows"});
  for (int e : inst.fixed_open)
    if (!z.open[static_cast<std::size_t>(e)])
      out.push_back({"fixed_open", "design closes fixed_open edge " + std::to_string(e + 1)});
  return out;
}

inline void throw_if_invalid(const Instance& inst) {
  const auto diags = validate_instance(inst);
  if (!diags.empty()) {
    std::ostringstream oss;
    oss << "invalid instance:";
    for (const auto& d : diags) oss << "\n  [" << d.invariant << "] " << d.message;
    throw ValidationError(oss.str());
  }
}

}  // namespace snd
