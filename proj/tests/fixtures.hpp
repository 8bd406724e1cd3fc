#pragma once

#include <vector>

#include "snd/instance.hpp"
#include "snd/rng.hpp"

namespace snd::testing {

// Canonical three-node fixture used across the suite: edges (1,2), (2,3),
// (1,3); single commodity shipping 5 units from node 1 to node 3; f=(1,1,3),
// u=(10,10,10), c=(1,1,10), gamma=1, c0=3.
inline Instance make_t1() {
  Instance inst;
  inst.network.num_nodes = 3;
  inst.network.edges = {{0, 1}, {0, 2}, {1, 2}};  // canonical order: e1=(1,2), e2=(1,3), e3=(2,3)
  inst.fixed_cost = {1.0, 10.0, 1.0};
  inst.flow_cost = {{1.0}, {3.0}, {1.0}};
  inst.capacity = {10.0, 10.0, 10.0};
  inst.gamma = 1.0;
  inst.cardinality = 3;
  inst.scenarios.resize(3, 1, 1);
  inst.scenarios.demand(0, 0, 0) = 5.0;
  inst.scenarios.demand(2, 0, 0) = -5.0;
  return inst;
}

// T1 uses the spec's edge naming e1=(1,2), e2=(2,3), e3=(1,3); canonical
// order stores (1,3) before (2,3). These helpers translate.
inline DesignVector t1_design(int e1, int e2, int e3) {
  DesignVector z;
  z.open = {static_cast<char>(e1), static_cast<char>(e3), static_cast<char>(e2)};
  return z;
}
inline constexpr int kT1E1 = 0;  // (1,2)
inline constexpr int kT1E2 = 2;  // (2,3)
inline constexpr int kT1E3 = 1;  // (1,3)

// Small random instance for enumeration-based oracles: <= max_edges candidate
// edges, integer balanced demands, finite capacities sized so that the
// all-open design is feasible but sparse designs often are not.
inline Instance random_small_instance(Rng& rng, int max_nodes = 6, int max_edges = 12, int max_commodities = 2,
                                      int max_scenarios = 10) {
  Instance inst;
  const int N = static_cast<int>(rng.uniform_int(3, max_nodes));
  const int K = static_cast<int>(rng.uniform_int(1, max_commodities));
  const int R = static_cast<int>(rng.uniform_int(2, max_scenarios));

  // spanning path plus random extras keeps the undirected support connected
  std::vector<Edge> edges;
  for (int n = 0; n + 1 < N; ++n) {
    if (rng.uniform() < 0.5)
      edges.push_back({n, n + 1});
    else
      edges.push_back({n + 1, n});
  }
  const int extra = static_cast<int>(rng.uniform_int(0, max_edges - (N - 1)));
  for (int t = 0; t < extra; ++t) {
    const int i = static_cast<int>(rng.uniform_int(0, N - 1));
    int j = static_cast<int>(rng.uniform_int(0, N - 2));
    if (j >= i) ++j;
    Edge cand{i, j};
    bool dup = false;
    for (const auto& e : edges) dup = dup || (e == cand);
    if (!dup) edges.push_back(cand);
  }
  inst.network.num_nodes = N;
  inst.network.edges = std::move(edges);
  inst.network.canonicalize();
  const int E = inst.network.num_edges();

  inst.scenarios.resize(N, K, R);
  for (int k = 0; k < K; ++k) {
    const int sink = static_cast<int>(rng.uniform_int(0, N - 1));
    for (int r = 0; r < R; ++r) {
      double total = 0.0;
      for (int n = 0; n < N; ++n) {
        if (n == sink) continue;
        const double d = static_cast<double>(rng.uniform_int(0, 6));
        inst.scenarios.demand(n, k, r) = d;
        total += d;
      }
      inst.scenarios.demand(sink, k, r) = -total;
    }
  }

  inst.fixed_cost.resize(static_cast<std::size_t>(E));
  inst.capacity.resize(static_cast<std::size_t>(E));
  inst.flow_cost.resize(static_cast<std::size_t>(E));
  for (int e = 0; e < E; ++e) {
    inst.fixed_cost[static_cast<std::size_t>(e)] = rng.uniform(0.5, 6.0);
    inst.capacity[static_cast<std::size_t>(e)] = rng.uniform(8.0, 30.0) * K;
    inst.flow_cost[static_cast<std::size_t>(e)].resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
      inst.flow_cost[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)] = rng.uniform(0.2, 4.0);
  }
  inst.gamma = rng.uniform() < 0.25 ? kInf : rng.uniform(0.5, 8.0);
  inst.cardinality = E;
  return inst;
}

}  // namespace snd::testing
