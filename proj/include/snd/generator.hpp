#pragma once

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "snd/instance.hpp"
#include "snd/rng.hpp"

namespace snd {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GenConfig {
  int n_nodes = 10;
  int n_commodities = 1;
  int n_scenarios = 1;
  int knn = 6;
  std::uint64_t seed = 0;
};

namespace detail {

// Undirected k-nearest-neighbor support of the sampled points: {i,j} is a
// candidate when j is among i's k nearest or vice versa.
inline std::vector<std::pair<int, int>> knn_pairs(const std::vector<double>& x, const std::vector<double>& y,
                                                  int k) {
  const int n = static_cast<int>(x.size());
  std::set<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> dist;
    dist.reserve(static_cast<std::size_t>(n) - 1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
      const double dy = y[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(j)];
      dist.push_back({dx * dx + dy * dy, j});
    }
    std::sort(dist.begin(), dist.end());
    const int take = std::min<int>(k, static_cast<int>(dist.size()));
    for (int t = 0; t < take; ++t) {
      const int j = dist[static_cast<std::size_t>(t)].second;
      pairs.insert({std::min(i, j), std::max(i, j)});
    }
  }
  return {pairs.begin(), pairs.end()};
}

}  // namespace detail

// Synthetic instance: nodes uniform on the unit square, edges sampled from
// the 6-NN graph until the undirected support is connected (both directions
// of each sampled pair become candidate edges), c ~ U(1,4), all-to-one
// integer demands in [5,20] per scenario, f = 10 x edge length,
// u ~ U(1,4) * B/|E0| with B the peak total shipped volume, c0 = 2|E0|.
// Deterministic function of the config.
inline Instance generate_synthetic_instance(const GenConfig& cfg) {
  if (cfg.n_nodes < 2) throw GenerationError("generation requires at least 2 nodes");
  if (cfg.n_commodities < 1 || cfg.n_scenarios < 1) throw GenerationError("commodities and scenarios must be >= 1");
  if (cfg.knn < 1) throw GenerationError("knn must be >= 1");
  if (cfg.n_commodities > cfg.n_nodes)
    throw GenerationError("generation places one destination per commodity; need n_commodities <= n_nodes");

  Rng base(cfg.seed);
  const int N = cfg.n_nodes;

  Rng pos_rng = base.derive(1);
  std::vector<double> x(static_cast<std::size_t>(N)), y(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    x[static_cast<std::size_t>(n)] = pos_rng.uniform();
    y[static_cast<std::size_t>(n)] = pos_rng.uniform();
  }

  auto pairs = detail::knn_pairs(x, y, cfg.knn);
  std::vector<int> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng edge_rng = base.derive(2);
  shuffle(order, edge_rng);

  DisjointSets ds(N);
  int components = N;
  std::vector<std::pair<int, int>> chosen;
  for (int idx : order) {
    const auto [i, j] = pairs[static_cast<std::size_t>(idx)];
    chosen.push_back({i, j});
    if (ds.unite(i, j)) --components;
    if (components == 1) break;
  }
  if (components != 1)
    throw GenerationError("k-NN candidate pool exhausted before the support became connected (" +
                          std::to_string(components) + " components remain); increase knn");

  Instance inst;
  inst.network.num_nodes = N;
  for (const auto& [i, j] : chosen) {
    inst.network.edges.push_back({i, j});
    inst.network.edges.push_back({j, i});
  }
  inst.network.canonicalize();
  const int E = inst.network.num_edges();

  // Attribute draws happen in canonical edge order so the instance is a
  // deterministic function of the seed.
  Rng cost_rng = base.derive(3);
  inst.fixed_cost.resize(static_cast<std::size_t>(E));
  for (int e = 0; e < E; ++e) inst.fixed_cost[static_cast<std::size_t>(e)] = cost_rng.uniform(1.0, 4.0);

  const int K = cfg.n_commodities;
  const int R = cfg.n_scenarios;
  Rng dest_rng = base.derive(4);
  const std::vector<int> destinations = sample_without_replacement(N, K, dest_rng);

  inst.scenarios.resize(N, K, R);
  Rng demand_rng = base.derive(5);
  for (int k = 0; k < K; ++k) {
    const int sink = destinations[static_cast<std::size_t>(k)];
    for (int r = 0; r < R; ++r) {
      double total = 0.0;
      for (int n = 0; n < N; ++n) {
        if (n == sink) continue;
        const double d = static_cast<double>(demand_rng.uniform_int(5, 20));
        inst.scenarios.demand(n, k, r) = d;
        total += d;
      }
      inst.scenarios.demand(sink, k, r) = -total;
    }
  }

  inst.flow_cost.resize(static_cast<std::size_t>(E));
  for (int e = 0; e < E; ++e) {
    const auto& ed = inst.network.edges[static_cast<std::size_t>(e)];
    const double dx = x[static_cast<std::size_t>(ed.from)] - x[static_cast<std::size_t>(ed.to)];
    const double dy = y[static_cast<std::size_t>(ed.from)] - y[static_cast<std::size_t>(ed.to)];
    const double len = std::sqrt(dx * dx + dy * dy);
    inst.flow_cost[static_cast<std::size_t>(e)].assign(static_cast<std::size_t>(K), 10.0 * len);
  }

  // Capacity aggregate B: the peak shipped volume of any single commodity
  // across scenarios, times |E0|. Every edge then gets u >= that volume, so
  // even a degree-one sink can absorb its commodity and the all-open design
  // stays feasible, while cheap edges still saturate under shared load.
  double peak_volume = 0.0;
  for (int k = 0; k < K; ++k) {
    for (int r = 0; r < R; ++r) {
      double shipped = 0.0;
      for (int n = 0; n < N; ++n) shipped += std::max(0.0, inst.scenarios.demand(n, k, r));
      peak_volume = std::max(peak_volume, shipped);
    }
  }
  const double capacity_base = peak_volume * static_cast<double>(E);

  Rng cap_rng = base.derive(6);
  inst.capacity.resize(static_cast<std::size_t>(E));
  for (int e = 0; e < E; ++e)
    inst.capacity[static_cast<std::size_t>(e)] = cap_rng.uniform(1.0, 4.0) * capacity_base / static_cast<double>(E);

  inst.gamma = 1.0;
  inst.cardinality = 2 * static_cast<std::int64_t>(E);
  // Every generated edge is a free candidate; the all-open design is feasible
  // by construction and serves as the warm start.
  inst.fixed_open.clear();

  throw_if_invalid(inst);
  return inst;
}

}  // namespace snd
