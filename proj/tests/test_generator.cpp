#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "snd/generator.hpp"
#include "snd/io.hpp"
#include "snd/subproblem.hpp"

using namespace snd;

namespace {
std::string dump_bytes(const Instance& inst) { return instance_to_json(inst).dump(); }
}  // namespace

TEST_CASE("generation is deterministic under a fixed seed") {
  GenConfig cfg;
  cfg.n_nodes = 10;
  cfg.n_commodities = 3;
  cfg.n_scenarios = 4;
  cfg.seed = 7;
  const auto a = generate_synthetic_instance(cfg);
  const auto b = generate_synthetic_instance(cfg);
  REQUIRE(dump_bytes(a) == dump_bytes(b));

  cfg.seed = 8;
  const auto c = generate_synthetic_instance(cfg);
  REQUIRE(dump_bytes(a) != dump_bytes(c));
}

TEST_CASE("generated instances satisfy every invariant") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    GenConfig cfg;
    cfg.n_nodes = 14;
    cfg.n_commodities = 4;
    cfg.n_scenarios = 6;
    cfg.seed = seed;
    const auto inst = generate_synthetic_instance(cfg);
    REQUIRE(validate_instance(inst).empty());
    REQUIRE(is_connected(inst.network));
    REQUIRE(inst.cardinality == 2 * inst.num_edges());

    // demand balance with integer sources in [5, 20]
    for (int k = 0; k < inst.num_commodities(); ++k)
      for (int r = 0; r < inst.num_scenarios(); ++r) {
        double sum = 0.0;
        int sinks = 0;
        for (int n = 0; n < inst.num_nodes(); ++n) {
          const double d = inst.scenarios.demand(n, k, r);
          sum += d;
          if (d < 0)
            ++sinks;
          else {
            REQUIRE(d >= 5.0);
            REQUIRE(d <= 20.0);
            REQUIRE(d == std::floor(d));
          }
        }
        REQUIRE(sinks == 1);
        REQUIRE(sum == 0.0);
      }

    // costs and capacities within the stated ranges
    for (int e = 0; e < inst.num_edges(); ++e) {
      REQUIRE(inst.fixed_cost[static_cast<std::size_t>(e)] >= 1.0);
      REQUIRE(inst.fixed_cost[static_cast<std::size_t>(e)] <= 4.0);
      REQUIRE(inst.capacity[static_cast<std::size_t>(e)] > 0.0);
      for (double f : inst.flow_cost[static_cast<std::size_t>(e)]) {
        REQUIRE(f >= 0.0);
        REQUIRE(f <= 10.0 * std::sqrt(2.0));
      }
    }
  }
}

TEST_CASE("edges come in both directions and support the all-open design") {
  GenConfig cfg;
  cfg.n_nodes = 12;
  cfg.n_commodities = 3;
  cfg.n_scenarios = 5;
  cfg.seed = 42;
  const auto inst = generate_synthetic_instance(cfg);
  for (const auto& e : inst.network.edges) {
    const Edge rev{e.to, e.from};
    REQUIRE(std::binary_search(inst.network.edges.begin(), inst.network.edges.end(), rev));
  }
  // all-open is feasible in every scenario (relatively complete recourse)
  const auto z = DesignVector::all_open(inst.num_edges());
  for (int r = 0; r < inst.num_scenarios(); ++r) {
    const auto res = solve_subproblem(inst, z, r);
    REQUIRE(res.status == SubStatus::Optimal);
  }
}

TEST_CASE("generator rejects bad configs") {
  GenConfig cfg;
  cfg.n_nodes = 1;
  REQUIRE_THROWS_AS(generate_synthetic_instance(cfg), GenerationError);
  cfg.n_nodes = 5;
  cfg.knn = 0;
  REQUIRE_THROWS_AS(generate_synthetic_instance(cfg), GenerationError);
  cfg.knn = 6;
  cfg.n_commodities = 9;  // more commodities than nodes
  REQUIRE_THROWS_AS(generate_synthetic_instance(cfg), GenerationError);
}
