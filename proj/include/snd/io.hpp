#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "snd/instance.hpp"

namespace snd {

namespace detail {

inline nlohmann::json number_or_inf(double v) {
  if (v == kInf) return "inf";
  return v;
}

inline double parse_number_or_inf(const nlohmann::json& j, const std::string& field) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kInf;
    throw ParseError("field '" + field + "': expected a number or \"inf\", got \"" + j.get<std::string>() + "\"");
  }
  if (!j.is_number()) throw ParseError("field '" + field + "': expected a number or \"inf\"");
  return j.get<double>();
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

// Scenario CSV: header `scenario,commodity,node,demand`, one row per nonzero
// entry, all ids 1-based.
inline std::string scenarios_to_csv(const ScenarioSet& sc) {
  std::ostringstream out;
  out << "scenario,commodity,node,demand\n";
  nlohmann::json num;  // reuse shortest round-trip double formatting
  for (int r = 0; r < sc.num_scenarios; ++r)
    for (int k = 0; k < sc.num_commodities; ++k)
      for (int n = 0; n < sc.num_nodes; ++n) {
        const double d = sc.demand(n, k, r);
        if (d == 0.0) continue;
        num = d;
        out << (r + 1) << ',' << (k + 1) << ',' << (n + 1) << ',' << num.dump() << "\n";
      }
  return out.str();
}

inline ScenarioSet scenarios_from_csv(std::istream& in, int num_nodes, int num_commodities, int num_scenarios) {
  ScenarioSet sc;
  sc.resize(num_nodes, num_commodities, num_scenarios);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw ParseError("scenario csv: empty file");
  ++lineno;
  if (line.size() && line.back() == '\r') line.pop_back();
  if (line != "scenario,commodity,node,demand")
    throw ParseError("scenario csv line 1: expected header 'scenario,commodity,node,demand'");
  while (std::getline(in, line)) {
    ++lineno;
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    long vals[3] = {0, 0, 0};
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(row, cell, ','))
        throw ParseError("scenario csv line " + std::to_string(lineno) + ": expected 4 fields");
      try {
        vals[i] = std::stol(cell);
      } catch (const std::exception&) {
        throw ParseError("scenario csv line " + std::to_string(lineno) + ": bad integer '" + cell + "'");
      }
    }
    if (!std::getline(row, cell))
      throw ParseError("scenario csv line " + std::to_string(lineno) + ": expected 4 fields");
    double demand = 0.0;
    try {
      demand = std::stod(cell);
    } catch (const std::exception&) {
      throw ParseError("scenario csv line " + std::to_string(lineno) + ": bad number '" + cell + "'");
    }
    const long r = vals[0], k = vals[1], n = vals[2];
    if (r < 1 || r > num_scenarios)
      throw ParseError("scenario csv line " + std::to_string(lineno) + ": scenario " + std::to_string(r) + " out of range");
    if (k < 1 || k > num_commodities)
      throw ParseError("scenario csv line " + std::to_string(lineno) + ": commodity " + std::to_string(k) + " out of range");
    if (n < 1 || n > num_nodes)
      throw ParseError("scenario csv line " + std::to_string(lineno) + ": node " + std::to_string(n) + " out of range");
    sc.demand(static_cast<int>(n) - 1, static_cast<int>(k) - 1, static_cast<int>(r) - 1) = demand;
  }
  return sc;
}

// Canonical JSON form of an instance. Doubles use shortest round-trip
// encoding and keys are sorted, so identical instances serialize to
// identical bytes.
inline nlohmann::json instance_to_json(const Instance& inst) {
  nlohmann::json j;
  j["nodes"] = inst.num_nodes();
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const auto& e : inst.network.edges) edges.push_back({e.from + 1, e.to + 1});
  j["fixed_cost"] = inst.fixed_cost;
  auto& cap = j["capacity"] = nlohmann::json::array();
  for (double u : inst.capacity) cap.push_back(detail::number_or_inf(u));
  j["gamma"] = detail::number_or_inf(inst.gamma);
  j["cardinality"] = inst.cardinality;
  auto& fo = j["fixed_open"] = nlohmann::json::array();
  for (int e : inst.fixed_open) fo.push_back(e + 1);
  j["flow_cost"] = inst.flow_cost;  // edge-major, commodity-minor
  j["commodities"] = inst.num_commodities();
  j["scenario_count"] = inst.num_scenarios();
  auto& dem = j["demands"] = nlohmann::json::array();
  const auto& sc = inst.scenarios;
  for (int r = 0; r < sc.num_scenarios; ++r) {
    nlohmann::json per_k = nlohmann::json::array();
    for (int k = 0; k < sc.num_commodities; ++k) {
      nlohmann::json per_n = nlohmann::json::array();
      for (int n = 0; n < sc.num_nodes; ++n) per_n.push_back(sc.demand(n, k, r));
      per_k.push_back(std::move(per_n));
    }
    dem.push_back(std::move(per_k));
  }
  return j;
}

inline Instance instance_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  Instance inst;
  auto require = [&](const char* field) -> const nlohmann::json& {
    auto it = j.find(field);
    if (it == j.end()) throw ParseError(std::string("missing field '") + field + "'");
    return *it;
  };

  const int N = require("nodes").get<int>();
  if (N < 1) throw ParseError("field 'nodes': must be >= 1");
  inst.network.num_nodes = N;

  const auto& edges = require("edges");
  if (!edges.is_array()) throw ParseError("field 'edges': expected an array of [i,j] pairs");
  std::vector<int> order;  // permutation applied by canonical sorting
  for (std::size_t idx = 0; idx < edges.size(); ++idx) {
    const auto& pair = edges[idx];
    if (!pair.is_array() || pair.size() != 2)
      throw ParseError("field 'edges' entry " + std::to_string(idx + 1) + ": expected [i,j]");
    const int i = pair[0].get<int>(), t = pair[1].get<int>();
    if (i < 1 || i > N || t < 1 || t > N)
      throw ParseError("field 'edges' entry " + std::to_string(idx + 1) + ": node outside 1.." + std::to_string(N));
    if (i == t) throw ParseError("field 'edges' entry " + std::to_string(idx + 1) + ": self loop");
    inst.network.edges.push_back({i - 1, t - 1});
  }
  const int E = inst.network.num_edges();
  order.resize(static_cast<std::size_t>(E));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return inst.network.edges[static_cast<std::size_t>(a)] < inst.network.edges[static_cast<std::size_t>(b)];
  });
  for (int pos = 0; pos + 1 < E; ++pos)
    if (inst.network.edges[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] ==
        inst.network.edges[static_cast<std::size_t>(order[static_cast<std::size_t>(pos) + 1])]) {
      const auto& e = inst.network.edges[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])];
      throw ParseError("field 'edges': duplicate directed edge (" + std::to_string(e.from + 1) + "," +
                       std::to_string(e.to + 1) + ")");
    }

  const auto& fixed_cost = require("fixed_cost");
  const auto& capacity = require("capacity");
  const auto& flow_cost = require("flow_cost");
  if (static_cast<int>(fixed_cost.size()) != E) throw ParseError("field 'fixed_cost': expected one entry per edge");
  if (static_cast<int>(capacity.size()) != E) throw ParseError("field 'capacity': expected one entry per edge");
  if (static_cast<int>(flow_cost.size()) != E) throw ParseError("field 'flow_cost': expected one entry per edge");

  const int K = require("commodities").get<int>();
  if (K < 1) throw ParseError("field 'commodities': must be >= 1");
  const int R = require("scenario_count").get<int>();
  if (R < 1) throw ParseError("field 'scenario_count': must be >= 1");

  // Gather per-edge data in file order, then permute into canonical order.
  std::vector<double> fc(static_cast<std::size_t>(E)), cap(static_cast<std::size_t>(E));
  std::vector<std::vector<double>> fl(static_cast<std::size_t>(E));
  for (int idx = 0; idx < E; ++idx) {
    fc[static_cast<std::size_t>(idx)] = fixed_cost[static_cast<std::size_t>(idx)].get<double>();
    cap[static_cast<std::size_t>(idx)] =
        detail::parse_number_or_inf(capacity[static_cast<std::size_t>(idx)], "capacity");
    const auto& row = flow_cost[static_cast<std::size_t>(idx)];
    if (!row.is_array() || static_cast<int>(row.size()) != K)
      throw ParseError("field 'flow_cost' entry " + std::to_string(idx + 1) + ": expected one entry per commodity");
    fl[static_cast<std::size_t>(idx)] = row.get<std::vector<double>>();
  }
  std::vector<Edge> sorted_edges(static_cast<std::size_t>(E));
  inst.fixed_cost.resize(static_cast<std::size_t>(E));
  inst.capacity.resize(static_cast<std::size_t>(E));
  inst.flow_cost.resize(static_cast<std::size_t>(E));
  std::vector<int> file_to_canonical(static_cast<std::size_t>(E));
  for (int pos = 0; pos < E; ++pos) {
    const int src = order[static_cast<std::size_t>(pos)];
    sorted_edges[static_cast<std::size_t>(pos)] = inst.network.edges[static_cast<std::size_t>(src)];
    inst.fixed_cost[static_cast<std::size_t>(pos)] = fc[static_cast<std::size_t>(src)];
    inst.capacity[static_cast<std::size_t>(pos)] = cap[static_cast<std::size_t>(src)];
    inst.flow_cost[static_cast<std::size_t>(pos)] = std::move(fl[static_cast<std::size_t>(src)]);
    file_to_canonical[static_cast<std::size_t>(src)] = pos;
  }
  inst.network.edges = std::move(sorted_edges);

  inst.gamma = detail::parse_number_or_inf(require("gamma"), "gamma");
  inst.cardinality = require("cardinality").get<std::int64_t>();
  for (const auto& item : require("fixed_open")) {
    const int file_idx = item.get<int>();
    if (file_idx < 1 || file_idx > E)
      throw ParseError("field 'fixed_open': edge index " + std::to_string(file_idx) + " outside 1.." + std::to_string(E));
    inst.fixed_open.push_back(file_to_canonical[static_cast<std::size_t>(file_idx) - 1]);
  }
  std::sort(inst.fixed_open.begin(), inst.fixed_open.end());

  if (auto it = j.find("scenario_file"); it != j.end()) {
    const auto path = base_dir / it->get<std::string>();
    std::ifstream in(path);
    if (!in) throw ParseError("scenario_file: cannot open " + path.string());
    inst.scenarios = scenarios_from_csv(in, N, K, R);
  } else {
    const auto& dem = require("demands");
    if (static_cast<int>(dem.size()) != R) throw ParseError("field 'demands': expected one entry per scenario");
    inst.scenarios.resize(N, K, R);
    for (int r = 0; r < R; ++r) {
      const auto& per_k = dem[static_cast<std::size_t>(r)];
      if (static_cast<int>(per_k.size()) != K)
        throw ParseError("field 'demands' scenario " + std::to_string(r + 1) + ": expected one entry per commodity");
      for (int k = 0; k < K; ++k) {
        const auto& per_n = per_k[static_cast<std::size_t>(k)];
        if (static_cast<int>(per_n.size()) != N)
          throw ParseError("field 'demands' scenario " + std::to_string(r + 1) + " commodity " + std::to_string(k + 1) +
                           ": expected one entry per node");
        for (int n = 0; n < N; ++n)
          inst.scenarios.demand(n, k, r) = per_n[static_cast<std::size_t>(n)].get<double>();
      }
    }
  }

  throw_if_invalid(inst);
  return inst;
}

inline Instance read_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open instance file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("instance file " + path.string() + ": " + e.what());
  }
  return instance_from_json(j, path.parent_path());
}

// Writes the canonical JSON form; with `scenario_csv` set, demands go to a
// sidecar CSV referenced from the instance file.
inline void write_instance(const Instance& inst, const std::filesystem::path& path,
                           const std::optional<std::string>& scenario_csv = std::nullopt) {
  throw_if_invalid(inst);
  nlohmann::json j = instance_to_json(inst);
  if (scenario_csv) {
    j.erase("demands");
    j["scenario_file"] = *scenario_csv;
    detail::write_text_atomic(path.parent_path() / *scenario_csv, scenarios_to_csv(inst.scenarios));
  }
  detail::write_text_atomic(path, j.dump(2) + "\n");
}

// Design files: JSON array of open edge indices (1-based, canonical order).
inline void write_design(const DesignVector& z, const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t e = 0; e < z.open.size(); ++e)
    if (z.open[e]) arr.push_back(e + 1);
  detail::write_text_atomic(path, arr.dump() + "\n");
}

inline DesignVector read_design(const std::filesystem::path& path, int num_edges) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open design file: " + path.string());
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("design file " + path.string() + ": " + e.what());
  }
  if (!arr.is_array()) throw ParseError("design file: expected a JSON array of edge indices");
  DesignVector z = DesignVector::all_closed(num_edges);
  for (const auto& item : arr) {
    const int idx = item.get<int>();
    if (idx < 1 || idx > num_edges)
      throw ParseError("design file: edge index " + std::to_string(idx) + " outside 1.." + std::to_string(num_edges));
    z.open[static_cast<std::size_t>(idx) - 1] = 1;
  }
  return z;
}

}  // namespace snd
