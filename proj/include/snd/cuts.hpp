#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "snd/instance.hpp"
#include "snd/kmeans.hpp"
#include "snd/subproblem.hpp"

namespace snd {

enum class CutKind { Optimality, Feasibility };

// What an optimality cut bounds from below: the single epigraph variable, one
// scenario's, one cluster's, or the sum over a scenario subset.
struct CutTarget {
  enum class Kind { Single, Scenario, Cluster, Aggregate };
  Kind kind = Kind::Single;
  int index = -1;
  std::vector<int> scenarios;  // Aggregate only, ascending

  static CutTarget single() { return {}; }
  static CutTarget scenario(int r) { return {Kind::Scenario, r, {}}; }
  static CutTarget cluster(int c) { return {Kind::Cluster, c, {}}; }
  static CutTarget aggregate(std::vector<int> scen) { return {Kind::Aggregate, -1, std::move(scen)}; }

  std::string to_string() const {
    switch (kind) {
      case Kind::Single: return "single";
      case Kind::Scenario: return "scen:" + std::to_string(index + 1);
      case Kind::Cluster: return "clus:" + std::to_string(index + 1);
      case Kind::Aggregate: {
        std::string s = "agg:";
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
          if (i) s += ';';
          s += std::to_string(scenarios[i] + 1);
        }
        return s;
      }
    }
    return "single";
  }

  friend bool operator==(const CutTarget&, const CutTarget&) = default;
};

struct CutProvenance {
  int outer_iter = -1;
  std::uint64_t incumbent = 0;  // hash of the generating design
  std::uint64_t sample = 0;     // draw id of the sample set
};

// Optimality: (sum of targeted eta) >= offset + slope'z, an under-estimate of
// the targeted true cost sum at every feasible design. Feasibility:
// offset + slope'z <= 0, satisfied by every design with feasible routing.
struct Cut {
  CutKind kind = CutKind::Optimality;
  CutTarget target;
  double offset = 0.0;
  std::vector<double> slope;
  CutProvenance prov;
};

inline double cut_value(const Cut& cut, const DesignVector& z) {
  double v = cut.offset;
  for (std::size_t e = 0; e < cut.slope.size(); ++e)
    if (z.open[e]) v += cut.slope[e];
  return v;
}

inline double cut_value(const Cut& cut, const std::vector<double>& z_frac) {
  double v = cut.offset;
  for (std::size_t e = 0; e < cut.slope.size(); ++e) v += cut.slope[e] * z_frac[e];
  return v;
}

// ---- builders -------------------------------------------------------------

struct DualRejected : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Componentwise mean; feasibility is preserved because the dual constraints
// are linear and beta >= 0 is convex.
inline DualSolution average_duals(const std::vector<const DualSolution*>& duals) {
  if (duals.empty()) throw DualRejected("cannot average an empty list of duals");
  const auto& first = *duals.front();
  DualSolution avg;
  avg.alpha.assign(first.alpha.size(), 0.0);
  avg.beta.assign(first.beta.size(), 0.0);
  avg.p.assign(first.p.size(), std::vector<double>(first.p.front().size(), 0.0));
  for (const auto* d : duals) {
    for (std::size_t e = 0; e < avg.alpha.size(); ++e) {
      avg.alpha[e] += d->alpha[e];
      avg.beta[e] += d->beta[e];
    }
    for (std::size_t k = 0; k < avg.p.size(); ++k)
      for (std::size_t n = 0; n < avg.p[k].size(); ++n) avg.p[k][n] += d->p[k][n];
  }
  const double inv = 1.0 / static_cast<double>(duals.size());
  for (std::size_t e = 0; e < avg.alpha.size(); ++e) {
    avg.alpha[e] *= inv;
    avg.beta[e] *= inv;
  }
  for (auto& pk : avg.p)
    for (auto& v : pk) v *= inv;
  return avg;
}

inline DualSolution average_duals(const std::vector<DualSolution>& duals) {
  std::vector<const DualSolution*> ptrs;
  ptrs.reserve(duals.size());
  for (const auto& d : duals) ptrs.push_back(&d);
  return average_duals(ptrs);
}

namespace detail {

// offset/slope contribution of scenario r evaluated with dual xi:
//   q(z, xi; d^r) = sum_k <p, d^r>  -  sum_e z_e w_e(xi).
inline double scenario_offset(const Instance& inst, const DualSolution& xi, int r) {
  double o = 0.0;
  for (int k = 0; k < inst.num_commodities(); ++k)
    for (int n = 0; n < inst.num_nodes(); ++n)
      o += xi.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] * inst.scenarios.demand(n, k, r);
  return o;
}

}  // namespace detail

// Core aggregate optimality cut over a scenario set: sampled scenarios use
// their own optimal duals, the rest the supplied fill-in dual (the sample
// average). Deterministically valid: q(z, xi; d^r) <= f(z; d^r) for every
// feasible dual xi and every design z.
inline Cut aggregate_optimality_cut(const Instance& inst, CutTarget target, const std::vector<int>& scenario_set,
                                    const std::vector<std::pair<int, const DualSolution*>>& sampled,
                                    const DualSolution* fill_in, const CutProvenance& prov = {},
                                    double dual_tol = 1e-7) {
  Cut cut;
  cut.kind = CutKind::Optimality;
  cut.target = std::move(target);
  cut.prov = prov;
  cut.slope.assign(static_cast<std::size_t>(inst.num_edges()), 0.0);

  auto sampled_dual = [&](int r) -> const DualSolution* {
    for (const auto& [rr, d] : sampled)
      if (rr == r) return d;
    return nullptr;
  };
  std::vector<double> fill_weights;
  if (fill_in) {
    if (dual_feasibility_violation(inst, *fill_in) > dual_tol)
      throw DualRejected("fill-in dual violates feasibility beyond tolerance");
    fill_weights = cut_edge_weights(inst, *fill_in);
  }

  int fill_count = 0;
  for (int r : scenario_set) {
    const DualSolution* own = sampled_dual(r);
    if (own) {
      if (dual_feasibility_violation(inst, *own) > dual_tol)
        throw DualRejected("sampled dual for scenario " + std::to_string(r + 1) +
                           " violates feasibility beyond tolerance");
      cut.offset += detail::scenario_offset(inst, *own, r);
      const auto w = cut_edge_weights(inst, *own);
      for (std::size_t e = 0; e < w.size(); ++e) cut.slope[e] -= w[e];
    } else {
      if (!fill_in) throw DualRejected("scenario " + std::to_string(r + 1) + " has neither a dual nor a fill-in");
      cut.offset += detail::scenario_offset(inst, *fill_in, r);
      ++fill_count;
    }
  }
  for (std::size_t e = 0; e < fill_weights.size(); ++e)
    cut.slope[e] -= static_cast<double>(fill_count) * fill_weights[e];
  return cut;
}

// One cut per provided scenario, tight at the generating design when the
// duals are optimal.
inline std::vector<Cut> multi_cut(const Instance& inst, const std::vector<std::pair<int, const DualSolution*>>& duals,
                                  const CutProvenance& prov = {}, double dual_tol = 1e-7) {
  std::vector<Cut> cuts;
  cuts.reserve(duals.size());
  for (const auto& [r, d] : duals)
    cuts.push_back(aggregate_optimality_cut(inst, CutTarget::scenario(r), {r}, {{r, d}}, nullptr, prov, dual_tol));
  return cuts;
}

enum class SingleCutMode { Deterministic, DualAveraged };

// Single-target cut over all scenarios. Deterministic mode requires a dual
// per scenario; dual-averaged mode fills unsampled scenarios with the sample
// average.
inline Cut single_cut(const Instance& inst, const std::vector<std::pair<int, const DualSolution*>>& sampled,
                      SingleCutMode mode, const CutProvenance& prov = {}, double dual_tol = 1e-7) {
  if (sampled.empty()) throw DualRejected("single cut needs a nonempty sample");
  std::vector<int> all(static_cast<std::size_t>(inst.num_scenarios()));
  for (int r = 0; r < inst.num_scenarios(); ++r) all[static_cast<std::size_t>(r)] = r;
  if (mode == SingleCutMode::Deterministic) {
    if (static_cast<int>(sampled.size()) != inst.num_scenarios())
      throw DualRejected("deterministic single cut requires duals for every scenario");
    return aggregate_optimality_cut(inst, CutTarget::single(), all, sampled, nullptr, prov, dual_tol);
  }
  std::optional<DualSolution> avg;
  if (static_cast<int>(sampled.size()) < inst.num_scenarios()) {
    std::vector<const DualSolution*> ptrs;
    ptrs.reserve(sampled.size());
    for (const auto& [r, d] : sampled) ptrs.push_back(d);
    avg = average_duals(ptrs);
  }
  return aggregate_optimality_cut(inst, CutTarget::single(), all, sampled, avg ? &*avg : nullptr, prov, dual_tol);
}

// Feasibility cut from a Farkas certificate. Edges with infinite capacity and
// positive certificate beta would carry an infinite coefficient; opening such
// an edge voids the certificate, so they get a finite coefficient that
// deactivates the cut on its own.
inline Cut feasibility_cut(const Instance& inst, const FarkasCertificate& cert, int r,
                           const CutProvenance& prov = {}) {
  if (!(cert.violation > 0.0)) throw DualRejected("Farkas certificate does not separate (violation <= 0)");
  Cut cut;
  cut.kind = CutKind::Feasibility;
  cut.target = CutTarget::single();
  cut.prov = prov;
  cut.offset = 0.0;
  for (int k = 0; k < inst.num_commodities(); ++k)
    for (int n = 0; n < inst.num_nodes(); ++n)
      cut.offset += cert.p[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] * inst.scenarios.demand(n, k, r);
  cut.slope.assign(static_cast<std::size_t>(inst.num_edges()), 0.0);
  for (int e = 0; e < inst.num_edges(); ++e) {
    const double beta = cert.beta[static_cast<std::size_t>(e)];
    if (beta <= 0.0) continue;
    const double u = inst.capacity[static_cast<std::size_t>(e)];
    cut.slope[static_cast<std::size_t>(e)] = u != kInf ? -u * beta : -(std::abs(cut.offset) + 1.0);
  }
  return cut;
}

// Node-degree valid inequalities: a commodity with one supply node o in every
// scenario needs an open edge out of o (and into its unique sink), unless a
// fixed_open edge already covers it. Emitted in <= 0 feasibility form.
inline std::vector<Cut> static_valid_inequalities(const Instance& inst) {
  std::vector<Cut> cuts;
  const int E = inst.num_edges();
  for (int k = 0; k < inst.num_commodities(); ++k) {
    int source = -1, sink = -1;
    bool unique_source = true, unique_sink = true, any = false;
    for (int n = 0; n < inst.num_nodes() && (unique_source || unique_sink); ++n) {
      bool supplies = false, demands = false;
      for (int r = 0; r < inst.num_scenarios(); ++r) {
        const double d = inst.scenarios.demand(n, k, r);
        supplies = supplies || d > 0;
        demands = demands || d < 0;
      }
      if (supplies) {
        any = true;
        if (source < 0) source = n;
        else if (source != n) unique_source = false;
      }
      if (demands) {
        if (sink < 0) sink = n;
        else if (sink != n) unique_sink = false;
      }
    }
    if (!any) continue;  // zero-demand commodity
    auto emit = [&](int node, bool outgoing) {
      std::vector<int> edges;
      for (int e = 0; e < E; ++e) {
        const auto& ed = inst.network.edges[static_cast<std::size_t>(e)];
        if ((outgoing && ed.from == node) || (!outgoing && ed.to == node)) edges.push_back(e);
      }
      for (int e : edges)
        if (inst.is_fixed_open(e)) return;  // already satisfied forever
      Cut cut;
      cut.kind = CutKind::Feasibility;
      cut.offset = 1.0;
      cut.slope.assign(static_cast<std::size_t>(E), 0.0);
      for (int e : edges) cut.slope[static_cast<std::size_t>(e)] = -1.0;
      cuts.push_back(std::move(cut));
    };
    if (unique_source && source >= 0) emit(source, true);
    if (unique_sink && sink >= 0) emit(sink, false);
  }
  return cuts;
}

// ---- k-cut ----------------------------------------------------------------

struct ScenarioPartition {
  int k = 1;
  std::vector<int> assignment;  // scenario -> cluster, no empty clusters

  std::vector<std::vector<int>> clusters() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < assignment.size(); ++r)
      out[static_cast<std::size_t>(assignment[r])].push_back(static_cast<int>(r));
    return out;
  }
};

// k-means on the root-node dual alphas (squared Euclidean, 20 seeded
// restarts). Scenarios with no dual (infeasible at the root design) cluster
// at the origin.
inline ScenarioPartition kcut_partition(const Instance& inst,
                                        const std::vector<const DualSolution*>& root_duals, int k,
                                        std::uint64_t seed) {
  const int R = inst.num_scenarios();
  if (k < 1 || k > R) throw std::invalid_argument("cluster count must lie in 1..|R|");
  ScenarioPartition part;
  if (k == 1) {
    part.k = 1;
    part.assignment.assign(static_cast<std::size_t>(R), 0);
    return part;
  }
  std::vector<std::vector<double>> points(static_cast<std::size_t>(R),
                                          std::vector<double>(static_cast<std::size_t>(inst.num_edges()), 0.0));
  for (int r = 0; r < R; ++r)
    if (root_duals[static_cast<std::size_t>(r)])
      points[static_cast<std::size_t>(r)] = root_duals[static_cast<std::size_t>(r)]->alpha;
  auto km = kmeans(points, k, Rng(seed, 0x6b6d65616e73ull));
  part.k = km.clusters;
  part.assignment = km.assignment;
  return part;
}

// Per-cluster aggregate cuts with dual averaging inside each cluster.
inline std::vector<Cut> kcut_cuts(const Instance& inst, const ScenarioPartition& part,
                                  const std::vector<std::vector<std::pair<int, const DualSolution*>>>& sampled_per_cluster,
                                  const CutProvenance& prov = {}, double dual_tol = 1e-7) {
  const auto clusters = part.clusters();
  std::vector<Cut> cuts;
  for (int c = 0; c < part.k; ++c) {
    const auto& sampled = sampled_per_cluster[static_cast<std::size_t>(c)];
    if (sampled.empty()) throw DualRejected("cluster " + std::to_string(c + 1) + " has no sampled scenarios");
    std::optional<DualSolution> avg;
    if (sampled.size() < clusters[static_cast<std::size_t>(c)].size()) {
      std::vector<const DualSolution*> ptrs;
      for (const auto& [r, d] : sampled) ptrs.push_back(d);
      avg = average_duals(ptrs);
    }
    cuts.push_back(aggregate_optimality_cut(inst, CutTarget::cluster(c), clusters[static_cast<std::size_t>(c)],
                                            sampled, avg ? &*avg : nullptr, prov, dual_tol));
  }
  return cuts;
}

// Extra aggregate cut of the accelerated multi-cut method: bounds the sum of
// unsampled epigraph variables via the averaged dual. Empty when the sample
// covers everything.
inline std::optional<Cut> accelerated_multicut_extra(const Instance& inst, const std::vector<int>& sampled_set,
                                                     const DualSolution& averaged, const CutProvenance& prov = {},
                                                     double dual_tol = 1e-7) {
  std::vector<int> rest;
  for (int r = 0; r < inst.num_scenarios(); ++r)
    if (!std::binary_search(sampled_set.begin(), sampled_set.end(), r)) rest.push_back(r);
  if (rest.empty()) return std::nullopt;
  return aggregate_optimality_cut(inst, CutTarget::aggregate(rest), rest, {}, &averaged, prov, dual_tol);
}

// ---- diagnostics ----------------------------------------------------------

struct Prop2Report {
  double error_sum = 0.0;  // sum over unsampled scenarios of |q(z, avg dual) - f|
  double nu = 0.0;         // dual-variance statistic over all scenarios
  double ratio = 0.0;      // error_sum / (nu * sqrt(|unsampled|))
  int complement_size = 0;
};

inline Prop2Report prop2_diagnostic(const Instance& inst, const DesignVector& z, const std::vector<int>& sampled_set,
                                    const std::vector<DualSolution>& all_duals,
                                    const std::vector<double>& all_costs) {
  const int R = inst.num_scenarios();
  Prop2Report rep;

  std::vector<const DualSolution*> sampled;
  for (int r : sampled_set) sampled.push_back(&all_duals[static_cast<std::size_t>(r)]);
  const DualSolution avg_sampled = average_duals(sampled);

  for (int r = 0; r < R; ++r) {
    if (std::binary_search(sampled_set.begin(), sampled_set.end(), r)) continue;
    ++rep.complement_size;
    rep.error_sum += std::abs(dual_bound_value(inst, z, avg_sampled, r) - all_costs[static_cast<std::size_t>(r)]);
  }

  std::vector<const DualSolution*> all;
  for (const auto& d : all_duals) all.push_back(&d);
  const DualSolution center = average_duals(all);
  double var = 0.0;
  for (const auto& d : all_duals) {
    for (std::size_t e = 0; e < d.alpha.size(); ++e) {
      var += (d.alpha[e] - center.alpha[e]) * (d.alpha[e] - center.alpha[e]);
      var += (d.beta[e] - center.beta[e]) * (d.beta[e] - center.beta[e]);
    }
    for (std::size_t k = 0; k < d.p.size(); ++k)
      for (std::size_t n = 0; n < d.p[k].size(); ++n)
        var += (d.p[k][n] - center.p[k][n]) * (d.p[k][n] - center.p[k][n]);
  }
  rep.nu = std::sqrt(var / R);
  rep.ratio = (rep.nu > 0 && rep.complement_size > 0)
                  ? rep.error_sum / (rep.nu * std::sqrt(static_cast<double>(rep.complement_size)))
                  : 0.0;
  return rep;
}

// ---- pool -----------------------------------------------------------------

// Append-only cut store with duplicate detection on rounded coefficients.
class CutPool {
 public:
  bool add(Cut cut) {
    const auto key = hash_key(cut);
    if (!keys_.insert(key).second) return false;
    cuts_.push_back(std::move(cut));
    return true;
  }

  std::size_t size() const { return cuts_.size(); }
  bool empty() const { return cuts_.empty(); }
  const Cut& operator[](std::size_t i) const { return cuts_[i]; }
  const std::vector<Cut>& cuts() const { return cuts_; }
  void clear() {
    cuts_.clear();
    keys_.clear();
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "kind,target,offset";
    const std::size_t E = cuts_.empty() ? 0 : cuts_.front().slope.size();
    for (std::size_t e = 0; e < E; ++e) out << ",slope_e" << (e + 1);
    out << "\n";
    DoubleFmt fmt;
    for (const auto& cut : cuts_) {
      out << (cut.kind == CutKind::Optimality ? "opt" : "feas") << ',' << cut.target.to_string() << ','
          << fmt(cut.offset);
      for (double s : cut.slope) out << ',' << fmt(s);
      out << "\n";
    }
    return out.str();
  }

  static CutPool from_csv(std::istream& in, int num_edges) {
    CutPool pool;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("cut pool csv: empty file");
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string kind_s, target_s, cell;
      if (!std::getline(row, kind_s, ',') || !std::getline(row, target_s, ','))
        throw ParseError("cut pool csv line " + std::to_string(lineno) + ": expected kind,target,offset,...");
      Cut cut;
      cut.kind = kind_s == "feas" ? CutKind::Feasibility : CutKind::Optimality;
      cut.target = parse_target(target_s, lineno);
      if (!std::getline(row, cell, ','))
        throw ParseError("cut pool csv line " + std::to_string(lineno) + ": missing offset");
      cut.offset = std::stod(cell);
      while (std::getline(row, cell, ',')) cut.slope.push_back(std::stod(cell));
      if (static_cast<int>(cut.slope.size()) != num_edges)
        throw ParseError("cut pool csv line " + std::to_string(lineno) + ": expected " + std::to_string(num_edges) +
                         " slopes, got " + std::to_string(cut.slope.size()));
      pool.add(std::move(cut));
    }
    return pool;
  }

 private:
  // 17 significant digits round-trip any double
  struct DoubleFmt {
    std::string operator()(double v) const {
      std::ostringstream oss;
      oss.precision(17);
      oss << v;
      return oss.str();
    }
  };

  static CutTarget parse_target(const std::string& s, int lineno) {
    if (s == "single") return CutTarget::single();
    auto num = [&](const std::string& part) {
      try {
        return std::stoi(part) - 1;
      } catch (const std::exception&) {
        throw ParseError("cut pool csv line " + std::to_string(lineno) + ": bad target '" + s + "'");
      }
    };
    if (s.rfind("scen:", 0) == 0) return CutTarget::scenario(num(s.substr(5)));
    if (s.rfind("clus:", 0) == 0) return CutTarget::cluster(num(s.substr(5)));
    if (s.rfind("agg:", 0) == 0) {
      std::vector<int> scen;
      std::istringstream list(s.substr(4));
      std::string part;
      while (std::getline(list, part, ';')) scen.push_back(num(part));
      return CutTarget::aggregate(std::move(scen));
    }
    throw ParseError("cut pool csv line " + std::to_string(lineno) + ": bad target '" + s + "'");
  }

  static std::uint64_t hash_key(const Cut& cut) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 0x100000001b3ull;
    };
    mix(cut.kind == CutKind::Optimality ? 1 : 2);
    mix(static_cast<std::uint64_t>(cut.target.kind));
    mix(static_cast<std::uint64_t>(cut.target.index + 7));
    for (int r : cut.target.scenarios) mix(static_cast<std::uint64_t>(r + 13));
    auto round9 = [](double v) { return static_cast<std::int64_t>(std::llround(v * 1e9)); };
    mix(static_cast<std::uint64_t>(round9(cut.offset)));
    for (double s : cut.slope) mix(static_cast<std::uint64_t>(round9(s)));
    return h;
  }

  std::vector<Cut> cuts_;
  std::unordered_set<std::uint64_t> keys_;
};

}  // namespace snd
