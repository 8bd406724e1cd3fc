#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "snd/rng.hpp"

namespace snd {

struct KmeansResult {
  std::vector<int> assignment;  // point -> cluster, clusters renumbered dense
  int clusters = 0;
  double inertia = 0.0;
};

namespace detail {

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding and restarts; the best inertia
// wins. Empty clusters surviving a run are dropped and the labels renumbered
// (equivalent to merging away the empty ones), so the result never contains
// an empty cluster.
inline KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k, Rng rng, int restarts = 20,
                           int max_rounds = 100) {
  const int n = static_cast<int>(points.size());
  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  if (n == 0 || k <= 0) return best;
  k = std::min(k, n);

  for (int attempt = 0; attempt < restarts; ++attempt) {
    Rng local = rng.derive(static_cast<std::uint64_t>(attempt) + 1);
    // k-means++ seeding
    std::vector<std::vector<double>> centers;
    centers.push_back(points[static_cast<std::size_t>(local.uniform_int(0, n - 1))]);
    std::vector<double> d2(static_cast<std::size_t>(n));
    while (static_cast<int>(centers.size()) < k) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) m = std::min(m, detail::sqdist(points[static_cast<std::size_t>(i)], c));
        d2[static_cast<std::size_t>(i)] = m;
        total += m;
      }
      if (total <= 0.0) {
        centers.push_back(points[static_cast<std::size_t>(local.uniform_int(0, n - 1))]);
        continue;
      }
      double pick = local.uniform() * total;
      int chosen = n - 1;
      for (int i = 0; i < n; ++i) {
        pick -= d2[static_cast<std::size_t>(i)];
        if (pick <= 0.0) {
          chosen = i;
          break;
        }
      }
      centers.push_back(points[static_cast<std::size_t>(chosen)]);
    }

    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (int round = 0; round < max_rounds; ++round) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double m = std::numeric_limits<double>::infinity();
        for (int c = 0; c < static_cast<int>(centers.size()); ++c) {
          const double d = detail::sqdist(points[static_cast<std::size_t>(i)], centers[static_cast<std::size_t>(c)]);
          if (d < m) {
            m = d;
            arg = c;
          }
        }
        if (assign[static_cast<std::size_t>(i)] != arg) {
          assign[static_cast<std::size_t>(i)] = arg;
          changed = true;
        }
      }
      // recompute centers
      const std::size_t dim = points[0].size();
      std::vector<std::vector<double>> sums(centers.size(), std::vector<double>(dim, 0.0));
      std::vector<int> counts(centers.size(), 0);
      for (int i = 0; i < n; ++i) {
        const int c = assign[static_cast<std::size_t>(i)];
        ++counts[static_cast<std::size_t>(c)];
        for (std::size_t t = 0; t < dim; ++t) sums[static_cast<std::size_t>(c)][t] += points[static_cast<std::size_t>(i)][t];
      }
      for (std::size_t c = 0; c < centers.size(); ++c) {
        if (counts[c] == 0) continue;  // empty cluster keeps its center this round
        for (std::size_t t = 0; t < dim; ++t) centers[c][t] = sums[c][t] / counts[c];
      }
      if (!changed) break;
    }

    double inertia = 0.0;
    for (int i = 0; i < n; ++i)
      inertia += detail::sqdist(points[static_cast<std::size_t>(i)], centers[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])]);
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.assignment = assign;
    }
  }

  // renumber to dense labels, dropping empty clusters
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    int& slot = remap[static_cast<std::size_t>(best.assignment[static_cast<std::size_t>(i)])];
    if (slot < 0) slot = next++;
    best.assignment[static_cast<std::size_t>(i)] = slot;
  }
  best.clusters = next;
  return best;
}

// Adjusted Rand index between two labelings (test aid for clustering).
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const int n = static_cast<int>(a.size());
  const int ka = 1 + *std::max_element(a.begin(), a.end());
  const int kb = 1 + *std::max_element(b.begin(), b.end());
  std::vector<std::vector<long>> table(static_cast<std::size_t>(ka), std::vector<long>(static_cast<std::size_t>(kb), 0));
  for (int i = 0; i < n; ++i) ++table[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])][static_cast<std::size_t>(b[static_cast<std::size_t>(i)])];
  auto choose2 = [](long v) { return v * (v - 1) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < ka; ++i) {
    long row = 0;
    for (int j = 0; j < kb; ++j) {
      sum_ij += choose2(table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      row += table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    sum_a += choose2(row);
  }
  for (int j = 0; j < kb; ++j) {
    long col = 0;
    for (int i = 0; i < ka; ++i) col += table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    sum_b += choose2(col);
  }
  const double expected = sum_a * sum_b / choose2(n);
  const double maxi = 0.5 * (sum_a + sum_b);
  if (maxi == expected) return 1.0;
  return (sum_ij - expected) / (maxi - expected);
}

}  // namespace snd
