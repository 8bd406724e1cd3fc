#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace snd {

struct Edge {
  int from = 0;  // 0-based node ids in memory; file formats are 1-based
  int to = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge& a, const Edge& b) {
    return std::pair{a.from, a.to} <=> std::pair{b.from, b.to};
  }
};

// Directed network. Edge list is kept in canonical (lexicographic) order;
// the flow conservation matrix A has +1 at the tail row and -1 at the head
// row of each edge, so A x = d means net outflow equals demand.
struct Network {
  int num_nodes = 0;
  std::vector<Edge> edges;

  int num_edges() const { return static_cast<int>(edges.size()); }

  void canonicalize() { std::sort(edges.begin(), edges.end()); }

  bool is_canonical() const { return std::is_sorted(edges.begin(), edges.end()); }
};

// Union-find over the undirected support of a subset of edges.
class DisjointSets {
public:
  explicit DisjointSets(int n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int a) {
    while (parent_[static_cast<std::size_t>(a)] != a) {
      parent_[static_cast<std::size_t>(a)] = parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(a)])];
      a = parent_[static_cast<std::size_t>(a)];
    }
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    return true;
  }

private:
  std::vector<int> parent_;
};

// Component label per node for the undirected support of the edges where
// `open[e]` is true (all edges when `open` is empty). Labels are the smallest
// node id in each component.
inline std::vector<int> undirected_components(const Network& net, const std::vector<char>& open = {}) {
  DisjointSets ds(net.num_nodes);
  for (int e = 0; e < net.num_edges(); ++e) {
    if (!open.empty() && !open[static_cast<std::size_t>(e)]) continue;
    ds.unite(net.edges[static_cast<std::size_t>(e)].from, net.edges[static_cast<std::size_t>(e)].to);
  }
  std::vector<int> label(static_cast<std::size_t>(net.num_nodes));
  for (int n = 0; n < net.num_nodes; ++n) label[static_cast<std::size_t>(n)] = ds.find(n);
  return label;
}

inline bool is_connected(const Network& net) {
  if (net.num_nodes <= 1) return true;
  const auto label = undirected_components(net);
  return std::all_of(label.begin(), label.end(), [](int l) { return l == 0; });
}

}  // namespace snd
