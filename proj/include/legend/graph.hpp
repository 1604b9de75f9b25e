#pragma once

// Whole-circuit graph over the AIG: one node per constant, input, latch and
// AND gate, edges from fanin to fanout carrying the literal's inversion, and
// one edge into every latch from the root of its next-state function.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <deque>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "legend/aiger.hpp"

namespace legend {

enum class NodeKind : std::uint8_t { constant = 0, input = 1, latch = 2, and_gate = 3 };

inline constexpr std::size_t kNodeFeatures = 9;

struct GraphEdge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  bool inverted = false;
  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

// Process-wide count of passes over circuit graphs made by the embedding code.
inline std::atomic<std::uint64_t>& graph_traversals() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

struct CircuitGraph {
  struct Node {
    NodeKind kind;
    AigVar var;
    friend bool operator==(const Node&, const Node&) = default;
  };

  std::vector<Node> nodes;
  std::vector<GraphEdge> edges;
  std::vector<std::uint32_t> latch_nodes;  // row i of an embedding table = latch ordinal i
  std::uint32_t property_node = 0;
  // Row-major nodes x kNodeFeatures.
  std::vector<float> features;

  // Edge indices, each list sorted by the neighbour's node id.
  std::vector<std::vector<std::uint32_t>> in_edges, out_edges;

  std::size_t num_nodes() const noexcept { return nodes.size(); }
  std::size_t num_latches() const noexcept { return latch_nodes.size(); }
  const float* feature_row(std::size_t n) const { return features.data() + n * kNodeFeatures; }

  friend bool operator==(const CircuitGraph& a, const CircuitGraph& b) {
    return a.nodes == b.nodes && a.edges == b.edges && a.latch_nodes == b.latch_nodes &&
           a.property_node == b.property_node && a.features == b.features;
  }
};

namespace detail {

inline void index_edges(CircuitGraph& g) {
  g.in_edges.assign(g.nodes.size(), {});
  g.out_edges.assign(g.nodes.size(), {});
  for (std::uint32_t e = 0; e < g.edges.size(); ++e) {
    g.in_edges[g.edges[e].dst].push_back(e);
    g.out_edges[g.edges[e].src].push_back(e);
  }
  auto by = [&](auto key) {
    return [&, key](std::uint32_t a, std::uint32_t b) {
      return std::pair(key(g.edges[a]), a) < std::pair(key(g.edges[b]), b);
    };
  };
  for (auto& l : g.in_edges) std::sort(l.begin(), l.end(), by([](const GraphEdge& e) { return e.src; }));
  for (auto& l : g.out_edges) std::sort(l.begin(), l.end(), by([](const GraphEdge& e) { return e.dst; }));
}

// Features: one-hot kind (4), in-degree, out-degree, logic level, normalized
// undirected BFS distance to the property node (1 if unreachable), number of
// inverted in-edges.
inline void compute_features(CircuitGraph& g) {
  const std::size_t n = g.nodes.size();
  g.features.assign(n * kNodeFeatures, 0.0f);
  std::vector<std::uint32_t> level(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    // ANDs come after their fanins in node order.
    if (g.nodes[v].kind != NodeKind::and_gate) continue;
    for (auto e : g.in_edges[v]) level[v] = std::max(level[v], level[g.edges[e].src] + 1);
  }
  constexpr auto inf = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> dist(n, inf);
  std::deque<std::uint32_t> q{g.property_node};
  dist[g.property_node] = 0;
  std::uint32_t maxd = 0;
  while (!q.empty()) {
    auto v = q.front();
    q.pop_front();
    maxd = std::max(maxd, dist[v]);
    auto visit = [&](std::uint32_t u) {
      if (dist[u] == inf) {
        dist[u] = dist[v] + 1;
        q.push_back(u);
      }
    };
    for (auto e : g.in_edges[v]) visit(g.edges[e].src);
    for (auto e : g.out_edges[v]) visit(g.edges[e].dst);
  }
  for (std::size_t v = 0; v < n; ++v) {
    float* f = g.features.data() + v * kNodeFeatures;
    f[static_cast<std::size_t>(g.nodes[v].kind)] = 1.0f;
    f[4] = static_cast<float>(g.in_edges[v].size());
    f[5] = static_cast<float>(g.out_edges[v].size());
    f[6] = static_cast<float>(level[v]);
    f[7] = dist[v] == inf ? 1.0f : static_cast<float>(dist[v]) / static_cast<float>(maxd + 1);
    f[8] = static_cast<float>(std::count_if(g.in_edges[v].begin(), g.in_edges[v].end(),
                                            [&](std::uint32_t e) { return g.edges[e].inverted; }));
  }
}

}  // namespace detail

// Node order: constant, inputs, latches (declaration order), ANDs by lhs.
// The property node is the node of the selected bad literal.
inline CircuitGraph build_graph(const Aig& aig, std::size_t bad_index = 0) {
  CircuitGraph g;
  std::vector<std::uint32_t> node_of(aig.max_var + 1, std::numeric_limits<std::uint32_t>::max());
  g.nodes.push_back({NodeKind::constant, 0});
  node_of[0] = 0;
  auto add = [&](NodeKind k, AigVar v) {
    node_of[v] = static_cast<std::uint32_t>(g.nodes.size());
    g.nodes.push_back({k, v});
  };
  for (auto l : aig.inputs) add(NodeKind::input, aig_var(l));
  for (const auto& l : aig.latches) {
    g.latch_nodes.push_back(static_cast<std::uint32_t>(g.nodes.size()));
    add(NodeKind::latch, aig_var(l.lit));
  }
  std::vector<const AigAnd*> gates;
  for (const auto& a : aig.ands) gates.push_back(&a);
  std::sort(gates.begin(), gates.end(), [](auto* a, auto* b) { return a->lhs < b->lhs; });
  for (auto* a : gates) add(NodeKind::and_gate, aig_var(a->lhs));

  auto edge = [&](AigLit from, std::uint32_t to) {
    g.edges.push_back({node_of[aig_var(from)], to, aig_sign(from)});
  };
  for (auto* a : gates) {
    edge(a->rhs0, node_of[aig_var(a->lhs)]);
    edge(a->rhs1, node_of[aig_var(a->lhs)]);
  }
  for (const auto& l : aig.latches) edge(l.next, node_of[aig_var(l.lit)]);
  if (aig.num_properties() > 0) g.property_node = node_of[aig_var(aig.property_literal(bad_index))];

  detail::index_edges(g);
  detail::compute_features(g);
  return g;
}

// Plain-text interchange file for the external encoder trainer:
//   legend-graph v1
//   nodes <N> features <F>
//   <kind> <aig var> <F feature values>      (N lines, node order)
//   edges <E>
//   <src> <dst> <inverted 0|1>               (E lines)
//   latches <L>
//   <node id>                                (L lines, latch ordinal order)
//   property <node id>
inline void write_graph(std::ostream& os, const CircuitGraph& g) {
  auto old = os.precision(9);
  os << "legend-graph v1\nnodes " << g.nodes.size() << " features " << kNodeFeatures << '\n';
  for (std::size_t v = 0; v < g.nodes.size(); ++v) {
    os << static_cast<int>(g.nodes[v].kind) << ' ' << g.nodes[v].var;
    for (std::size_t k = 0; k < kNodeFeatures; ++k) os << ' ' << g.feature_row(v)[k];
    os << '\n';
  }
  os << "edges " << g.edges.size() << '\n';
  for (const auto& e : g.edges) os << e.src << ' ' << e.dst << ' ' << (e.inverted ? 1 : 0) << '\n';
  os << "latches " << g.latch_nodes.size() << '\n';
  for (auto n : g.latch_nodes) os << n << '\n';
  os << "property " << g.property_node << '\n';
  os.precision(old);
}

inline CircuitGraph read_graph(std::istream& in) {
  auto fail = [](const std::string& what) { throw std::runtime_error("graph file: " + what); };
  auto expect = [&](const char* word) {
    std::string w;
    if (!(in >> w) || w != word) fail(std::string("expected '") + word + "'");
  };
  CircuitGraph g;
  std::string version;
  expect("legend-graph");
  if (!(in >> version) || version != "v1") fail("unsupported version");
  std::size_t n, f, m, l;
  expect("nodes");
  in >> n;
  expect("features");
  if (!(in >> f) || f != kNodeFeatures) fail("feature width mismatch");
  g.nodes.resize(n);
  g.features.resize(n * kNodeFeatures);
  for (std::size_t v = 0; v < n; ++v) {
    int kind;
    if (!(in >> kind >> g.nodes[v].var) || kind < 0 || kind > 3) fail("bad node line");
    g.nodes[v].kind = static_cast<NodeKind>(kind);
    for (std::size_t k = 0; k < kNodeFeatures; ++k) in >> g.features[v * kNodeFeatures + k];
  }
  expect("edges");
  in >> m;
  g.edges.resize(m);
  for (auto& e : g.edges) {
    int inv;
    if (!(in >> e.src >> e.dst >> inv) || e.src >= n || e.dst >= n) fail("bad edge line");
    e.inverted = inv != 0;
  }
  expect("latches");
  in >> l;
  g.latch_nodes.resize(l);
  for (auto& x : g.latch_nodes)
    if (!(in >> x) || x >= n) fail("bad latch line");
  expect("property");
  if (!(in >> g.property_node) || (n && g.property_node >= n)) fail("bad property line");
  detail::index_edges(g);
  return g;
}

}  // namespace legend
