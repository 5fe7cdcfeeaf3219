#include "gatelab/graph.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "gatelab/io.hpp"
#include "gatelab/rng.hpp"

namespace gatelab {

Graph::Graph(std::vector<EdgeId> offsets, std::vector<NodeId> neighbors)
    : offsets_(std::move(offsets)), neighbors_(std::move(neighbors)) {
  const std::size_t n = num_nodes();
  const std::size_t m = neighbors_.size();
  targets_.resize(m);
  reverse_.assign(m, kNoEdge);
  self_edge_.assign(n, kNoEdge);
  has_self_loops_ = true;
  for (NodeId v = 0; v < n; ++v) {
    for (EdgeId e = offsets_[v]; e < offsets_[v + 1]; ++e) {
      targets_[e] = v;
      if (neighbors_[e] == v) self_edge_[v] = e;
    }
    if (self_edge_[v] == kNoEdge) has_self_loops_ = false;
  }
  if (n == 0) has_self_loops_ = false;
  for (NodeId v = 0; v < n; ++v) {
    for (EdgeId e = offsets_[v]; e < offsets_[v + 1]; ++e) {
      const NodeId u = neighbors_[e];
      auto row = std::span(neighbors_).subspan(offsets_[u], offsets_[u + 1] - offsets_[u]);
      auto it = std::lower_bound(row.begin(), row.end(), v);
      if (it != row.end() && *it == v)
        reverse_[e] = offsets_[u] + static_cast<EdgeId>(it - row.begin());
    }
  }
}

Graph Graph::from_edges(std::size_t num_nodes,
                        std::span<const std::pair<NodeId, NodeId>> edges) {
  std::vector<std::vector<NodeId>> rows(num_nodes);
  for (auto [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes)
      throw std::out_of_range("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                              ") outside graph of " + std::to_string(num_nodes) + " nodes");
    rows[v].push_back(u);
    if (u != v) rows[u].push_back(v);
  }
  std::vector<EdgeId> offsets(num_nodes + 1, 0);
  std::vector<NodeId> neighbors;
  for (std::size_t v = 0; v < num_nodes; ++v) {
    auto& row = rows[v];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    neighbors.insert(neighbors.end(), row.begin(), row.end());
    offsets[v + 1] = static_cast<EdgeId>(neighbors.size());
  }
  return Graph(std::move(offsets), std::move(neighbors));
}

std::size_t Graph::num_undirected_edges() const {
  std::size_t loops = 0;
  for (auto e : self_edge_)
    if (e != kNoEdge) ++loops;
  return (neighbors_.size() - loops) / 2;
}

std::span<const NodeId> Graph::neighborhood(NodeId v) const {
  if (v >= num_nodes())
    throw std::out_of_range("node " + std::to_string(v) + " outside graph of " +
                            std::to_string(num_nodes()) + " nodes");
  return std::span(neighbors_).subspan(offsets_[v], offsets_[v + 1] - offsets_[v]);
}

std::vector<std::pair<NodeId, NodeId>> Graph::edge_pairs() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (NodeId v = 0; v < num_nodes(); ++v)
    for (EdgeId e = offsets_[v]; e < offsets_[v + 1]; ++e)
      if (neighbors_[e] >= v) out.emplace_back(v, neighbors_[e]);
  return out;
}

void Graph::validate() const {
  const std::size_t n = num_nodes();
  if (offsets_.empty() || offsets_.front() != 0 || offsets_.back() != neighbors_.size())
    throw std::logic_error("graph: offsets do not bracket the neighbor array");
  for (NodeId v = 0; v < n; ++v) {
    if (offsets_[v] > offsets_[v + 1]) throw std::logic_error("graph: offsets decrease");
    for (EdgeId e = offsets_[v]; e < offsets_[v + 1]; ++e) {
      if (neighbors_[e] >= n) throw std::logic_error("graph: neighbor out of range");
      if (e > offsets_[v] && neighbors_[e - 1] >= neighbors_[e])
        throw std::logic_error("graph: row not strictly ascending");
      if (reverse_[e] == kNoEdge) throw std::logic_error("graph: asymmetric edge");
    }
  }
  bool all_loops = n > 0;
  for (NodeId v = 0; v < n; ++v) all_loops = all_loops && self_edge_[v] != kNoEdge;
  if (all_loops != has_self_loops_) throw std::logic_error("graph: stale self-loop flag");
}

Graph add_self_loops(const Graph& g) {
  if (g.has_self_loops()) return g;
  auto pairs = g.edge_pairs();
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    if (g.self_edge(v) == kNoEdge) pairs.emplace_back(v, v);
  return Graph::from_edges(g.num_nodes(), pairs);
}

Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("erdos_renyi: edge probability must lie in [0, 1]");
  if (n == 0) throw std::invalid_argument("erdos_renyi: need at least one node");
  Rng rng(seed);
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (rng.uniform() < p) pairs.emplace_back(u, v);
  return Graph::from_edges(n, pairs);
}

void write_edge_list(std::ostream& out, const Graph& g) {
  out << "nodes " << g.num_nodes() << '\n';
  for (auto [u, v] : g.edge_pairs()) out << u << ' ' << v << '\n';
}

Graph read_edge_list(std::istream& in) {
  std::string line;
  std::size_t n = 0;
  bool have_header = false;
  std::vector<std::pair<NodeId, NodeId>> pairs;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (!have_header) {
      std::string word;
      if (!(ls >> word >> n) || word != "nodes")
        throw std::runtime_error("edge list: expected 'nodes <n>' header on line " +
                                 std::to_string(line_no));
      have_header = true;
      continue;
    }
    long long u = -1, v = -1;
    if (!(ls >> u >> v) || u < 0 || v < 0)
      throw std::runtime_error("edge list: malformed pair on line " + std::to_string(line_no));
    pairs.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  }
  if (!have_header) throw std::runtime_error("edge list: missing 'nodes <n>' header");
  return Graph::from_edges(n, pairs);
}

void write_edge_list(const std::filesystem::path& path, const Graph& g) {
  std::ostringstream ss;
  write_edge_list(ss, g);
  io::write_file_atomic(path, ss.str());
}

Graph read_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list " + path.string());
  return read_edge_list(in);
}

}  // namespace gatelab
