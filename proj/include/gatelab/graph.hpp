#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace gatelab {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

inline constexpr EdgeId kNoEdge = static_cast<EdgeId>(-1);

/// Undirected graph in CSR form with both directions materialized.
///
/// Row `v` lists N(v) in ascending order. A CSR entry `e` in row `v` with
/// column `u` is the directed edge u -> v: `source(e) == u`, `target(e) == v`.
/// Attention layers normalize over rows, so per-edge tensors of length
/// `num_edges()` are laid out in this order throughout the library.
///
/// Immutable after construction.
class Graph {
 public:
  Graph() = default;

  /// Builds from undirected pairs. Duplicates (in either orientation) are
  /// merged; `(v, v)` pairs become explicit self-loops.
  static Graph from_edges(std::size_t num_nodes,
                          std::span<const std::pair<NodeId, NodeId>> edges);

  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  /// Directed CSR entries, self-loops included.
  std::size_t num_edges() const { return neighbors_.size(); }
  /// Undirected non-self-loop edges.
  std::size_t num_undirected_edges() const;

  std::span<const EdgeId> offsets() const { return offsets_; }
  std::span<const NodeId> neighbors() const { return neighbors_; }
  /// Row id of every CSR entry.
  std::span<const NodeId> targets() const { return targets_; }
  /// For entry u -> v, the entry v -> u.
  std::span<const EdgeId> reverse() const { return reverse_; }
  /// CSR entry of v -> v, or kNoEdge.
  EdgeId self_edge(NodeId v) const { return self_edge_[v]; }

  NodeId source(EdgeId e) const { return neighbors_[e]; }
  NodeId target(EdgeId e) const { return targets_[e]; }
  bool is_self_loop(EdgeId e) const { return neighbors_[e] == targets_[e]; }

  /// True when every node carries a self-loop.
  bool has_self_loops() const { return has_self_loops_; }

  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }

  /// Sorted N(v). Throws std::out_of_range for v >= num_nodes().
  std::span<const NodeId> neighborhood(NodeId v) const;

  /// Undirected edge pairs (u <= v), self-loops included, in CSR order.
  std::vector<std::pair<NodeId, NodeId>> edge_pairs() const;

  /// Checks the CSR invariants (monotone offsets, sorted unique rows, range,
  /// symmetry, self-loop flag). Throws std::logic_error on violation.
  void validate() const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.offsets_ == b.offsets_ && a.neighbors_ == b.neighbors_ &&
           a.has_self_loops_ == b.has_self_loops_;
  }

 private:
  Graph(std::vector<EdgeId> offsets, std::vector<NodeId> neighbors);

  std::vector<EdgeId> offsets_;
  std::vector<NodeId> neighbors_;
  std::vector<NodeId> targets_;
  std::vector<EdgeId> reverse_;
  std::vector<EdgeId> self_edge_;
  bool has_self_loops_ = false;
};

/// Adds (v, v) to every row that lacks it. Idempotent.
Graph add_self_loops(const Graph& g);

/// G(n, p): every unordered pair u != v independently with probability p.
/// No self-loops. Throws std::invalid_argument for p outside [0, 1] or n == 0.
Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed);

/// Edge-list text format:
///   nodes <n>
///   u v
///   ...
/// 0-indexed, undirected, each pair once, self-loops written explicitly.
void write_edge_list(std::ostream& out, const Graph& g);
Graph read_edge_list(std::istream& in);
void write_edge_list(const std::filesystem::path& path, const Graph& g);
Graph read_edge_list(const std::filesystem::path& path);

}  // namespace gatelab
