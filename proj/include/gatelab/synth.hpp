#pragma once

// Synthetic node-classification tasks.
//
// Self-sufficient: labels uniform at random, features one-hot of the label.
// Every node can be classified from its own features alone, so the ideal
// network aggregates nothing (alpha_vv = 1).
//
// Neighbor-dependent: Gaussian features are pushed through a random k-layer
// GAT on the graph *without* self-loops and the outputs are clustered. A
// node's label then depends on its k-hop neighbors' features.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gatelab/dataset.hpp"
#include "gatelab/graph.hpp"
#include "gatelab/tensor.hpp"

namespace gatelab {

/// Random permutation cut into ceil(n/2) train, floor(n/4) val and the rest
/// test. Throws std::invalid_argument for n < 4.
Split split_2_1_1(std::size_t n, std::uint64_t seed);

/// Labels uniform over C, one-hot features, 2:1:1 split, self-loops added to
/// `g`. Throws std::invalid_argument for C < 2.
Dataset gen_self_sufficient(const Graph& g, std::size_t C, std::uint64_t seed);

enum class LabelMode { original, randomized };

struct StructureRecipe {
  std::filesystem::path edge_list;
  LabelMode mode = LabelMode::randomized;
  /// labels.csv ("node,label"); required in original mode.
  std::optional<std::filesystem::path> labels;
  /// masks.csv ("node,train,val,test"); a random 2:1:1 split otherwise.
  std::optional<std::filesystem::path> masks;
  /// Class count in randomized mode.
  std::size_t classes = 7;
  std::uint64_t seed = 0;
};

/// Self-sufficient task on a given graph structure. Throws
/// std::invalid_argument when original mode has no label file.
Dataset gen_self_sufficient_on_structure(const StructureRecipe& recipe);

struct NeighborDependentRecipe {
  std::size_t n = 1000;
  double p = 0.01;
  std::size_t d = 2;
  std::size_t k = 1;
  std::size_t C = 2;
  std::uint64_t graph_seed = 0;
  std::uint64_t feature_seed = 1;
  std::uint64_t network_seed = 2;
  std::uint64_t kmeans_seed = 3;
  std::uint64_t split_seed = 4;
  /// Cluster the last labeling layer after (true) or before its LeakyReLU.
  bool post_activation = true;

  /// Every stream derived from one seed.
  static NeighborDependentRecipe from_seed(std::uint64_t seed);
  void validate() const;
};

/// Parameters of the random labeling GAT: k unshared GAT layers of width d,
/// Xavier-uniform everywhere, LeakyReLU(0.2) for scores and outputs.
struct LabelingNetwork {
  struct Layer {
    Tensor W_s, W_t, a;
  };
  std::vector<Layer> layers;

  static LabelingNetwork random(std::size_t d, std::size_t k, std::uint64_t seed);
  /// Output of the last layer on `g` (which must not carry self-loops),
  /// optionally without its final LeakyReLU. Nodes without neighbors get a
  /// zero row.
  Tensor embed(const Graph& g, const Tensor& features, bool post_activation = true) const;
};

/// Full generator. Isolated nodes are left out of clustering, assigned to
/// the centroid nearest the origin, and listed in provenance. If any cluster
/// holds fewer than 1% of nodes K-means is retried with seed + 1, up to 10
/// times. The returned graph has self-loops added.
Dataset gen_neighbor_dependent(const NeighborDependentRecipe& recipe);

}  // namespace gatelab
