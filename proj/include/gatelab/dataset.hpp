#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"

#include "gatelab/graph.hpp"
#include "gatelab/tensor.hpp"

namespace gatelab {

struct Split {
  std::vector<std::uint8_t> train;
  std::vector<std::uint8_t> val;
  std::vector<std::uint8_t> test;
};

/// Node-classification instance. `graph` is what the trained network sees
/// (self-loops included for the synthetic generators).
struct Dataset {
  Graph graph;
  Tensor features;  // n x d
  std::vector<int> labels;
  std::size_t num_classes = 0;
  Split split;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t num_nodes() const { return graph.num_nodes(); }
  /// Shapes, label range, finite features, disjoint masks. Throws
  /// std::invalid_argument describing the first violation.
  void validate() const;
};

/// Directory layout: graph.edges, features.csv, labels.csv, masks.csv,
/// provenance.json. Every file is written atomically.
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace gatelab
