#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gatelab/io.hpp"

namespace gatelab::svg {

/// Heatmap of one layer's alpha_vv histogram rows (epoch, layer, bin_lo,
/// bin_hi, count): x = traced epoch, y = bin (1.0 at the top), darker = more
/// nodes. nullopt when the layer has no traced epoch.
std::optional<std::string> alpha_heatmap(const io::CsvTable& hist, std::size_t layer);

/// Line plot of the named metrics.csv columns against epoch. nullopt when
/// the table has no rows.
std::optional<std::string> line_plot(const io::CsvTable& metrics,
                                     const std::vector<std::string>& columns,
                                     const std::string& title, double y_min, double y_max);

struct RenderResult {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
};

/// Renders alpha_layer<l>.svg for every layer in alpha_hist.csv plus
/// loss.svg and accuracy.svg from metrics.csv. Missing or empty inputs are
/// skipped with a warning. Output depends only on the CSV contents.
RenderResult render_run(const std::filesystem::path& run_dir);

}  // namespace gatelab::svg
