#include "gatelab/dataset.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>
#include <string>

#include "gatelab/io.hpp"

namespace gatelab {

void Dataset::validate() const {
  const std::size_t n = graph.num_nodes();
  auto fail = [](const std::string& what) { throw std::invalid_argument("dataset: " + what); };
  if (static_cast<std::size_t>(features.rows()) != n) fail("features need one row per node");
  if (labels.size() != n) fail("labels need one entry per node");
  if (num_classes == 0) fail("num_classes must be positive");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) fail("label out of range");
  if (!features.allFinite()) fail("non-finite feature");
  if (split.train.size() != n || split.val.size() != n || split.test.size() != n)
    fail("masks need one entry per node");
  for (std::size_t v = 0; v < n; ++v)
    if (split.train[v] + split.val[v] + split.test[v] > 1) fail("masks overlap");
}

namespace {

double parse_double(const std::string& s, const std::string& where) {
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::runtime_error(where + ": bad number '" + s + "'");
  return x;
}

long parse_int(const std::string& s, const std::string& where) {
  long x = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::runtime_error(where + ": bad integer '" + s + "'");
  return x;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  data.validate();
  write_edge_list(dir / "graph.edges", data.graph);

  std::string features;
  for (Eigen::Index j = 0; j < data.features.cols(); ++j)
    features += (j ? ",f" : "f") + std::to_string(j);
  features += '\n';
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      if (j) features += ',';
      features += io::format_double(data.features(i, j));
    }
    features += '\n';
  }
  io::write_file_atomic(dir / "features.csv", features);

  std::string labels = "node,label\n";
  for (std::size_t v = 0; v < data.labels.size(); ++v)
    labels += std::to_string(v) + ',' + std::to_string(data.labels[v]) + '\n';
  io::write_file_atomic(dir / "labels.csv", labels);

  std::string masks = "node,train,val,test\n";
  for (std::size_t v = 0; v < data.labels.size(); ++v)
    masks += std::to_string(v) + ',' + std::to_string(int(data.split.train[v])) + ',' +
             std::to_string(int(data.split.val[v])) + ',' + std::to_string(int(data.split.test[v])) +
             '\n';
  io::write_file_atomic(dir / "masks.csv", masks);

  nlohmann::json prov = data.provenance;
  prov["num_classes"] = data.num_classes;
  io::write_file_atomic(dir / "provenance.json", prov.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset data;
  data.graph = read_edge_list(dir / "graph.edges");
  const std::size_t n = data.graph.num_nodes();

  const auto feat = io::read_csv(dir / "features.csv");
  if (feat.rows.size() != n) throw std::runtime_error("features.csv: expected one row per node");
  data.features = Tensor(n, feat.header.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (feat.rows[i].size() != feat.header.size())
      throw std::runtime_error("features.csv: ragged row " + std::to_string(i + 2));
    for (std::size_t j = 0; j < feat.header.size(); ++j)
      data.features(i, j) = parse_double(feat.rows[i][j], "features.csv");
  }

  const auto lab = io::read_csv(dir / "labels.csv");
  const auto node_col = lab.column("node"), label_col = lab.column("label");
  data.labels.assign(n, 0);
  for (const auto& row : lab.rows) {
    const long v = parse_int(row.at(node_col), "labels.csv");
    if (v < 0 || static_cast<std::size_t>(v) >= n) throw std::runtime_error("labels.csv: node out of range");
    data.labels[v] = static_cast<int>(parse_int(row.at(label_col), "labels.csv"));
  }

  const auto masks = io::read_csv(dir / "masks.csv");
  data.split.train.assign(n, 0);
  data.split.val.assign(n, 0);
  data.split.test.assign(n, 0);
  const auto mn = masks.column("node"), mt = masks.column("train"), mv = masks.column("val"),
             ms = masks.column("test");
  for (const auto& row : masks.rows) {
    const long v = parse_int(row.at(mn), "masks.csv");
    if (v < 0 || static_cast<std::size_t>(v) >= n) throw std::runtime_error("masks.csv: node out of range");
    data.split.train[v] = parse_int(row.at(mt), "masks.csv") != 0;
    data.split.val[v] = parse_int(row.at(mv), "masks.csv") != 0;
    data.split.test[v] = parse_int(row.at(ms), "masks.csv") != 0;
  }

  data.provenance = nlohmann::json::parse(io::read_file(dir / "provenance.json"));
  data.num_classes = data.provenance.at("num_classes").get<std::size_t>();
  data.validate();
  return data;
}

}  // namespace gatelab
