#include "gatelab/synth.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "gatelab/init.hpp"
#include "gatelab/io.hpp"
#include "gatelab/kernels.hpp"
#include "gatelab/kmeans.hpp"
#include "gatelab/rng.hpp"

namespace gatelab {

namespace {

enum SeedTag : std::uint64_t {
  kLabels = 0x51,
  kSplit = 0x52,
  kGraph = 0x53,
  kFeatures = 0x54,
  kNetwork = 0x55,
  kKmeans = 0x56,
};

constexpr double kScoreSlope = 0.2;

Tensor one_hot(const std::vector<int>& labels, std::size_t C) {
  Tensor out = Tensor::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(C));
  for (std::size_t v = 0; v < labels.size(); ++v) out(v, labels[v]) = 1.0;
  return out;
}

std::vector<int> uniform_labels(std::size_t n, std::size_t C, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> labels(n);
  for (auto& y : labels) y = static_cast<int>(rng.below(C));
  return labels;
}

}  // namespace

Split split_2_1_1(std::size_t n, std::uint64_t seed) {
  if (n < 4) throw std::invalid_argument("split_2_1_1: need at least 4 nodes");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t n_train = (n + 1) / 2, n_val = n / 4;
  Split s;
  s.train.assign(n, 0);
  s.val.assign(n, 0);
  s.test.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) s.train[perm[i]] = 1;
    else if (i < n_train + n_val) s.val[perm[i]] = 1;
    else s.test[perm[i]] = 1;
  }
  return s;
}

Dataset gen_self_sufficient(const Graph& g, std::size_t C, std::uint64_t seed) {
  if (C < 2) throw std::invalid_argument("gen_self_sufficient: need at least 2 classes");
  Dataset data;
  data.graph = add_self_loops(g);
  data.num_classes = C;
  data.labels = uniform_labels(g.num_nodes(), C, derive_seed(seed, kLabels));
  data.features = one_hot(data.labels, C);
  data.split = split_2_1_1(g.num_nodes(), derive_seed(seed, kSplit));
  data.provenance = {{"kind", "self_sufficient"},
                     {"classes", C},
                     {"seed", seed},
                     {"features", "one_hot_label"},
                     {"split", "random_2_1_1"}};
  return data;
}

Dataset gen_self_sufficient_on_structure(const StructureRecipe& recipe) {
  const Graph raw = read_edge_list(recipe.edge_list);
  const std::size_t n = raw.num_nodes();
  Dataset data;
  data.graph = add_self_loops(raw);

  if (recipe.mode == LabelMode::original) {
    if (!recipe.labels)
      throw std::invalid_argument("original label mode needs a label file");
    const auto table = io::read_csv(*recipe.labels);
    const auto nc = table.column("node"), lc = table.column("label");
    data.labels.assign(n, -1);
    for (const auto& row : table.rows) {
      const auto v = std::stoul(row.at(nc));
      if (v >= n) throw std::runtime_error("label file: node " + row.at(nc) + " out of range");
      data.labels[v] = std::stoi(row.at(lc));
    }
    int max_label = -1;
    for (int y : data.labels) {
      if (y < 0) throw std::runtime_error("label file does not cover every node");
      max_label = std::max(max_label, y);
    }
    data.num_classes = static_cast<std::size_t>(max_label) + 1;
  } else {
    if (recipe.classes < 2) throw std::invalid_argument("randomized labels need at least 2 classes");
    data.num_classes = recipe.classes;
    data.labels = uniform_labels(n, recipe.classes, derive_seed(recipe.seed, kLabels));
  }
  data.features = one_hot(data.labels, data.num_classes);

  if (recipe.masks) {
    const auto table = io::read_csv(*recipe.masks);
    const auto nc = table.column("node"), tc = table.column("train"), vc = table.column("val"),
               sc = table.column("test");
    data.split.train.assign(n, 0);
    data.split.val.assign(n, 0);
    data.split.test.assign(n, 0);
    for (const auto& row : table.rows) {
      const auto v = std::stoul(row.at(nc));
      if (v >= n) throw std::runtime_error("mask file: node out of range");
      data.split.train[v] = row.at(tc) != "0";
      data.split.val[v] = row.at(vc) != "0";
      data.split.test[v] = row.at(sc) != "0";
    }
  } else {
    data.split = split_2_1_1(n, derive_seed(recipe.seed, kSplit));
  }
  data.provenance = {{"kind", "self_sufficient_on_structure"},
                     {"edge_list", recipe.edge_list.string()},
                     {"labels", recipe.mode == LabelMode::original ? "original" : "randomized"},
                     {"classes", data.num_classes},
                     {"seed", recipe.seed},
                     {"features", "one_hot_label"},
                     {"split", recipe.masks ? "file" : "random_2_1_1"}};
  data.validate();
  return data;
}

NeighborDependentRecipe NeighborDependentRecipe::from_seed(std::uint64_t seed) {
  NeighborDependentRecipe r;
  r.graph_seed = derive_seed(seed, kGraph);
  r.feature_seed = derive_seed(seed, kFeatures);
  r.network_seed = derive_seed(seed, kNetwork);
  r.kmeans_seed = derive_seed(seed, kKmeans);
  r.split_seed = derive_seed(seed, kSplit);
  return r;
}

void NeighborDependentRecipe::validate() const {
  if (n < 4) throw std::invalid_argument("neighbor-dependent recipe: n must be at least 4");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("neighbor-dependent recipe: p outside [0, 1]");
  if (d == 0) throw std::invalid_argument("neighbor-dependent recipe: d must be positive");
  if (k == 0) throw std::invalid_argument("neighbor-dependent recipe: k must be positive");
  if (C < 2 || C > n) throw std::invalid_argument("neighbor-dependent recipe: C must lie in [2, n]");
}

LabelingNetwork LabelingNetwork::random(std::size_t d, std::size_t k, std::uint64_t seed) {
  LabelingNetwork net;
  for (std::size_t l = 0; l < k; ++l) {
    const std::uint64_t s = derive_seed(seed, l);
    net.layers.push_back({xavier_uniform(d, d, derive_seed(s, 0)), xavier_uniform(d, d, derive_seed(s, 1)),
                          xavier_uniform(d, 1, derive_seed(s, 2))});
  }
  return net;
}

Tensor LabelingNetwork::embed(const Graph& g, const Tensor& features, bool post_activation) const {
  if (g.num_edges() > 0)
    for (NodeId v = 0; v < g.num_nodes(); ++v)
      if (g.self_edge(v) != kNoEdge)
        throw std::invalid_argument("labeling network expects a graph without self-loops");
  Tensor h = features;
  std::vector<double> scores(g.num_edges()), alpha(g.num_edges());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const Tensor s = h * layer.W_s.transpose();
    const Tensor t = h * layer.W_t.transpose();
    kernels::serial::edge_scores(g, s, t, layer.a, layer.a, kScoreSlope, scores);
    kernels::serial::segment_softmax(g, scores, alpha);
    Tensor agg;
    kernels::serial::aggregate(g, s, alpha, agg);
    if (!post_activation && l + 1 == layers.size()) {
      h = std::move(agg);
    } else {
      h = agg.unaryExpr([](double x) { return kernels::leaky(x, kScoreSlope); });
    }
  }
  return h;
}

Dataset gen_neighbor_dependent(const NeighborDependentRecipe& r) {
  r.validate();
  const Graph g = erdos_renyi(r.n, r.p, r.graph_seed);

  Tensor features(r.n, r.d);
  Rng frng(r.feature_seed);
  for (Eigen::Index i = 0; i < features.size(); ++i) features(i) = frng.normal();

  const auto net = LabelingNetwork::random(r.d, r.k, r.network_seed);
  const Tensor emb = net.embed(g, features, r.post_activation);

  std::vector<NodeId> connected, isolated;
  for (NodeId v = 0; v < r.n; ++v) (g.degree(v) > 0 ? connected : isolated).push_back(v);
  if (connected.size() < r.C)
    throw std::runtime_error("neighbor-dependent generator: fewer connected nodes than clusters");
  Tensor points(connected.size(), r.d);
  for (std::size_t i = 0; i < connected.size(); ++i) points.row(i) = emb.row(connected[i]);

  const std::size_t min_cluster = (r.n + 99) / 100;
  KMeansResult km;
  std::vector<int> labels(r.n, 0);
  std::uint64_t kseed = r.kmeans_seed;
  std::size_t attempts = 0;
  bool balanced = false;
  for (; attempts < 11 && !balanced; ++attempts, ++kseed) {
    km = kmeans(points, r.C, kseed);
    for (std::size_t i = 0; i < connected.size(); ++i) labels[connected[i]] = km.labels[i];
    const Eigen::RowVectorXd origin = Eigen::RowVectorXd::Zero(r.d);
    for (NodeId v : isolated) labels[v] = nearest_centroid(km.centroids, origin);
    std::vector<std::size_t> counts(r.C, 0);
    for (int y : labels) ++counts[y];
    balanced = *std::min_element(counts.begin(), counts.end()) >= min_cluster;
  }
  --kseed;

  Dataset data;
  data.graph = add_self_loops(g);
  data.features = std::move(features);
  data.labels = std::move(labels);
  data.num_classes = r.C;
  data.split = split_2_1_1(r.n, r.split_seed);
  data.provenance = {{"kind", "neighbor_dependent"},
                     {"n", r.n},
                     {"p", r.p},
                     {"d", r.d},
                     {"k", r.k},
                     {"classes", r.C},
                     {"graph_seed", r.graph_seed},
                     {"feature_seed", r.feature_seed},
                     {"network_seed", r.network_seed},
                     {"kmeans_seed", kseed},
                     {"kmeans_attempts", attempts},
                     {"kmeans_balanced", balanced},
                     {"split_seed", r.split_seed},
                     {"embedding", r.post_activation ? "post_activation" : "pre_activation"},
                     {"labeling_network", "gat_unshared_xavier_leaky0.2"},
                     {"isolated_nodes", isolated}};
  return data;
}

}  // namespace gatelab
