#include "gatelab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "gatelab/diagnostics.hpp"
#include "gatelab/io.hpp"
#include "gatelab/svg.hpp"
#include "gatelab/synth.hpp"

namespace gatelab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Parsed files yield unsigned integers; documents built in code yield signed ones.
bool is_non_negative_integer(const json& j) {
  return j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0);
}

std::string join_problems(const std::vector<std::string>& problems) {
  std::string s = "invalid experiment config:";
  for (const auto& p : problems) s += "\n  " + p;
  return s;
}

// Collects "path: message" problems while reading a JSON document.
class Reader {
 public:
  std::vector<std::string> problems;

  void fail(const std::string& path, const std::string& msg) { problems.push_back(path + ": " + msg); }

  const json* object(const json& parent, const std::string& key, const std::string& path,
                     bool required) {
    if (!parent.contains(key)) {
      if (required) fail(path, "missing");
      return nullptr;
    }
    const json& j = parent.at(key);
    if (!j.is_object()) {
      fail(path, "expected an object");
      return nullptr;
    }
    return &j;
  }

  void known_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : obj.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* name) { return k == name; }))
        fail(path.empty() ? k : path + "." + k, "unknown field");
    }
  }

  double number(const json& obj, const std::string& key, const std::string& path, double fallback,
                double lo, double hi) {
    if (!obj.contains(key)) return fallback;
    const json& j = obj.at(key);
    if (!j.is_number()) {
      fail(path, "expected a number");
      return fallback;
    }
    const double x = j.get<double>();
    if (!(x >= lo && x <= hi)) {
      std::ostringstream ss;
      ss << "must lie in [" << lo << ", " << hi << "]";
      fail(path, ss.str());
      return fallback;
    }
    return x;
  }

  std::uint64_t count(const json& obj, const std::string& key, const std::string& path,
                      std::uint64_t fallback, std::uint64_t lo = 0, bool required = false) {
    if (!obj.contains(key)) {
      if (required) fail(path, "missing");
      return fallback;
    }
    const json& j = obj.at(key);
    if (!is_non_negative_integer(j)) {
      fail(path, "expected a non-negative integer");
      return fallback;
    }
    const auto x = j.get<std::uint64_t>();
    if (x < lo) {
      fail(path, "must be at least " + std::to_string(lo));
      return fallback;
    }
    return x;
  }

  std::string string(const json& obj, const std::string& key, const std::string& path,
                     const std::string& fallback, bool required = false) {
    if (!obj.contains(key)) {
      if (required) fail(path, "missing");
      return fallback;
    }
    const json& j = obj.at(key);
    if (!j.is_string()) {
      fail(path, "expected a string");
      return fallback;
    }
    return j.get<std::string>();
  }

  template <typename F>
  auto list(const json& obj, const std::string& key, const std::string& path, F&& each)
      -> std::vector<decltype(each(json(), std::string()))> {
    std::vector<decltype(each(json(), std::string()))> out;
    if (!obj.contains(key)) {
      fail(path, "missing");
      return out;
    }
    const json& arr = obj.at(key);
    if (!arr.is_array() || arr.empty()) {
      fail(path, "expected a non-empty array");
      return out;
    }
    for (std::size_t i = 0; i < arr.size(); ++i)
      out.push_back(each(arr[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }
};

void read_dataset_block(Reader& r, const json& ds) {
  const std::string kind = r.string(ds, "kind", "dataset.kind", "", true);
  if (kind == "self_sufficient_er") {
    r.known_keys(ds, "dataset", {"kind", "n", "p", "classes", "seed"});
    r.count(ds, "n", "dataset.n", 1000, 4);
    r.number(ds, "p", "dataset.p", 0.01, 0.0, 1.0);
    r.count(ds, "classes", "dataset.classes", 8, 2);
    r.count(ds, "seed", "dataset.seed", 0);
  } else if (kind == "neighbor_dependent") {
    r.known_keys(ds, "dataset", {"kind", "n", "p", "d", "k", "classes", "embedding", "seed"});
    const auto n = r.count(ds, "n", "dataset.n", 1000, 4);
    r.number(ds, "p", "dataset.p", 0.01, 0.0, 1.0);
    r.count(ds, "d", "dataset.d", 2, 1);
    r.count(ds, "k", "dataset.k", 1, 1);
    const auto emb = r.string(ds, "embedding", "dataset.embedding", "post_activation");
    if (emb != "post_activation" && emb != "pre_activation")
      r.fail("dataset.embedding", "expected \"post_activation\" or \"pre_activation\"");
    const auto c = r.count(ds, "classes", "dataset.classes", 2, 2);
    if (c > n) r.fail("dataset.classes", "exceeds dataset.n");
    r.count(ds, "seed", "dataset.seed", 0);
  } else if (kind == "self_sufficient_structure") {
    r.known_keys(ds, "dataset", {"kind", "edge_list", "labels_mode", "labels", "masks", "classes", "seed"});
    r.string(ds, "edge_list", "dataset.edge_list", "", true);
    const auto mode = r.string(ds, "labels_mode", "dataset.labels_mode", "randomized");
    if (mode != "randomized" && mode != "original")
      r.fail("dataset.labels_mode", "expected \"randomized\" or \"original\"");
    if (mode == "original" && !ds.contains("labels"))
      r.fail("dataset.labels", "required when labels_mode is \"original\"");
    r.string(ds, "labels", "dataset.labels", "");
    r.string(ds, "masks", "dataset.masks", "");
    r.count(ds, "classes", "dataset.classes", 7, 2);
    r.count(ds, "seed", "dataset.seed", 0);
  } else if (kind == "files") {
    r.known_keys(ds, "dataset", {"kind", "dir"});
    r.string(ds, "dir", "dataset.dir", "", true);
  } else if (!kind.empty()) {
    r.fail("dataset.kind",
           "unknown kind \"" + kind +
               "\" (expected self_sufficient_er, neighbor_dependent, self_sufficient_structure or files)");
  }
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fd(double x) { return io::format_double(x); }

std::string csv_line(std::initializer_list<std::string> cells) {
  std::string s;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) s += ',';
    s += c;
    first = false;
  }
  return s + '\n';
}

constexpr const char* kSummaryHeader =
    "architecture,depth,seed,layers,epochs_run,min_train_loss_epoch,min_train_loss,"
    "test_acc_at_min_train_loss,max_val_acc_epoch,max_val_acc,test_acc_at_max_val_acc,"
    "max_train_acc_epoch,max_train_acc,test_acc_at_max_train_acc,final_train_acc,final_test_acc,"
    "final_alpha_vv_median,max_conservation_residual,edge_homophily,failed\n";

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

ExperimentConfig parse_config(const json& doc) {
  Reader r;
  ExperimentConfig cfg;
  cfg.source = doc;
  if (!doc.is_object()) throw ConfigError({"(root): expected a JSON object"});
  r.known_keys(doc, "", {"name", "dataset", "model", "training", "sweep", "output_dir"});
  cfg.name = r.string(doc, "name", "name", "experiment");

  if (const json* ds = r.object(doc, "dataset", "dataset", true)) {
    read_dataset_block(r, *ds);
    cfg.dataset = *ds;
  }

  if (const json* model = r.object(doc, "model", "model", false)) {
    r.known_keys(*model, "model", {"width", "bias", "init", "layers"});
    cfg.width = r.count(*model, "width", "model.width", 64, 1);
    if (model->contains("bias")) {
      if ((*model)["bias"].is_boolean())
        cfg.bias = (*model)["bias"].get<bool>();
      else
        r.fail("model.bias", "expected true or false");
    }
    if (const json* init = r.object(*model, "init", "model.init", false)) {
      r.known_keys(*init, "model.init", {"matrix", "attention"});
      try {
        cfg.matrix_scheme = parse_matrix_scheme(r.string(*init, "matrix", "model.init.matrix",
                                                         "looks_linear_orthogonal"));
      } catch (const std::invalid_argument& e) {
        r.fail("model.init.matrix", e.what());
      }
      try {
        cfg.attention_scheme =
            parse_attention_scheme(r.string(*init, "attention", "model.init.attention", "standard"));
      } catch (const std::invalid_argument& e) {
        r.fail("model.init.attention", e.what());
      }
    }
    if (model->contains("layers")) {
      try {
        network_from_json(*model, 1).validate();
        cfg.layers = *model;
      } catch (const std::exception& e) {
        r.problems.push_back("model." + std::string(e.what()));
      }
    }
  }

  if (const json* tr = r.object(doc, "training", "training", false)) {
    r.known_keys(*tr, "training",
                 {"learning_rate", "max_epochs", "eval_every", "trace_alpha_every",
                  "conservation_check_every", "relative_change_every", "beta1", "beta2", "epsilon"});
    auto& t = cfg.training;
    t.learning_rate = r.number(*tr, "learning_rate", "training.learning_rate", t.learning_rate, 0.0, 1e3);
    t.max_epochs = r.count(*tr, "max_epochs", "training.max_epochs", t.max_epochs);
    t.eval_every = r.count(*tr, "eval_every", "training.eval_every", t.eval_every, 1);
    t.trace_alpha_every = r.count(*tr, "trace_alpha_every", "training.trace_alpha_every", t.trace_alpha_every);
    t.conservation_check_every = r.count(*tr, "conservation_check_every",
                                         "training.conservation_check_every", t.conservation_check_every);
    t.relative_change_every =
        r.count(*tr, "relative_change_every", "training.relative_change_every", t.relative_change_every);
    t.beta1 = r.number(*tr, "beta1", "training.beta1", t.beta1, 0.0, 0.999999999);
    t.beta2 = r.number(*tr, "beta2", "training.beta2", t.beta2, 0.0, 0.999999999);
    t.epsilon = r.number(*tr, "epsilon", "training.epsilon", t.epsilon, 1e-300, 1.0);
  }

  if (const json* sw = r.object(doc, "sweep", "sweep", true)) {
    r.known_keys(*sw, "sweep", {"architectures", "depths", "seeds"});
    cfg.architectures = r.list(*sw, "architectures", "sweep.architectures",
                               [&](const json& j, const std::string& path) {
                                 if (!j.is_string()) {
                                   r.fail(path, "expected a string");
                                   return std::string();
                                 }
                                 auto a = j.get<std::string>();
                                 if (a == "custom") {
                                   if (!cfg.layers) r.fail(path, "\"custom\" needs a valid model.layers");
                                 } else if (!is_known_architecture(a)) {
                                   r.fail(path, "unknown architecture \"" + a + "\"");
                                 }
                                 return a;
                               });
    const bool only_custom = !cfg.architectures.empty() &&
                             std::all_of(cfg.architectures.begin(), cfg.architectures.end(),
                                         [](const std::string& a) { return a == "custom"; });
    if (sw->contains("depths") || !only_custom) {
      cfg.depths = r.list(*sw, "depths", "sweep.depths", [&](const json& j, const std::string& path) {
        if (!is_non_negative_integer(j) || j.get<std::uint64_t>() == 0) {
          r.fail(path, "expected a positive integer");
          return std::size_t{0};
        }
        return j.get<std::size_t>();
      });
    }
    cfg.seeds = r.list(*sw, "seeds", "sweep.seeds", [&](const json& j, const std::string& path) {
      if (!is_non_negative_integer(j)) {
        r.fail(path, "expected a non-negative integer");
        return std::uint64_t{0};
      }
      return j.get<std::uint64_t>();
    });
    std::set<std::uint64_t> unique(cfg.seeds.begin(), cfg.seeds.end());
    if (unique.size() != cfg.seeds.size()) r.fail("sweep.seeds", "seeds must be distinct");
  }

  cfg.output_dir = r.string(doc, "output_dir", "output_dir", "", true);
  if (doc.contains("output_dir") && cfg.output_dir.empty()) r.fail("output_dir", "must not be empty");

  if (!r.problems.empty()) throw ConfigError(std::move(r.problems));
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError({"(root): " + std::string(e.what())});
  }
  // Dataset paths are relative to the config file.
  if (doc.is_object() && doc.contains("dataset") && doc["dataset"].is_object()) {
    for (const char* key : {"edge_list", "labels", "masks", "dir"}) {
      auto& ds = doc["dataset"];
      if (ds.contains(key) && ds[key].is_string()) {
        fs::path p = ds[key].get<std::string>();
        if (p.is_relative()) ds[key] = (path.parent_path() / p).lexically_normal().string();
      }
    }
  }
  return parse_config(doc);
}

fs::path resolve_output_dir(const ExperimentConfig& cfg) {
  if (cfg.output_dir.is_relative()) {
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / cfg.output_dir;
  }
  return cfg.output_dir;
}

std::vector<RunSpec> run_matrix(const ExperimentConfig& cfg) {
  std::vector<RunSpec> runs;
  for (const auto& arch : cfg.architectures) {
    std::vector<std::size_t> depths = cfg.depths;
    if (arch == "custom") depths = {cfg.layers->at("layers").size()};
    for (auto depth : depths)
      for (auto seed : cfg.seeds)
        runs.push_back({arch, depth, seed,
                        arch + "_L" + std::to_string(depth) + "_s" + std::to_string(seed)});
  }
  return runs;
}

std::string describe_run_matrix(const ExperimentConfig& cfg) {
  const auto runs = run_matrix(cfg);
  std::ostringstream ss;
  ss << cfg.name << ": " << runs.size() << " runs (" << cfg.architectures.size()
     << " architectures x " << cfg.depths.size() << " depths x " << cfg.seeds.size() << " seeds)\n";
  ss << "output: " << resolve_output_dir(cfg).string() << "\n";
  for (const auto& r : runs)
    ss << "  " << r.id << "  arch=" << r.architecture << " depth=" << r.depth << " seed=" << r.seed << "\n";
  return ss.str();
}

Dataset make_dataset(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  const json& ds = cfg.dataset;
  const std::string kind = ds.at("kind");
  const std::uint64_t seed = derive_seed(ds.value("seed", std::uint64_t{0}), run_seed);
  Dataset data;
  if (kind == "self_sufficient_er") {
    const std::size_t n = ds.value("n", std::size_t{1000});
    const double p = ds.value("p", 0.01);
    const std::uint64_t graph_seed = derive_seed(seed, 1);
    data = gen_self_sufficient(erdos_renyi(n, p, graph_seed), ds.value("classes", std::size_t{8}),
                               derive_seed(seed, 2));
    data.provenance["graph"] = {{"model", "erdos_renyi"}, {"n", n}, {"p", p}, {"seed", graph_seed}};
  } else if (kind == "neighbor_dependent") {
    auto recipe = NeighborDependentRecipe::from_seed(seed);
    recipe.n = ds.value("n", recipe.n);
    recipe.p = ds.value("p", recipe.p);
    recipe.d = ds.value("d", recipe.d);
    recipe.k = ds.value("k", recipe.k);
    recipe.C = ds.value("classes", recipe.C);
    recipe.post_activation = ds.value("embedding", std::string("post_activation")) != "pre_activation";
    data = gen_neighbor_dependent(recipe);
  } else if (kind == "self_sufficient_structure") {
    StructureRecipe recipe;
    recipe.edge_list = ds.at("edge_list").get<std::string>();
    recipe.mode = ds.value("labels_mode", std::string("randomized")) == "original" ? LabelMode::original
                                                                                 : LabelMode::randomized;
    if (ds.contains("labels")) recipe.labels = ds.at("labels").get<std::string>();
    if (ds.contains("masks")) recipe.masks = ds.at("masks").get<std::string>();
    recipe.classes = ds.value("classes", std::size_t{7});
    recipe.seed = seed;
    data = gen_self_sufficient_on_structure(recipe);
  } else if (kind == "files") {
    data = read_dataset(ds.at("dir").get<std::string>());
  } else {
    throw std::invalid_argument("unknown dataset kind " + kind);
  }
  data.provenance["run_seed"] = run_seed;
  return data;
}

NetworkSpec make_run_network(const ExperimentConfig& cfg, const RunSpec& run, std::size_t input_dim,
                             std::size_t classes) {
  if (run.architecture == "custom") {
    auto spec = network_from_json(*cfg.layers, input_dim);
    if (spec.output_dim() != classes)
      throw std::invalid_argument("model.layers: last width must equal the class count " +
                                  std::to_string(classes));
    return spec;
  }
  return make_network(run.architecture, run.depth, input_dim, cfg.width, classes, cfg.bias);
}

std::uint64_t init_seed(const RunSpec& run) {
  return derive_seed(derive_seed(run.seed, fnv1a(run.architecture)), run.depth);
}

Confidence report_confidence(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("report_confidence: no values");
  const double k = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= k;
  Confidence c{mean, std::nullopt};
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    c.half_width = 1.96 * std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
  }
  return c;
}

namespace {

void write_run_artifacts(const fs::path& dir, const RunSpec& run, const TrainTrace& trace,
                         const Dataset& data, const RunOutcome& outcome, std::size_t layers) {
  // metrics.csv and trace.jsonl
  std::string metrics = "epoch,loss,train_acc,val_acc,test_acc\n";
  std::map<std::size_t, std::vector<double>> medians;  // epoch -> per-layer median
  for (const auto& a : trace.alpha) medians[a.epoch].push_back(median(a.alpha_vv));
  std::string jsonl;
  for (const auto& m : trace.epochs) {
    metrics += csv_line({std::to_string(m.epoch), fd(m.loss), fd(m.train_acc), fd(m.val_acc), fd(m.test_acc)});
    json rec = {{"epoch", m.epoch}, {"loss", m.loss}, {"train_acc", m.train_acc},
                {"val_acc", m.val_acc}, {"test_acc", m.test_acc}};
    if (auto it = medians.find(m.epoch); it != medians.end()) rec["alpha_vv_median"] = it->second;
    jsonl += rec.dump() + '\n';
  }
  io::write_file_atomic(dir / "metrics.csv", metrics);
  io::write_file_atomic(dir / "trace.jsonl", jsonl);

  std::string hist = "epoch,layer,bin_lo,bin_hi,count\n";
  std::string alpha_summary = "epoch,layer,median,mean,min,max\n";
  for (const auto& a : trace.alpha) {
    const auto h = alpha_histogram(a.alpha_vv);
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      hist += csv_line({std::to_string(a.epoch), std::to_string(a.layer), fd(h.edges[b]), fd(h.edges[b + 1]),
                        std::to_string(h.counts[b])});
    double sum = 0.0;
    for (double x : a.alpha_vv) sum += x;
    const auto [lo, hi] = std::minmax_element(a.alpha_vv.begin(), a.alpha_vv.end());
    alpha_summary += csv_line({std::to_string(a.epoch), std::to_string(a.layer), fd(median(a.alpha_vv)),
                               fd(sum / static_cast<double>(a.alpha_vv.size())), fd(*lo), fd(*hi)});
  }
  io::write_file_atomic(dir / "alpha_hist.csv", hist);
  io::write_file_atomic(dir / "alpha_summary.csv", alpha_summary);

  std::string cons = "epoch,layer,unit,law,lhs,rhs,rel_residual\n";
  for (const auto& rec : trace.conservation)
    for (const auto& e : rec.report.entries)
      cons += csv_line({std::to_string(rec.epoch), std::to_string(e.layer), std::to_string(e.unit),
                        std::string(to_string(e.law)), fd(e.lhs), fd(e.rhs), fd(e.relative_residual())});
  io::write_file_atomic(dir / "conservation.csv", cons);

  std::string rel = "epoch,param,max_abs,mean_abs\n";
  for (const auto& rec : trace.relative_change)
    for (const auto& t : rec.tensors)
      rel += csv_line({std::to_string(rec.epoch), t.name, fd(t.max_abs), fd(t.mean_abs)});
  io::write_file_atomic(dir / "relative_change.csv", rel);

  std::string energy = "tag,mode,value\n";
  energy += csv_line({"input", "all_pairs", fd(outcome.energy_input_all)});
  energy += csv_line({"input", "adjacent_pairs", fd(outcome.energy_input_adjacent)});
  energy += csv_line({"final", "all_pairs", fd(outcome.energy_final_all)});
  energy += csv_line({"final", "adjacent_pairs", fd(outcome.energy_final_adjacent)});
  io::write_file_atomic(dir / "energy.csv", energy);

  const auto& s = trace.summary;
  std::string final_medians;
  if (!medians.empty()) {
    for (std::size_t l = 0; l < medians.rbegin()->second.size(); ++l)
      final_medians += (l ? ";" : "") + fd(medians.rbegin()->second[l]);
  }
  const auto homophily = edge_homophily(data.labels, data.graph);
  std::string summary = kSummaryHeader;
  summary += csv_line({run.architecture, std::to_string(run.depth), std::to_string(run.seed),
                       std::to_string(layers), std::to_string(s.epochs_run),
                       std::to_string(s.min_train_loss_epoch), fd(s.min_train_loss),
                       fd(s.test_acc_at_min_train_loss), std::to_string(s.max_val_acc_epoch),
                       fd(s.max_val_acc), fd(s.test_acc_at_max_val_acc), std::to_string(s.max_train_acc_epoch),
                       fd(s.max_train_acc), fd(s.test_acc_at_max_train_acc), fd(s.final.train_acc),
                       fd(s.final.test_acc), final_medians.empty() ? "n/a" : final_medians,
                       fd(s.max_conservation_residual), fd(homophily.value), s.failed ? "1" : "0"});
  io::write_file_atomic(dir / "summary.csv", summary);
}

}  // namespace

RunOutcome execute_run(const ExperimentConfig& cfg, const RunSpec& run, const Dataset& data,
                       const fs::path& dir, bool keep_result) {
  RunOutcome out;
  out.run = run;
  out.dir = dir;
  fs::create_directories(dir);
  const auto failed_marker = dir / "FAILED";
  std::error_code ec;
  fs::remove(failed_marker, ec);
  bool summarized = false;
  try {
    const auto spec = make_run_network(cfg, run, static_cast<std::size_t>(data.features.cols()),
                                       data.num_classes);
    io::write_file_atomic(dir / "network.json", to_json(spec).dump(2) + "\n");
    InitPolicy policy{cfg.matrix_scheme, cfg.attention_scheme, init_seed(run)};
    TrainResult result = train(spec, policy, data, cfg.training);

    const Tensor logits = evaluate_logits(spec, result.params, data.features, data.graph);
    out.energy_input_all = smoothness_energy(data.features, data.graph, PairMode::all_pairs);
    out.energy_input_adjacent = smoothness_energy(data.features, data.graph, PairMode::adjacent_pairs);
    out.energy_final_all = smoothness_energy(logits, data.graph, PairMode::all_pairs);
    out.energy_final_adjacent = smoothness_energy(logits, data.graph, PairMode::adjacent_pairs);

    write_run_artifacts(dir, run, result.trace, data, out, spec.layers.size());
    summarized = true;
    svg::render_run(dir);
    if (result.trace.summary.failed) {
      out.failed = true;
      out.error = result.trace.summary.failure;
    }
    if (keep_result) out.result = std::move(result);
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
  }
  if (out.failed && !summarized) {
    // Keeps the run visible in sweep_summary.csv.
    std::string row = run.architecture + ',' + std::to_string(run.depth) + ',' + std::to_string(run.seed);
    for (int i = 0; i < 16; ++i) row += ",n/a";
    io::write_file_atomic(dir / "summary.csv", std::string(kSummaryHeader) + row + ",1\n");
  }
  if (out.failed) io::write_file_atomic(failed_marker, out.error + "\n");
  return out;
}

std::string write_sweep_summary(const fs::path& sweep_dir) {
  struct Acc {
    std::vector<double> at_val, at_loss, max_train;
    std::size_t runs = 0, failed = 0;
  };
  std::map<std::pair<std::string, std::size_t>, Acc> groups;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(sweep_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "summary.csv")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    const auto t = io::read_csv(d / "summary.csv");
    for (const auto& row : t.rows) {
      auto& g = groups[{row.at(t.column("architecture")), std::stoul(row.at(t.column("depth")))}];
      ++g.runs;
      if (row.at(t.column("failed")) == "1" || fs::exists(d / "FAILED")) {
        ++g.failed;
        continue;
      }
      g.at_val.push_back(std::stod(row.at(t.column("test_acc_at_max_val_acc"))));
      g.at_loss.push_back(std::stod(row.at(t.column("test_acc_at_min_train_loss"))));
      g.max_train.push_back(std::stod(row.at(t.column("max_train_acc"))));
    }
  }
  auto cells = [](const std::vector<double>& v) -> std::pair<std::string, std::string> {
    if (v.empty()) return {"n/a", "n/a"};
    const auto c = report_confidence(v);
    return {fd(c.mean), c.half_width ? fd(*c.half_width) : "n/a"};
  };
  std::string out =
      "architecture,depth,runs,failed,test_acc_at_max_val_acc_mean,test_acc_at_max_val_acc_ci95,"
      "test_acc_at_min_train_loss_mean,test_acc_at_min_train_loss_ci95,max_train_acc_mean,"
      "max_train_acc_ci95\n";
  for (const auto& [key, g] : groups) {
    const auto [v_mean, v_ci] = cells(g.at_val);
    const auto [l_mean, l_ci] = cells(g.at_loss);
    const auto [t_mean, t_ci] = cells(g.max_train);
    out += csv_line({key.first, std::to_string(key.second), std::to_string(g.runs), std::to_string(g.failed),
                     v_mean, v_ci, l_mean, l_ci, t_mean, t_ci});
  }
  io::write_file_atomic(sweep_dir / "sweep_summary.csv", out);
  return out;
}

std::vector<RunOutcome> run_experiment(const ExperimentConfig& cfg, const SweepOptions& options) {
  const fs::path root = resolve_output_dir(cfg);
  fs::create_directories(root);
  io::write_file_atomic(root / "config.json", cfg.source.dump(2) + "\n");

  const auto runs = run_matrix(cfg);
  std::map<std::uint64_t, Dataset> datasets;
  for (auto seed : cfg.seeds) {
    Dataset data = make_dataset(cfg, seed);
    write_dataset(root / "datasets" / ("seed" + std::to_string(seed)), data);
    datasets.emplace(seed, std::move(data));
  }

  std::vector<RunOutcome> outcomes(runs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      outcomes[i] = execute_run(cfg, runs[i], datasets.at(runs[i].seed), root / runs[i].id,
                                options.keep_results);
      if (options.log) {
        std::lock_guard lock(log_mutex);
        *options.log << (outcomes[i].failed ? "FAILED " : "done   ") << runs[i].id;
        if (outcomes[i].failed) *options.log << ": " << outcomes[i].error;
        *options.log << '\n';
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(runs.size(), 1));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  write_sweep_summary(root);
  return outcomes;
}

}  // namespace gatelab
