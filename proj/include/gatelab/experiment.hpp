#pragma once

// JSON-configured sweeps: architectures x depths x seeds, each run trained
// independently and written to its own directory.
//
// {
//   "name": "self_sufficient_er",
//   "dataset":  {"kind": "self_sufficient_er", "n": 1000, "p": 0.01, "classes": 8, "seed": 0},
//   "model":    {"width": 64, "init": {"matrix": "looks_linear_orthogonal", "attention": "standard"}},
//   "training": {"learning_rate": 0.005, "max_epochs": 10000, "trace_alpha_every": 50},
//   "sweep":    {"architectures": ["gat", "gate"], "depths": [5], "seeds": [0]},
//   "output_dir": "runs/self_sufficient_er"
// }
//
// Dataset kinds: self_sufficient_er, neighbor_dependent, self_sufficient_structure,
// files. A relative output_dir is resolved against $GATELAB_OUTPUT_ROOT when set.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gatelab/dataset.hpp"
#include "gatelab/init.hpp"
#include "gatelab/layers.hpp"
#include "gatelab/training.hpp"

namespace gatelab {

inline constexpr const char* kOutputRootEnv = "GATELAB_OUTPUT_ROOT";

/// Every problem found in a config, one "field.path: message" per entry.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct ExperimentConfig {
  std::string name;
  nlohmann::json dataset;
  std::size_t width = 64;
  /// Per-layer bias vectors (zero-initialized) for the named architectures.
  bool bias = false;
  MatrixScheme matrix_scheme = MatrixScheme::looks_linear_orthogonal;
  AttentionScheme attention_scheme = AttentionScheme::standard;
  /// Explicit layer stack; used by the "custom" architecture.
  std::optional<nlohmann::json> layers;
  TrainConfig training;
  std::vector<std::string> architectures;
  std::vector<std::size_t> depths;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  nlohmann::json source;  // the document as given
};

/// Validates everything before returning; throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// output_dir resolved against $GATELAB_OUTPUT_ROOT when relative.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

struct RunSpec {
  std::string architecture;
  std::size_t depth = 0;
  std::uint64_t seed = 0;
  std::string id;  // directory name
};

/// architectures x depths x seeds in that nesting order ("custom" uses one
/// depth, the length of model.layers).
std::vector<RunSpec> run_matrix(const ExperimentConfig& cfg);

/// The dataset of one run seed; every architecture of that seed shares it.
Dataset make_dataset(const ExperimentConfig& cfg, std::uint64_t run_seed);

NetworkSpec make_run_network(const ExperimentConfig& cfg, const RunSpec& run,
                             std::size_t input_dim, std::size_t classes);

/// Initialization seed of a run; distinct for every (architecture, depth, seed).
std::uint64_t init_seed(const RunSpec& run);

struct RunOutcome {
  RunSpec run;
  std::filesystem::path dir;
  bool failed = false;
  std::string error;
  std::optional<TrainResult> result;
  double energy_input_all = 0.0, energy_final_all = 0.0;
  double energy_input_adjacent = 0.0, energy_final_adjacent = 0.0;
};

/// Trains one run and writes its artifacts into `dir`: trace.jsonl,
/// metrics.csv, summary.csv, alpha_hist.csv, alpha_summary.csv,
/// conservation.csv, relative_change.csv, energy.csv and SVG plots. On
/// failure a FAILED file holds the reason next to whatever was written.
RunOutcome execute_run(const ExperimentConfig& cfg, const RunSpec& run, const Dataset& data,
                       const std::filesystem::path& dir, bool keep_result = false);

struct Confidence {
  double mean = 0.0;
  std::optional<double> half_width;  // 1.96 * sample sd / sqrt(k); none for k = 1
};

/// Throws std::invalid_argument for an empty sample.
Confidence report_confidence(std::span<const double> values);

/// Reads <sweep_dir>/<run>/summary.csv for every run and writes
/// sweep_summary.csv (one row per architecture and depth). Returns its text.
std::string write_sweep_summary(const std::filesystem::path& sweep_dir);

struct SweepOptions {
  std::size_t workers = 1;
  bool keep_results = false;
  std::ostream* log = nullptr;
};

/// Resolved matrix, datasets and every run; then sweep_summary.csv.
std::vector<RunOutcome> run_experiment(const ExperimentConfig& cfg, const SweepOptions& options);

/// Human-readable run matrix for --dry-run.
std::string describe_run_matrix(const ExperimentConfig& cfg);

}  // namespace gatelab
