#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gatelab/autodiff.hpp"
#include "gatelab/conservation.hpp"
#include "gatelab/dataset.hpp"
#include "gatelab/diagnostics.hpp"
#include "gatelab/init.hpp"
#include "gatelab/layers.hpp"

namespace gatelab {

struct TrainConfig {
  double learning_rate = 0.005;
  std::size_t max_epochs = 10000;
  /// Metrics are computed every epoch; this only thins the stored trace.
  std::size_t eval_every = 1;
  std::size_t trace_alpha_every = 50;
  /// 0 disables the conservation check.
  std::size_t conservation_check_every = 0;
  /// 0 records relative change only at the first and last update.
  std::size_t relative_change_every = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Throws std::invalid_argument on a negative or non-finite rate or bad
  /// betas. A zero rate is accepted and leaves the parameters frozen.
  void validate() const;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update of every parameter with a gradient.
/// Throws std::domain_error naming the parameter on a non-finite gradient;
/// nothing is modified in that case.
void adam_step(NetworkParams& params, const ad::Gradients& grads, AdamState& state,
               const TrainConfig& cfg);

struct RelativeChange {
  std::string name;
  double max_abs = 0.0;
  double mean_abs = 0.0;
};

/// |grad / theta| per entry (0 where theta == 0), summarized per tensor.
std::vector<RelativeChange> relative_change(const NetworkParams& params,
                                            const ad::Gradients& grads);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;  // training loss
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
};

struct ConservationRecord {
  std::size_t epoch = 0;
  ConservationReport report;
};

struct RelativeChangeRecord {
  std::size_t epoch = 0;
  std::vector<RelativeChange> tensors;
};

struct TrainSummary {
  std::size_t epochs_run = 0;  // Adam updates applied
  std::size_t min_train_loss_epoch = 0;
  double min_train_loss = 0.0;
  double test_acc_at_min_train_loss = 0.0;
  std::size_t max_val_acc_epoch = 0;
  double max_val_acc = 0.0;
  double test_acc_at_max_val_acc = 0.0;
  std::size_t max_train_acc_epoch = 0;
  double max_train_acc = 0.0;
  double test_acc_at_max_train_acc = 0.0;
  EpochMetrics final;
  /// Largest relative residual over all hard-gated laws (gat_unshared_ext
  /// is reported but excluded).
  double max_conservation_residual = 0.0;
  bool failed = false;
  std::string failure;
};

struct TrainTrace {
  std::vector<EpochMetrics> epochs;
  std::vector<AlphaTrace> alpha;
  std::vector<ConservationRecord> conservation;
  std::vector<RelativeChangeRecord> relative_change;
  TrainSummary summary;
};

struct TrainResult {
  TrainTrace trace;
  NetworkParams params;  // after the last update
};

/// Fraction of masked rows whose argmax (lowest index on ties) equals the label.
double masked_accuracy(const Tensor& logits, std::span<const int> labels,
                       std::span<const std::uint8_t> mask);

/// Full-batch Adam on the training mask. Epoch t evaluates the parameters
/// after t updates; epochs 0..max_epochs are evaluated and max_epochs updates
/// applied. Conservation and relative change use the gradient of epoch t
/// before its update. A non-finite loss or gradient ends training early with
/// summary.failed set and the trace kept.
TrainResult train(const NetworkSpec& spec, const InitPolicy& init, const Dataset& data,
                  const TrainConfig& cfg);

/// Same, starting from given parameters.
TrainResult train_from(const NetworkSpec& spec, NetworkParams params, const Dataset& data,
                       const TrainConfig& cfg);

}  // namespace gatelab
