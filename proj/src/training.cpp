#include "gatelab/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gatelab {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning_rate must be a finite non-negative number");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
  if (eval_every == 0) throw std::invalid_argument("eval_every must be positive");
}

void adam_step(NetworkParams& params, const ad::Gradients& grads, AdamState& state,
               const TrainConfig& cfg) {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (i < grads.size() && grads[i].size() > 0 && !grads[i].allFinite())
      throw std::domain_error("non-finite gradient for parameter " + params.names[i]);

  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& t : params.tensors) {
      state.m.push_back(zeros_like(t));
      state.v.push_back(zeros_like(t));
    }
    state.step = 0;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i >= grads.size() || grads[i].size() == 0) continue;
    const Tensor& g = grads[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    params.tensors[i].array() -=
        cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
  }
}

std::vector<RelativeChange> relative_change(const NetworkParams& params,
                                            const ad::Gradients& grads) {
  std::vector<RelativeChange> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    RelativeChange rc;
    rc.name = params.names[i];
    const Tensor& p = params.tensors[i];
    if (i < grads.size() && grads[i].size() == p.size() && p.size() > 0) {
      double total = 0.0;
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double d = p(k) == 0.0 ? 0.0 : std::abs(grads[i](k) / p(k));
        rc.max_abs = std::max(rc.max_abs, d);
        total += d;
      }
      rc.mean_abs = total / static_cast<double>(p.size());
    }
    out.push_back(rc);
  }
  return out;
}

double masked_accuracy(const Tensor& logits, std::span<const int> labels,
                       std::span<const std::uint8_t> mask) {
  std::size_t hit = 0, total = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    ++total;
    Eigen::Index best = 0;
    logits.row(i).maxCoeff(&best);
    if (best == labels[i]) ++hit;
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

namespace {

void update_summary(TrainSummary& s, const EpochMetrics& m, bool first) {
  if (first || m.loss < s.min_train_loss) {
    s.min_train_loss = m.loss;
    s.min_train_loss_epoch = m.epoch;
    s.test_acc_at_min_train_loss = m.test_acc;
  }
  if (first || m.val_acc > s.max_val_acc) {
    s.max_val_acc = m.val_acc;
    s.max_val_acc_epoch = m.epoch;
    s.test_acc_at_max_val_acc = m.test_acc;
  }
  if (first || m.train_acc > s.max_train_acc) {
    s.max_train_acc = m.train_acc;
    s.max_train_acc_epoch = m.epoch;
    s.test_acc_at_max_train_acc = m.test_acc;
  }
  s.final = m;
}

bool due(std::size_t epoch, std::size_t every) { return every > 0 && epoch % every == 0; }

}  // namespace

TrainResult train(const NetworkSpec& spec, const InitPolicy& init, const Dataset& data,
                  const TrainConfig& cfg) {
  NetworkParams params = allocate_params(spec);
  initialize(params, spec, init);
  return train_from(spec, std::move(params), data, cfg);
}

TrainResult train_from(const NetworkSpec& spec, NetworkParams params, const Dataset& data,
                       const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  data.validate();
  if (spec.input_dim != static_cast<std::size_t>(data.features.cols()))
    throw std::invalid_argument("train: network input width does not match the features");
  if (spec.output_dim() != data.num_classes)
    throw std::invalid_argument("train: network output width does not match the class count");

  TrainResult result;
  TrainTrace& trace = result.trace;
  TrainSummary& summary = trace.summary;
  AdamState adam;

  for (std::size_t epoch = 0; epoch <= cfg.max_epochs; ++epoch) {
    ad::Tape tape;
    const auto pass = network_forward(tape, spec, params, data.features, data.graph);
    const auto loss = ad::softmax_cross_entropy(tape, pass.logits, data.labels, data.split.train);
    const Tensor& logits = tape.value(pass.logits);

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = tape.value(loss)(0, 0);
    if (!std::isfinite(m.loss)) {
      summary.failed = true;
      summary.failure = "non-finite training loss at epoch " + std::to_string(epoch);
      break;
    }
    m.train_acc = masked_accuracy(logits, data.labels, data.split.train);
    m.val_acc = masked_accuracy(logits, data.labels, data.split.val);
    m.test_acc = masked_accuracy(logits, data.labels, data.split.test);
    update_summary(summary, m, epoch == 0);
    const bool last = epoch == cfg.max_epochs;
    if (epoch % cfg.eval_every == 0 || last) trace.epochs.push_back(m);

    if (due(epoch, cfg.trace_alpha_every) || last) {
      for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        AlphaTrace at;
        at.epoch = epoch;
        at.layer = l;
        if (pass.alpha[l].valid())
          at.alpha_vv = extract_alpha_vv(flat(tape.value(pass.alpha[l])), data.graph);
        else
          at.alpha_vv.assign(data.num_nodes(), 1.0);
        trace.alpha.push_back(std::move(at));
      }
    }
    if (last) break;

    const ad::Gradients grads = tape.backward(loss);
    if (due(epoch, cfg.conservation_check_every)) {
      for (auto& report : conservation_reports(spec, params, grads)) {
        if (report.law != ConservationLaw::gat_unshared_ext)
          summary.max_conservation_residual =
              std::max(summary.max_conservation_residual, report.max_relative_residual());
        trace.conservation.push_back({epoch, std::move(report)});
      }
    }
    if (epoch == 0 || epoch + 1 == cfg.max_epochs || due(epoch, cfg.relative_change_every))
      trace.relative_change.push_back({epoch, relative_change(params, grads)});

    try {
      adam_step(params, grads, adam, cfg);
    } catch (const std::domain_error& e) {
      summary.failed = true;
      summary.failure = std::string(e.what()) + " at epoch " + std::to_string(epoch);
      break;
    }
    summary.epochs_run = epoch + 1;
  }
  result.params = std::move(params);
  return result;
}

}  // namespace gatelab
