#include "doctest.h"

#include "../support.hpp"
#include "gatelab/synth.hpp"
#include "gatelab/training.hpp"

using namespace gatelab;

namespace {

Dataset small_task(std::uint64_t seed = 1) {
  return gen_self_sufficient(erdos_renyi(80, 0.06, seed), 3, seed);
}

TrainConfig short_run(std::size_t epochs = 30) {
  TrainConfig cfg;
  cfg.max_epochs = epochs;
  cfg.trace_alpha_every = 10;
  cfg.conservation_check_every = 10;
  return cfg;
}

}  // namespace

TEST_CASE("Adam matches a hand-rolled reference over three steps") {
  NetworkSpec spec = make_network("mlp", 1, 2, 2, 2);
  auto params = allocate_params(spec);
  params.tensors[0] << 0.5, -1.0, 2.0, 0.25;
  const std::vector<Tensor> gs{(Tensor(2, 2) << 0.1, -0.2, 0.0, 3.0).finished(),
                               (Tensor(2, 2) << -0.3, 0.1, 1e-3, 1.0).finished(),
                               (Tensor(2, 2) << 0.2, 0.2, -0.5, -2.0).finished()};
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  AdamState state;

  double theta[4], m[4] = {0, 0, 0, 0}, v[4] = {0, 0, 0, 0};
  for (int k = 0; k < 4; ++k) theta[k] = params.tensors[0](k);
  for (int t = 1; t <= 3; ++t) {
    adam_step(params, {gs[t - 1]}, state, cfg);
    for (int k = 0; k < 4; ++k) {
      const double g = gs[t - 1](k);
      m[k] = 0.9 * m[k] + 0.1 * g;
      v[k] = 0.999 * v[k] + 0.001 * g * g;
      const double mh = m[k] / (1 - std::pow(0.9, t)), vh = v[k] / (1 - std::pow(0.999, t));
      theta[k] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(params.tensors[0](k) == doctest::Approx(theta[k]).epsilon(1e-14));
    }
  }
  CHECK(state.step == 3);
}

TEST_CASE("the first Adam step moves every coordinate by about the learning rate") {
  NetworkSpec spec = make_network("mlp", 1, 3, 3, 3);
  auto params = allocate_params(spec);
  const Tensor before = params.tensors[0];
  Rng rng(2);
  const Tensor g = testing::random_tensor(3, 3, rng);
  AdamState state;
  TrainConfig cfg;
  adam_step(params, {g}, state, cfg);
  const Tensor step = (params.tensors[0] - before).cwiseAbs();
  CHECK(step.maxCoeff() <= cfg.learning_rate * (1 + 1e-9));
  CHECK(step.minCoeff() >= cfg.learning_rate * (1 - 1e-6));
}

TEST_CASE("Adam refuses a non-finite gradient without touching anything") {
  NetworkSpec spec = make_network("mlp", 1, 2, 2, 2);
  auto params = allocate_params(spec);
  const Tensor before = params.tensors[0];
  Tensor g = Tensor::Ones(2, 2);
  g(1, 0) = std::numeric_limits<double>::quiet_NaN();
  AdamState state;
  CHECK_THROWS_AS(adam_step(params, {g}, state, TrainConfig{}), std::domain_error);
  CHECK(params.tensors[0] == before);
  CHECK(state.step == 0);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.learning_rate = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.learning_rate = 0.01;
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("masked accuracy breaks ties towards the lowest class") {
  Tensor logits(3, 2);
  logits << 1, 1, 0, 2, 5, 1;
  const std::vector<int> labels{0, 1, 1};
  CHECK(masked_accuracy(logits, labels, std::vector<std::uint8_t>{1, 1, 1}) == doctest::Approx(2.0 / 3));
  CHECK(masked_accuracy(logits, labels, std::vector<std::uint8_t>{0, 0, 1}) == 0.0);
}

TEST_CASE("relative change divides the gradient by the parameter") {
  NetworkSpec spec = make_network("mlp", 1, 2, 2, 2);
  auto params = allocate_params(spec);
  params.tensors[0] << 2.0, 0.0, -4.0, 1.0;
  Tensor g(2, 2);
  g << 1.0, 5.0, 1.0, -3.0;
  const auto rc = relative_change(params, {g});
  REQUIRE(rc.size() == 1);
  CHECK(rc[0].max_abs == doctest::Approx(3.0));
  CHECK(rc[0].mean_abs == doctest::Approx((0.5 + 0.0 + 0.25 + 3.0) / 4));
}

TEST_CASE("training trace invariants") {
  const auto data = small_task();
  for (const char* arch : {"gat", "gat_s", "gate", "gate_s", "mlp_gat"}) {
    const auto spec = make_network(arch, 3, data.features.cols(), 8, data.num_classes);
    const auto result = train(spec, InitPolicy{}, data, short_run());
    const auto& tr = result.trace;
    CHECK_FALSE(tr.summary.failed);
    CHECK(tr.summary.epochs_run == 30);
    REQUIRE(tr.epochs.size() == 31);
    for (std::size_t i = 0; i < tr.epochs.size(); ++i) {
      CHECK(tr.epochs[i].epoch == i);
      CHECK(std::isfinite(tr.epochs[i].loss));
      for (double acc : {tr.epochs[i].train_acc, tr.epochs[i].val_acc, tr.epochs[i].test_acc})
        CHECK((acc >= 0.0 && acc <= 1.0));
    }
    // alpha traced at 0, 10, 20, 30 for every layer
    CHECK(tr.alpha.size() == 4 * 3);
    for (const auto& a : tr.alpha)
      for (double x : a.alpha_vv) CHECK((x >= 0.0 && x <= 1.0));
    CHECK(tr.summary.max_conservation_residual < 1e-8);
    CHECK_FALSE(tr.conservation.empty());
    CHECK(tr.summary.min_train_loss <= tr.epochs.front().loss);
  }
}

TEST_CASE("mlp layers trace alpha_vv as exactly one") {
  const auto data = small_task();
  const auto spec = make_network("mlp_gat", 2, data.features.cols(), 8, data.num_classes);
  const auto result = train(spec, InitPolicy{}, data, short_run(5));
  for (const auto& a : result.trace.alpha)
    if (a.layer == 1)
      for (double x : a.alpha_vv) CHECK(x == 1.0);
}

TEST_CASE("training is deterministic") {
  const auto data = small_task(4);
  const auto spec = make_network("gate", 3, data.features.cols(), 8, data.num_classes);
  const auto a = train(spec, InitPolicy{MatrixScheme::looks_linear_orthogonal, AttentionScheme::standard, 5}, data, short_run());
  const auto b = train(spec, InitPolicy{MatrixScheme::looks_linear_orthogonal, AttentionScheme::standard, 5}, data, short_run());
  REQUIRE(a.trace.epochs.size() == b.trace.epochs.size());
  for (std::size_t i = 0; i < a.trace.epochs.size(); ++i) {
    CHECK(a.trace.epochs[i].loss == b.trace.epochs[i].loss);
    CHECK(a.trace.epochs[i].test_acc == b.trace.epochs[i].test_acc);
  }
  for (std::size_t i = 0; i < a.params.size(); ++i) CHECK(a.params.tensors[i] == b.params.tensors[i]);
}

TEST_CASE("a zero learning rate freezes the parameters") {
  const auto data = small_task();
  const auto spec = make_network("gat", 2, data.features.cols(), 8, data.num_classes);
  auto params = allocate_params(spec);
  initialize(params, spec, InitPolicy{});
  TrainConfig cfg = short_run(5);
  cfg.learning_rate = 0.0;
  const auto result = train_from(spec, params, data, cfg);
  for (std::size_t i = 0; i < params.size(); ++i) CHECK(result.params.tensors[i] == params.tensors[i]);
  CHECK(result.trace.epochs.front().loss == result.trace.epochs.back().loss);
}

TEST_CASE("divergence ends the run with a partial trace") {
  const auto data = small_task();
  const auto spec = make_network("gat", 2, data.features.cols(), 8, data.num_classes);
  auto params = allocate_params(spec);
  initialize(params, spec, InitPolicy{});
  params.tensors[0](0, 0) = std::numeric_limits<double>::infinity();
  const auto result = train_from(spec, params, data, short_run(5));
  CHECK(result.trace.summary.failed);
  CHECK_FALSE(result.trace.summary.failure.empty());
  CHECK(result.trace.epochs.size() < 6);
}
