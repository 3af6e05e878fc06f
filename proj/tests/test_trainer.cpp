#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "simcon/config.hpp"
#include "simcon/numerics.hpp"
#include "simcon/oracle.hpp"
#include "simcon/schedules.hpp"
#include "simcon/trainer.hpp"

using namespace simcon;

namespace {

ExperimentConfig tiny_config(const std::string& loss) {
  ExperimentConfig cfg;
  apply_config_entry(cfg, "loss_kind", loss);
  cfg.classes = 4;
  cfg.train_samples = 96;
  cfg.eval_samples = 32;
  cfg.image_dim = 10;
  cfg.text_dim = 8;
  cfg.embed_dim = 6;
  cfg.image_hidden_dims = {12};
  cfg.text_hidden_dims = {12};
  cfg.head_hidden_dim = 8;
  cfg.batch_size = 16;
  cfg.epochs = 3;
  cfg.tau_init = 0.2;
  cfg.learn_tau = false;
  validate(cfg);
  return cfg;
}

}  // namespace

TEST_CASE("adamw leaves parameters untouched when grads and decay are zero") {
  AdamState state;
  std::vector<double> params{1.5, -2.0, 0.25};
  const std::vector<double> grads{0.0, 0.0, 0.0};
  adamw_step(state, params, grads, 0.1, 0.0);
  CHECK(params == std::vector<double>{1.5, -2.0, 0.25});
  CHECK(state.step_count == 1);
}

TEST_CASE("decoupled weight decay shrinks parameters multiplicatively") {
  AdamState state;
  std::vector<double> params{2.0, -4.0};
  const std::vector<double> grads{0.0, 0.0};
  const double lr = 0.01, wd = 0.05;
  adamw_step(state, params, grads, lr, wd);
  CHECK(params[0] == doctest::Approx(2.0 * (1.0 - lr * wd)).epsilon(1e-15));
  CHECK(params[1] == doctest::Approx(-4.0 * (1.0 - lr * wd)).epsilon(1e-15));
}

TEST_CASE("first adamw step matches the bias-corrected closed form") {
  AdamState state;
  std::vector<double> params{1.0};
  const std::vector<double> grads{0.5};
  const double lr = 0.1;
  const AdamParams hp;
  adamw_step(state, params, grads, lr, 0.0, hp);

  const double m_hat = hp.beta1 * 0.0 + (1.0 - hp.beta1) * 0.5;
  const double v_hat = hp.beta2 * 0.0 + (1.0 - hp.beta2) * 0.25;
  const double expect =
      1.0 - lr * (m_hat / (1.0 - hp.beta1)) / (std::sqrt(v_hat / (1.0 - hp.beta2)) + hp.eps);
  CHECK(params[0] == doctest::Approx(expect).epsilon(1e-15));

  // Second identical step: moments accumulate and the correction uses t = 2.
  adamw_step(state, params, grads, lr, 0.0, hp);
  CHECK(state.step_count == 2);
  const double m2 = (1.0 - hp.beta1) * 0.5 * (1.0 + hp.beta1);
  const double v2 = (1.0 - hp.beta2) * 0.25 * (1.0 + hp.beta2);
  const double expect2 =
      expect - lr * (m2 / (1.0 - hp.beta1 * hp.beta1)) /
                   (std::sqrt(v2 / (1.0 - hp.beta2 * hp.beta2)) + hp.eps);
  CHECK(params[0] == doctest::Approx(expect2).epsilon(1e-12));
}

TEST_CASE("adamw rejects mismatched spans") {
  AdamState state;
  std::vector<double> params{1.0, 2.0};
  const std::vector<double> grads{0.5};
  CHECK_THROWS_AS(adamw_step(state, params, grads, 0.1, 0.0), ShapeMismatchError);
}

TEST_CASE("retrieval on identical batches is perfect in both directions") {
  const EmbeddingBatch z = l2_normalize_rows(Matrix::from_rows(
      {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {0.5, 0.5, 0.0}}));
  const auto [i2t, t2i] = eval_retrieval(z, z);
  CHECK(i2t == doctest::Approx(1.0));
  CHECK(t2i == doctest::Approx(1.0));
}

TEST_CASE("retrieval hand case with one swapped neighbour") {
  // Text side: t0 and t1 swapped relative to the images, t2/t3 aligned.
  const EmbeddingBatch z_i = EmbeddingBatch::trusted(Matrix::from_rows(
      {{1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}, {0.0, 0.0, 0.0, 1.0}}));
  const EmbeddingBatch z_t = EmbeddingBatch::trusted(Matrix::from_rows(
      {{0.0, 1.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 1.0, 0.0}, {0.0, 0.0, 0.0, 1.0}}));
  const auto [i2t, t2i] = eval_retrieval(z_i, z_t);
  CHECK(i2t == doctest::Approx(0.5));
  CHECK(t2i == doctest::Approx(0.5));
}

TEST_CASE("retrieval ties resolve to the lowest index") {
  // Both texts identical: every image's argmax ties and must pick index 0.
  const EmbeddingBatch z_i = EmbeddingBatch::trusted(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}));
  const EmbeddingBatch z_t =
      EmbeddingBatch::trusted(l2_normalize_rows(Matrix::from_rows({{1.0, 1.0}, {1.0, 1.0}})).matrix);
  const auto [i2t, t2i] = eval_retrieval(z_i, z_t);
  CHECK(i2t == doctest::Approx(0.5));  // only image 0 scores a hit
  CHECK(t2i == doctest::Approx(0.5));
}

TEST_CASE("alignment accuracy against class prototypes") {
  const EmbeddingBatch protos =
      EmbeddingBatch::trusted(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}));
  const EmbeddingBatch images = l2_normalize_rows(
      Matrix::from_rows({{0.9, 0.1}, {0.2, 0.8}, {0.7, 0.3}, {0.6, 0.4}}));
  const std::vector<std::size_t> labels{0, 1, 1, 0};
  // Image 2 is labelled 1 but sits nearer prototype 0.
  CHECK(eval_alignment(images, labels, protos) == doctest::Approx(0.75));

  const EmbeddingBatch tie =
      EmbeddingBatch::trusted(l2_normalize_rows(Matrix::from_rows({{1.0, 1.0}})).matrix);
  CHECK(eval_alignment(tie, {0}, protos) == doctest::Approx(1.0));
  CHECK(eval_alignment(tie, {1}, protos) == doctest::Approx(0.0));
}

TEST_CASE("dataset_spec_for copies the data fields and mixes the seed") {
  const ExperimentConfig cfg = tiny_config("simcon");
  const DatasetSpec spec = dataset_spec_for(cfg, 3);
  CHECK(spec.classes == cfg.classes);
  CHECK(spec.samples == cfg.train_samples);
  CHECK(spec.image_dim == cfg.image_dim);
  CHECK(spec.text_dim == cfg.text_dim);
  CHECK(spec.within_class_sigma == cfg.within_class_sigma);
  CHECK(spec.swap_prob == cfg.caption_swap_prob);
  CHECK(dataset_spec_for(cfg, 3).seed == spec.seed);
  CHECK(dataset_spec_for(cfg, 4).seed != spec.seed);
}

TEST_CASE("training is bitwise deterministic per (config, seed)") {
  const ExperimentConfig cfg = tiny_config("mv_simcon");
  const TrainResult a = train(cfg, 5);
  const TrainResult b = train(cfg, 5);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    CHECK(a.epochs[e].loss_total == b.epochs[e].loss_total);
    CHECK(a.epochs[e].recall_i2t == b.epochs[e].recall_i2t);
    CHECK(a.epochs[e].recall_t2i == b.epochs[e].recall_t2i);
    CHECK(a.epochs[e].alignment_acc == b.epochs[e].alignment_acc);
    CHECK(a.epochs[e].lr == b.epochs[e].lr);
  }
  CHECK(flatten_parameters(a.image_encoder) == flatten_parameters(b.image_encoder));
  CHECK(flatten_parameters(a.text_encoder) == flatten_parameters(b.text_encoder));
  CHECK(a.tau == b.tau);

  const TrainResult c = train(cfg, 6);
  CHECK(a.epochs.back().loss_total != c.epochs.back().loss_total);
}

TEST_CASE("a zero learning rate freezes the model") {
  ExperimentConfig cfg = tiny_config("infonce");
  cfg.init_lr = 0.0;
  cfg.max_lr = 0.0;
  cfg.min_lr = 0.0;
  validate(cfg);
  const TrainResult r = train(cfg, 1);
  REQUIRE(r.epochs.size() == 3);
  for (const EpochMetrics& m : r.epochs) {
    CHECK(m.recall_i2t == r.epochs.front().recall_i2t);
    CHECK(m.recall_t2i == r.epochs.front().recall_t2i);
    CHECK(m.alignment_acc == r.epochs.front().alignment_acc);
    CHECK(m.lr == 0.0);
  }
}

TEST_CASE("reported schedules follow the configured lambda, tau, and lr") {
  ExperimentConfig cfg = tiny_config("mv_simcon");
  cfg.epochs = 4;
  cfg.lambda_decay_epochs = {1, 2};
  cfg.lambda_decay_auto = false;
  cfg.warmup_epochs = 1;
  validate(cfg);
  std::vector<EpochMetrics> seen;
  const TrainResult r = train(cfg, 2, [&](const EpochMetrics& m) { seen.push_back(m); });

  REQUIRE(r.epochs.size() == 4);
  REQUIRE(seen.size() == 4);
  const std::size_t steps_per_epoch = cfg.train_samples / cfg.batch_size;
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(seen[e].epoch == e + 1);
    CHECK(seen[e].lambda ==
          doctest::Approx(oracle::lambda_at_epoch(cfg.lambda_init, cfg.lambda_step, {1, 2},
                                                  cfg.lambda_floor, e + 1))
              .epsilon(1e-15));
    CHECK(seen[e].tau == doctest::Approx(cfg.tau_init).epsilon(1e-15));
    CHECK(seen[e].lr ==
          doctest::Approx(oracle::lr_at_step(cfg.init_lr, cfg.max_lr, cfg.min_lr,
                                             steps_per_epoch * cfg.warmup_epochs,
                                             steps_per_epoch * cfg.epochs,
                                             steps_per_epoch * (e + 1)))
              .epsilon(1e-12));
    CHECK(seen[e].loss_total == r.epochs[e].loss_total);
  }
}

TEST_CASE("a short multi-view run learns and reports sane diagnostics") {
  ExperimentConfig cfg = tiny_config("mv_simcon");
  cfg.epochs = 5;
  cfg.max_lr = 0.01;
  cfg.warmup_epochs = 1;
  validate(cfg);
  const TrainResult r = train(cfg, 1);
  REQUIRE(r.epochs.size() == 5);
  CHECK(r.epochs.back().loss_total < r.epochs.front().loss_total);
  CHECK(r.epochs.back().recall_i2t >= r.epochs.front().recall_i2t);
  for (const EpochMetrics& m : r.epochs) {
    CHECK(m.pos_per_image >= 1.0);
    CHECK(m.pos_per_text >= 1.0);
    CHECK(m.pos_per_image <= static_cast<double>(cfg.batch_size));
    CHECK(std::isfinite(m.loss_total));
    CHECK(m.loss_ncs != 0.0);
    CHECK(m.seconds > 0.0);
  }
  CHECK(r.head.net.layers.size() == 2);
}

TEST_CASE("single-view losses report unit positives and no ncs term") {
  const TrainResult r = train(tiny_config("infonce"), 1);
  for (const EpochMetrics& m : r.epochs) {
    CHECK(m.pos_per_image == 1.0);
    CHECK(m.pos_per_text == 1.0);
    CHECK(m.loss_ncs == 0.0);
  }
  CHECK(r.head.net.layers.empty());
}

TEST_CASE("learnable temperature moves and stays within its clamp") {
  ExperimentConfig cfg = tiny_config("simcon");
  cfg.learn_tau = true;
  cfg.max_lr = 0.01;
  validate(cfg);
  const TrainResult r = train(cfg, 1);
  CHECK(r.tau != cfg.tau_init);
  for (const EpochMetrics& m : r.epochs) {
    CHECK(m.tau >= 1e-3 - 1e-12);
    CHECK(m.tau <= 1.0 + 1e-12);
  }
}
