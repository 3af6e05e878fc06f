#include <benchmark/benchmark.h>

#include "simcon/config.hpp"
#include "simcon/encoders.hpp"
#include "simcon/losses.hpp"
#include "simcon/numerics.hpp"
#include "simcon/rng.hpp"
#include "simcon/synthdata.hpp"
#include "simcon/trainer.hpp"

using namespace simcon;

namespace {

EmbeddingBatch random_batch(std::uint64_t seed, std::size_t b, std::size_t d) {
  Rng rng(seed);
  Matrix m(b, d);
  for (double& v : m.flat()) v = rng.normal();
  return l2_normalize_rows(m);
}

void bm_similarity(benchmark::State& state) {
  const std::size_t b = static_cast<std::size_t>(state.range(0));
  const EmbeddingBatch z = random_batch(1, b, 32);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cosine_similarity_matrix(z, z));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(b * b));
}

void bm_info_nce(benchmark::State& state) {
  const std::size_t b = static_cast<std::size_t>(state.range(0));
  const EmbeddingBatch z_i = random_batch(2, b, 32);
  const EmbeddingBatch z_t = random_batch(3, b, 32);
  const Temperature temp{0.07, true};
  for (auto _ : state) {
    benchmark::DoNotOptimize(info_nce(z_i, z_t, temp));
  }
}

void bm_simcon(benchmark::State& state) {
  const std::size_t b = static_cast<std::size_t>(state.range(0));
  const EmbeddingBatch z_i = random_batch(4, b, 32);
  const EmbeddingBatch z_t = random_batch(5, b, 32);
  const Temperature temp{0.07, true};
  for (auto _ : state) {
    const auto [p_i, p_t] = positive_masks(cosine_similarity_matrix(z_i, z_i),
                                           cosine_similarity_matrix(z_t, z_t), 0.5);
    benchmark::DoNotOptimize(simcon::simcon(z_i, z_t, p_i, p_t, temp));
  }
}

void bm_total_loss(benchmark::State& state) {
  const std::size_t b = static_cast<std::size_t>(state.range(0));
  const EmbeddingBatch z1 = random_batch(6, b, 32);
  const EmbeddingBatch z2 = random_batch(7, b, 32);
  const EmbeddingBatch zt = random_batch(8, b, 32);
  const Temperature temp{0.07, true};
  const ProjectionHead head = init_projection_head(9, 32, 64);
  const NcsSpec spec{&head};
  for (auto _ : state) {
    benchmark::DoNotOptimize(total_loss(z1, z2, zt, temp, 0.5, spec));
  }
}

void bm_train_epoch(benchmark::State& state) {
  ExperimentConfig cfg;
  apply_config_entry(cfg, "loss_kind", "mv_simcon");
  apply_config_entry(cfg, "classes", "10");
  apply_config_entry(cfg, "train_samples", "1024");
  apply_config_entry(cfg, "eval_samples", "128");
  apply_config_entry(cfg, "batch_size", std::to_string(state.range(0)));
  apply_config_entry(cfg, "epochs", "1");
  validate(cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(cfg, 1));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 1024);
}

}  // namespace

BENCHMARK(bm_similarity)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_info_nce)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_simcon)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_total_loss)->Arg(64)->Arg(128);
BENCHMARK(bm_train_epoch)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
