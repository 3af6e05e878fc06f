#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "simcon/config.hpp"
#include "simcon/encoders.hpp"
#include "simcon/losses.hpp"
#include "simcon/numerics.hpp"
#include "simcon/synthdata.hpp"

namespace simcon {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-tensor moment estimates. step_count drives bias correction.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step_count = 0;
};

// Decoupled-weight-decay Adam update on one parameter tensor.
void adamw_step(AdamState& state, std::span<double> params, std::span<const double> grads,
                double lr, double weight_decay, const AdamParams& hp = {});

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-indexed
  double lambda = 0.0;
  double tau = 0.0;
  double lr = 0.0;  // value applied at the last step of the epoch
  double loss_total = 0.0;
  double loss_i2t = 0.0;  // image-anchored contrastive terms
  double loss_t2i = 0.0;  // text-anchored contrastive terms
  double loss_ncs = 0.0;
  double pos_per_image = 0.0;
  double pos_per_text = 0.0;
  double recall_i2t = 0.0;
  double recall_t2i = 0.0;
  double alignment_acc = 0.0;
  double seconds = 0.0;  // wall clock; reported in summaries, never in CSVs
};

// Fraction of anchors whose top-1 cross-modal neighbour (argmax cosine, ties
// broken by lowest index) is the true pair; both directions.
std::pair<double, double> eval_retrieval(const EmbeddingBatch& z_images,
                                         const EmbeddingBatch& z_texts);

// Fraction of images whose nearest class text prototype (ties broken by
// lowest class index) matches class_ids.
double eval_alignment(const EmbeddingBatch& z_images, const std::vector<std::size_t>& class_ids,
                      const EmbeddingBatch& class_prototypes);

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  Mlp image_encoder;
  Mlp text_encoder;
  ProjectionHead head;  // identity when the run has no view-consistency term
  double tau = 0.0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// The training dataset of a run is fully determined by (config, seed); this
// exposes its spec so callers can regenerate it (e.g. for export).
DatasetSpec dataset_spec_for(const ExperimentConfig& cfg, std::uint64_t seed);

// Full training run for one seed: seeded dataset + encoders, per-epoch
// shuffled batches, the configured loss, AdamW with warmup + cosine learning
// rate, and held-out evaluation (clean captions) after every epoch.
// Deterministic per (config, seed).
TrainResult train(const ExperimentConfig& cfg, std::uint64_t seed,
                  const EpochCallback& on_epoch = nullptr);

}  // namespace simcon
