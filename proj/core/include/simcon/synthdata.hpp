#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "simcon/matrix.hpp"
#include "simcon/rng.hpp"

namespace simcon {

// One paired sample. When caption_noisy is set the text was generated from a
// different class's prototype; noisy_source_class records which one.
struct SyntheticPair {
  std::vector<double> image_raw;
  std::vector<double> text_raw;
  std::size_t class_id = 0;
  bool caption_noisy = false;
  std::optional<std::size_t> noisy_source_class;
};

struct DatasetSpec {
  std::size_t classes = 10;
  std::size_t samples = 20000;
  std::size_t image_dim = 64;
  std::size_t text_dim = 48;
  double within_class_sigma = 0.1;
  double swap_prob = 0.0;  // probability a caption is drawn from a wrong class
  std::uint64_t seed = 0;
};

struct Dataset {
  DatasetSpec spec;
  Matrix image_prototypes;  // classes x image_dim
  Matrix text_prototypes;   // classes x text_dim
  std::vector<SyntheticPair> pairs;

  std::size_t size() const { return pairs.size(); }
};

// Two-view image augmentation parameters. Text is never augmented.
struct ViewConfig {
  double noise_sigma = 0.05;
  double coordinate_drop_prob = 0.1;
};

// Draws class prototypes from unit Gaussians (one stream per modality), then
// per sample adds N(0, sigma^2) around the prototype. Classes are assigned
// round robin (class_id = i mod K), so every prefix of the dataset is
// balanced. With probability swap_prob the caption comes from a uniformly
// random different class. Each sample consumes its own seeded stream, so
// sample i is identical regardless of the total sample count.
Dataset generate_dataset(const DatasetSpec& spec);

// Independent noise plus coordinate dropout per view, deterministic per
// (seed, pair_index).
std::pair<std::vector<double>, std::vector<double>> augment_views(const SyntheticPair& pair,
                                                                  const ViewConfig& cfg,
                                                                  std::uint64_t seed,
                                                                  std::size_t pair_index);

// Seeded shuffle of [0, n) split into consecutive batches; the final partial
// batch is dropped so every batch has exactly batch_size rows.
std::vector<std::vector<std::size_t>> sample_batches(std::size_t n, std::size_t batch_size,
                                                     std::uint64_t epoch_seed);

// Gathers raw image/text rows for a batch of indices.
Matrix gather_images(const Dataset& data, const std::vector<std::size_t>& indices);
Matrix gather_texts(const Dataset& data, const std::vector<std::size_t>& indices);

// Both augmented views for a batch of indices, stacked as matrices.
std::pair<Matrix, Matrix> gather_views(const Dataset& data,
                                       const std::vector<std::size_t>& indices,
                                       const ViewConfig& cfg, std::uint64_t seed);

// One record per line: class_id, caption_noisy, noisy_source_class, vectors.
void export_jsonl(const Dataset& data, const std::string& path);

}  // namespace simcon
