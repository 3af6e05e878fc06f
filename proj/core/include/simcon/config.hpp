#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace simcon {

enum class LossKind { kInfoNce, kSimCon, kMvSimCon };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

// One experiment: dataset, encoders, loss selection with ablation flags,
// schedules, optimizer, and output options. Parsed from a flat key=value
// file; every field has a documented default except loss_kind.
struct ExperimentConfig {
  LossKind loss_kind = LossKind::kInfoNce;
  bool loss_kind_set = false;

  // Ablation flags. Only meaningful for mv_simcon; resolve_flags() applies
  // the defaults (all on for mv_simcon, all off otherwise) and rejects
  // contradictory combinations.
  std::optional<bool> use_multiple_views;
  std::optional<bool> use_ncs;
  std::optional<bool> use_joint_positives;

  std::size_t classes = 10;
  std::size_t train_samples = 20000;
  std::size_t eval_samples = 1000;
  std::size_t image_dim = 64;
  std::size_t text_dim = 48;
  double within_class_sigma = 0.1;
  double caption_swap_prob = 0.0;

  double view_noise_sigma = 0.05;
  double view_drop_prob = 0.1;

  std::size_t embed_dim = 32;
  std::vector<std::size_t> image_hidden_dims = {64};
  std::vector<std::size_t> text_hidden_dims = {64};
  std::size_t head_hidden_dim = 64;

  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  std::vector<std::uint64_t> seeds = {1};

  double lambda_init = 0.95;
  double lambda_step = 0.05;
  // Empty means: scale the reference boundaries (2 and 15 of a 30-epoch run)
  // to this run's epoch count.
  std::vector<std::size_t> lambda_decay_epochs;
  bool lambda_decay_auto = true;
  double lambda_floor = 0.0;

  double init_lr = 4e-6;
  double max_lr = 1.6e-3;
  double min_lr = 0.0;
  std::size_t warmup_epochs = 2;

  double tau_init = 0.07;
  bool learn_tau = true;
  double weight_decay = 0.05;

  double recall_threshold = 0.5;
  bool export_data = false;
  bool export_params = false;
  std::string out_dir;

  // Effective ablation flags after defaulting (call validate() first).
  bool multiple_views() const;
  bool ncs_enabled() const;
  bool joint_positives() const;

  std::vector<std::size_t> lambda_boundaries() const;
};

// Parses one key=value line ('#' starts a comment). Unknown keys, malformed
// values, and repeated-scalar syntax errors raise ConfigError naming the
// field (and the line when parsing a file).
void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);

ExperimentConfig parse_config_file(const std::string& path);

// Cross-field checks plus ablation-flag resolution; raises ConfigError.
void validate(ExperimentConfig& cfg);

// Canonical key=value serialization of every semantic field, sorted by key.
// Excludes seeds and out_dir: the hash identifies the experiment, and rows
// carry the seed separately.
std::string canonical_config_string(const ExperimentConfig& cfg);

// FNV-1a 64-bit hash of the canonical string, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

// All semantic config fields as (key, value-string) pairs in canonical
// order, for the sweep CSV columns.
std::vector<std::pair<std::string, std::string>> config_fields(const ExperimentConfig& cfg);

}  // namespace simcon
