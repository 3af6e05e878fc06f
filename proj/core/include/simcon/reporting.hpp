#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simcon/config.hpp"
#include "simcon/trainer.hpp"

namespace simcon {

struct RunSummary {
  double final_recall_i2t = 0.0;
  double final_recall_t2i = 0.0;
  double best_recall_i2t = 0.0;
  double best_recall_t2i = 0.0;
  double final_alignment_acc = 0.0;
  std::size_t epochs_to_threshold = 0;  // first epoch with recall_i2t >= threshold; 0 if never
  double seconds = 0.0;                 // wall clock over all epochs
};

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  RunSummary summary;
};

RunRecord make_run_record(const ExperimentConfig& cfg, std::uint64_t seed,
                          std::vector<EpochMetrics> epochs);

// Fixed column order of the per-run CSV; documented in docs/csv_schema.md.
// Wall-clock seconds stay out of the CSV so identical reruns are
// byte-identical; timing lives in the JSON summary.
const std::vector<std::string>& csv_columns();

std::string csv_header();
std::string csv_row(const RunRecord& rec, const EpochMetrics& em);

void write_metrics_csv(const RunRecord& rec, const std::string& path);

// Aggregate summary across seeds: per-seed summaries plus mean and sample
// standard deviation of the headline metrics, and total timing.
void write_summary_json(const ExperimentConfig& cfg, const std::vector<RunRecord>& records,
                        const std::string& path);

// Combined sweep CSV: every config field as a column, then the per-run
// metric columns. append controls whether the header is written.
void append_sweep_rows(const ExperimentConfig& cfg, const std::vector<RunRecord>& records,
                       const std::string& path, bool write_header);

std::string format_metric(double v);

}  // namespace simcon
