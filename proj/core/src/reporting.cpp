#include "simcon/reporting.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "simcon/errors.hpp"

namespace simcon {

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

nlohmann::json mean_std(const std::vector<double>& v) {
  return {{"mean", mean_of(v)}, {"std", std_of(v)}};
}

}  // namespace

std::string format_metric(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RunRecord make_run_record(const ExperimentConfig& cfg, std::uint64_t seed,
                          std::vector<EpochMetrics> epochs) {
  if (epochs.empty()) throw EmptyInputError("run record needs at least one epoch");
  RunRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.seed = seed;
  rec.epochs = std::move(epochs);

  RunSummary& s = rec.summary;
  const EpochMetrics& last = rec.epochs.back();
  s.final_recall_i2t = last.recall_i2t;
  s.final_recall_t2i = last.recall_t2i;
  s.final_alignment_acc = last.alignment_acc;
  for (const EpochMetrics& em : rec.epochs) {
    s.best_recall_i2t = std::max(s.best_recall_i2t, em.recall_i2t);
    s.best_recall_t2i = std::max(s.best_recall_t2i, em.recall_t2i);
    s.seconds += em.seconds;
    if (s.epochs_to_threshold == 0 && em.recall_i2t >= cfg.recall_threshold) {
      s.epochs_to_threshold = em.epoch;
    }
  }
  return rec;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> kColumns = {
      "config_hash", "seed",          "epoch",        "lambda",        "tau",
      "lr",          "loss_total",    "loss_i2t",     "loss_t2i",      "loss_ncs",
      "pos_per_image", "pos_per_text", "recall_i2t",  "recall_t2i",    "alignment_acc"};
  return kColumns;
}

std::string csv_header() {
  std::string out;
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i > 0) out += ",";
    out += cols[i];
  }
  out += "\n";
  return out;
}

std::string csv_row(const RunRecord& rec, const EpochMetrics& em) {
  std::string out = rec.config_hash;
  out += "," + std::to_string(rec.seed);
  out += "," + std::to_string(em.epoch);
  out += "," + format_metric(em.lambda);
  out += "," + format_metric(em.tau);
  out += "," + format_metric(em.lr);
  out += "," + format_metric(em.loss_total);
  out += "," + format_metric(em.loss_i2t);
  out += "," + format_metric(em.loss_t2i);
  out += "," + format_metric(em.loss_ncs);
  out += "," + format_metric(em.pos_per_image);
  out += "," + format_metric(em.pos_per_text);
  out += "," + format_metric(em.recall_i2t);
  out += "," + format_metric(em.recall_t2i);
  out += "," + format_metric(em.alignment_acc);
  out += "\n";
  return out;
}

void write_metrics_csv(const RunRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << csv_header();
  for (const EpochMetrics& em : rec.epochs) out << csv_row(rec, em);
  if (!out) throw IoError("failed writing " + path);
}

void write_summary_json(const ExperimentConfig& cfg, const std::vector<RunRecord>& records,
                        const std::string& path) {
  nlohmann::json doc;
  doc["config_hash"] = config_hash(cfg);
  nlohmann::json cfg_json = nlohmann::json::object();
  for (const auto& [key, value] : config_fields(cfg)) cfg_json[key] = value;
  doc["config"] = cfg_json;

  std::vector<double> final_i2t, final_t2i, best_i2t, final_align, to_threshold, seconds;
  nlohmann::json per_seed = nlohmann::json::array();
  for (const RunRecord& rec : records) {
    const RunSummary& s = rec.summary;
    per_seed.push_back({{"seed", rec.seed},
                        {"final_recall_i2t", s.final_recall_i2t},
                        {"final_recall_t2i", s.final_recall_t2i},
                        {"best_recall_i2t", s.best_recall_i2t},
                        {"best_recall_t2i", s.best_recall_t2i},
                        {"final_alignment_acc", s.final_alignment_acc},
                        {"epochs_to_threshold", s.epochs_to_threshold},
                        {"seconds", s.seconds}});
    final_i2t.push_back(s.final_recall_i2t);
    final_t2i.push_back(s.final_recall_t2i);
    best_i2t.push_back(s.best_recall_i2t);
    final_align.push_back(s.final_alignment_acc);
    to_threshold.push_back(static_cast<double>(s.epochs_to_threshold));
    seconds.push_back(s.seconds);
  }
  doc["seeds"] = per_seed;
  doc["aggregate"] = {{"final_recall_i2t", mean_std(final_i2t)},
                      {"final_recall_t2i", mean_std(final_t2i)},
                      {"best_recall_i2t", mean_std(best_i2t)},
                      {"final_alignment_acc", mean_std(final_align)},
                      {"epochs_to_threshold", mean_std(to_threshold)},
                      {"seconds", {{"mean", mean_of(seconds)},
                                   {"total", mean_of(seconds) * static_cast<double>(seconds.size())}}}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path);
}

void append_sweep_rows(const ExperimentConfig& cfg, const std::vector<RunRecord>& records,
                       const std::string& path, bool write_header) {
  std::ofstream out(path, write_header ? std::ios::binary : std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const auto fields = config_fields(cfg);
  if (write_header) {
    std::string header;
    for (const auto& [key, value] : fields) {
      header += key;
      header += ",";
    }
    out << header << csv_header();
  }
  std::string prefix;
  for (const auto& [key, value] : fields) {
    prefix += value;
    prefix += ",";
  }
  for (const RunRecord& rec : records) {
    for (const EpochMetrics& em : rec.epochs) out << prefix << csv_row(rec, em);
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace simcon
