#include "simcon/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

#include <nlohmann/json.hpp>

#include "simcon/errors.hpp"
#include "simcon/gradcheck.hpp"
#include "simcon/losses.hpp"
#include "simcon/oracle.hpp"
#include "simcon/reporting.hpp"
#include "simcon/rng.hpp"
#include "simcon/synthdata.hpp"
#include "simcon/trainer.hpp"

namespace simcon {

namespace {

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    out += (std::isalnum(static_cast<unsigned char>(c)) != 0) ? c : '_';
  }
  return out;
}

void export_run_params(const TrainResult& res, const std::string& path) {
  nlohmann::json doc;
  doc["image_encoder"] = flatten_parameters(res.image_encoder);
  doc["text_encoder"] = flatten_parameters(res.text_encoder);
  doc["head"] = flatten_parameters(res.head.net);
  doc["tau"] = res.tau;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << doc.dump() << "\n";
}

std::vector<RunRecord> run_seeds(const ExperimentConfig& cfg, std::ostream& log) {
  std::vector<RunRecord> records;
  for (std::uint64_t seed : cfg.seeds) {
    log << "[train] " << to_string(cfg.loss_kind) << " seed " << seed << "\n";
    TrainResult res = train(cfg, seed, [&log](const EpochMetrics& em) {
      char line[160];
      std::snprintf(line, sizeof line,
                    "  epoch %3zu  loss %8.4f  recall@1 %.3f/%.3f  align %.3f  tau %.4f  %.1fs",
                    em.epoch, em.loss_total, em.recall_i2t, em.recall_t2i, em.alignment_acc,
                    em.tau, em.seconds);
      log << line << "\n";
    });
    const std::string dir = cfg.out_dir;
    write_metrics_csv(make_run_record(cfg, seed, res.epochs),
                      dir + "/metrics_seed" + std::to_string(seed) + ".csv");
    if (cfg.export_params) {
      export_run_params(res, dir + "/params_seed" + std::to_string(seed) + ".json");
    }
    if (cfg.export_data) {
      export_jsonl(generate_dataset(dataset_spec_for(cfg, seed)),
                   dir + "/dataset_seed" + std::to_string(seed) + ".jsonl");
    }
    records.push_back(make_run_record(cfg, seed, std::move(res.epochs)));
  }
  return records;
}

struct Variant {
  std::string label;
  ExperimentConfig cfg;
};

ExperimentConfig with_loss(const ExperimentConfig& base, LossKind kind) {
  ExperimentConfig cfg = base;
  cfg.loss_kind = kind;
  cfg.loss_kind_set = true;
  cfg.use_multiple_views.reset();
  cfg.use_ncs.reset();
  cfg.use_joint_positives.reset();
  return cfg;
}

std::vector<Variant> ablation_variants(const ExperimentConfig& base) {
  std::vector<Variant> rows;
  rows.push_back({"infonce", with_loss(base, LossKind::kInfoNce)});
  rows.push_back({"simcon", with_loss(base, LossKind::kSimCon)});
  ExperimentConfig views = with_loss(base, LossKind::kMvSimCon);
  views.use_ncs = false;
  views.use_joint_positives = false;
  rows.push_back({"simcon_views", views});
  ExperimentConfig views_ncs = with_loss(base, LossKind::kMvSimCon);
  views_ncs.use_ncs = true;
  views_ncs.use_joint_positives = false;
  rows.push_back({"simcon_views_ncs", views_ncs});
  ExperimentConfig full = with_loss(base, LossKind::kMvSimCon);
  full.use_ncs = true;
  full.use_joint_positives = true;
  rows.push_back({"mv_simcon_joint", full});
  return rows;
}

std::vector<Variant> build_variants(const ExperimentConfig& base, const std::string& axis,
                                    const std::vector<std::string>& values) {
  if (axis == "ablation") {
    std::vector<Variant> all = ablation_variants(base);
    if (values.empty()) return all;
    std::vector<Variant> picked;
    for (const std::string& v : values) {
      bool found = false;
      for (const Variant& row : all) {
        if (row.label == v) {
          picked.push_back(row);
          found = true;
        }
      }
      if (!found) {
        throw UsageError("unknown ablation row '" + v +
                         "'; rows: infonce, simcon, simcon_views, simcon_views_ncs, "
                         "mv_simcon_joint");
      }
    }
    return picked;
  }
  if (values.empty()) throw UsageError("--values is required for axis '" + axis + "'");
  std::vector<Variant> rows;
  for (const std::string& v : values) {
    ExperimentConfig cfg = base;
    if (axis == "loss") {
      cfg = with_loss(base, loss_kind_from_string(v));
    } else if (axis == "noise_rho") {
      apply_config_entry(cfg, "caption_swap_prob", v);
    } else if (axis == "batch_size") {
      apply_config_entry(cfg, "batch_size", v);
    } else {
      throw UsageError("axis must be one of loss, noise_rho, batch_size, ablation; got '" +
                       axis + "'");
    }
    rows.push_back({v, cfg});
  }
  return rows;
}

struct OracleProbe {
  std::string name;
  double max_diff = 0.0;
};

Matrix random_raw(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

}  // namespace

int cmd_gradcheck(std::uint64_t seed, std::size_t instances, bool inject_fault,
                  std::ostream& out) {
  if (instances == 0) throw UsageError("--instances must be >= 1");
  const GradCheckReport report = run_gradcheck(seed, instances, inject_fault);
  for (const GradSuiteResult& s : report.suites) {
    char line[160];
    std::snprintf(line, sizeof line, "%-20s %3zu instances  %6zu coords  worst rel %.3e  %s",
                  s.name.c_str(), s.instances, s.coordinates, s.worst_rel,
                  s.pass ? "pass" : "FAIL");
    out << line << "\n";
  }
  out << (report.pass ? "gradcheck: all suites passed\n" : "gradcheck: FAILED\n");
  return report.pass ? 0 : 1;
}

int cmd_oracle_diff(std::size_t trials, std::uint64_t seed, std::ostream& out) {
  if (trials == 0) throw UsageError("--trials must be >= 1");
  std::vector<OracleProbe> probes = {{"info_nce"}, {"simcon"}, {"mv_simcon"}, {"ncs_loss"},
                                     {"total_loss"}};
  for (std::size_t k = 0; k < trials; ++k) {
    Rng rng(mix_seed(seed, 0x51, k));
    const std::size_t batch = 1 + rng.uniform_below(16);
    const std::size_t dim = 2 + rng.uniform_below(31);
    const double tau = rng.uniform_below(2) == 0 ? 0.07 : 0.5;
    const std::size_t lam = rng.uniform_below(3);
    const double lambda = lam == 0 ? -1.0 : (lam == 1 ? 0.5 : 0.95);
    const Temperature temp{tau, true};

    const EmbeddingBatch z_i = l2_normalize_rows(random_raw(rng, batch, dim));
    const EmbeddingBatch z_t = l2_normalize_rows(random_raw(rng, batch, dim));
    const EmbeddingBatch z_2 = l2_normalize_rows(random_raw(rng, batch, dim));
    const ProjectionHead head =
        init_projection_head(mix_seed(seed, 0x52, k), dim, 2 + rng.uniform_below(7));
    const NcsSpec spec{&head};

    probes[0].max_diff =
        std::max(probes[0].max_diff, std::fabs(info_nce(z_i, z_t, temp).value -
                                               oracle::info_nce(z_i.matrix, z_t.matrix, tau)));

    const auto [p_i, p_t] = positive_masks(cosine_similarity_matrix(z_i, z_i),
                                           cosine_similarity_matrix(z_t, z_t), lambda);
    probes[1].max_diff = std::max(
        probes[1].max_diff,
        std::fabs(simcon(z_i, z_t, p_i, p_t, temp).value -
                  oracle::simcon(z_i.matrix, z_t.matrix, p_i.mask, p_t.mask, tau)));

    probes[2].max_diff = std::max(
        probes[2].max_diff,
        std::fabs(mv_simcon(z_i, z_2, z_t, temp, lambda).value -
                  oracle::mv_simcon(z_i.matrix, z_2.matrix, z_t.matrix, tau, lambda)));

    probes[3].max_diff =
        std::max(probes[3].max_diff, std::fabs(ncs_loss(z_i, z_2, spec).value -
                                               oracle::ncs(z_i.matrix, z_2.matrix, head.net)));

    probes[4].max_diff = std::max(
        probes[4].max_diff,
        std::fabs(total_loss(z_i, z_2, z_t, temp, lambda, spec).value -
                  oracle::total(z_i.matrix, z_2.matrix, z_t.matrix, tau, lambda, head.net)));
  }

  bool pass = true;
  for (const OracleProbe& p : probes) {
    const bool ok = p.max_diff < 1e-9;
    pass = pass && ok;
    char line[120];
    std::snprintf(line, sizeof line, "%-12s max |vectorized - oracle| = %.3e  %s",
                  p.name.c_str(), p.max_diff, ok ? "pass" : "FAIL");
    out << line << "\n";
  }
  out << (pass ? "oracle-diff: all losses agree\n" : "oracle-diff: FAILED\n");
  return pass ? 0 : 1;
}

int cmd_train(ExperimentConfig cfg, std::ostream& out) {
  validate(cfg);
  if (cfg.out_dir.empty()) {
    throw ConfigError("out_dir", "required for train (set in the config file or via --out)");
  }
  std::filesystem::create_directories(cfg.out_dir);
  const std::vector<RunRecord> records = run_seeds(cfg, out);
  write_summary_json(cfg, records, cfg.out_dir + "/summary.json");
  out << "wrote " << records.size() << " run(s) to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_sweep(ExperimentConfig base, const std::string& axis,
              const std::vector<std::string>& values, std::ostream& out) {
  if (base.out_dir.empty()) {
    throw ConfigError("out_dir", "required for sweep (set in the config file or via --out)");
  }
  const std::vector<Variant> variants = build_variants(base, axis, values);
  std::filesystem::create_directories(base.out_dir);
  const std::string sweep_csv = base.out_dir + "/sweep.csv";
  bool first = true;
  for (const Variant& variant : variants) {
    ExperimentConfig cfg = variant.cfg;
    cfg.out_dir = base.out_dir + "/" + axis + "_" + sanitize(variant.label);
    validate(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    out << "[sweep] " << axis << " = " << variant.label << "\n";
    const std::vector<RunRecord> records = run_seeds(cfg, out);
    write_summary_json(cfg, records, cfg.out_dir + "/summary.json");
    // flushed per run so partial sweeps leave usable results behind
    append_sweep_rows(cfg, records, sweep_csv, first);
    first = false;
  }
  out << "wrote " << sweep_csv << "\n";
  return 0;
}

void apply_overrides(ExperimentConfig& cfg, const std::optional<std::string>& out_dir,
                     const std::optional<std::string>& seeds_csv,
                     const std::vector<std::string>& set_entries) {
  if (out_dir) apply_config_entry(cfg, "out_dir", *out_dir);
  if (seeds_csv) apply_config_entry(cfg, "seeds", *seeds_csv);
  for (const std::string& entry : set_entries) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw UsageError("--set expects key=value, got '" + entry + "'");
    }
    apply_config_entry(cfg, entry.substr(0, eq), entry.substr(eq + 1));
  }
}

}  // namespace simcon
