#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "simcon/commands.hpp"
#include "simcon/config.hpp"
#include "simcon/errors.hpp"
#include "simcon/reporting.hpp"

using namespace simcon;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("simcon_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  return path;
}

std::string tiny_config_text(const std::string& loss) {
  return "loss_kind = " + loss +
         "\n"
         "classes = 4\n"
         "train_samples = 64\n"
         "eval_samples = 16\n"
         "image_dim = 8\n"
         "text_dim = 6\n"
         "embed_dim = 5\n"
         "image_hidden_dims = 10\n"
         "text_hidden_dims = 10\n"
         "batch_size = 16\n"
         "epochs = 2\n"
         "warmup_epochs = 1\n"
         "learn_tau = false\n";
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("SIMCON_CLI");
  REQUIRE(cli != nullptr);
  const std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config files parse with comments, blanks, and repeated keys") {
  const fs::path dir = temp_dir("parse");
  const fs::path file = write_file(dir / "exp.conf",
                                   "# comment line\n"
                                   "loss_kind = mv_simcon\n"
                                   "\n"
                                   "epochs = 12\n"
                                   "tau_init = 0.3   # trailing comment\n"
                                   "seeds = 1, 2, 3\n"
                                   "epochs = 9\n");
  const ExperimentConfig cfg = parse_config_file(file.string());
  CHECK(cfg.loss_kind == LossKind::kMvSimCon);
  CHECK(cfg.epochs == 9);  // last assignment wins
  CHECK(cfg.tau_init == doctest::Approx(0.3));
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(cfg.multiple_views());
  CHECK(cfg.ncs_enabled());
  CHECK(cfg.joint_positives());
  fs::remove_all(dir);
}

TEST_CASE("parse errors carry the offending line number") {
  const fs::path dir = temp_dir("badkey");
  const fs::path file = write_file(dir / "exp.conf",
                                   "loss_kind = simcon\n"
                                   "no_such_key = 1\n");
  try {
    parse_config_file(file.string());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("no_such_key") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("config validation rejects missing and contradictory settings") {
  ExperimentConfig cfg;
  CHECK_THROWS_AS(validate(cfg), ConfigError);  // loss_kind never set

  apply_config_entry(cfg, "loss_kind", "infonce");
  CHECK_NOTHROW(validate(cfg));
  CHECK_FALSE(cfg.multiple_views());
  CHECK_FALSE(cfg.ncs_enabled());
  CHECK_FALSE(cfg.joint_positives());

  apply_config_entry(cfg, "use_multiple_views", "true");
  CHECK_THROWS_AS(validate(cfg), ConfigError);

  ExperimentConfig bad;
  apply_config_entry(bad, "loss_kind", "simcon");
  apply_config_entry(bad, "tau_init", "0.0");
  CHECK_THROWS_AS(validate(bad), ConfigError);

  ExperimentConfig batch;
  apply_config_entry(batch, "loss_kind", "simcon");
  apply_config_entry(batch, "batch_size", "100");
  apply_config_entry(batch, "train_samples", "50");
  CHECK_THROWS_AS(validate(batch), ConfigError);
}

TEST_CASE("unparseable values name the key") {
  ExperimentConfig cfg;
  CHECK_THROWS_AS(apply_config_entry(cfg, "epochs", "three"), ConfigError);
  CHECK_THROWS_AS(apply_config_entry(cfg, "loss_kind", "triplet"), ConfigError);
  CHECK_THROWS_AS(apply_config_entry(cfg, "learn_tau", "maybe"), ConfigError);
}

TEST_CASE("mv ablation flags can disable individual ingredients") {
  ExperimentConfig cfg;
  apply_config_entry(cfg, "loss_kind", "mv_simcon");
  apply_config_entry(cfg, "use_joint_positives", "false");
  validate(cfg);
  CHECK(cfg.multiple_views());
  CHECK(cfg.ncs_enabled());
  CHECK_FALSE(cfg.joint_positives());
}

TEST_CASE("config hash ignores seeds and out_dir but tracks real fields") {
  ExperimentConfig a;
  apply_config_entry(a, "loss_kind", "simcon");
  validate(a);
  ExperimentConfig b = a;
  b.seeds = {7, 8, 9};
  b.out_dir = "/tmp/elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);

  ExperimentConfig c = a;
  apply_config_entry(c, "tau_init", "0.21");
  validate(c);
  CHECK(config_hash(a) != config_hash(c));

  const std::string canon = canonical_config_string(a);
  CHECK(canon.find("seeds") == std::string::npos);
  CHECK(canon.find("out_dir") == std::string::npos);
  CHECK(canon.find("loss_kind") != std::string::npos);
}

TEST_CASE("apply_overrides routes seeds and set entries through the parser") {
  ExperimentConfig cfg;
  apply_config_entry(cfg, "loss_kind", "simcon");
  apply_overrides(cfg, std::string("/tmp/somewhere"), std::string("4,5"),
                  {"epochs=7", "tau_init=0.5"});
  CHECK(cfg.out_dir == "/tmp/somewhere");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(cfg.epochs == 7);
  CHECK(cfg.tau_init == doctest::Approx(0.5));
  CHECK_THROWS_AS(apply_overrides(cfg, std::nullopt, std::nullopt, {"epochs"}), UsageError);
}

TEST_CASE("cmd_train writes one csv per seed plus a summary") {
  const fs::path dir = temp_dir("train");
  ExperimentConfig cfg = parse_config_file(
      write_file(dir / "exp.conf", tiny_config_text("simcon")).string());
  apply_overrides(cfg, (dir / "out").string(), std::string("1,2"), {});
  validate(cfg);

  std::ostringstream log;
  CHECK(cmd_train(cfg, log) == 0);

  const fs::path csv1 = dir / "out" / "metrics_seed1.csv";
  const fs::path csv2 = dir / "out" / "metrics_seed2.csv";
  REQUIRE(fs::exists(csv1));
  REQUIRE(fs::exists(csv2));
  REQUIRE(fs::exists(dir / "out" / "summary.json"));

  std::ifstream in(csv1);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line + "\n" == csv_header());
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == cfg.epochs);

  const nlohmann::json summary = nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(summary.at("config").at("loss_kind") == "simcon");
  CHECK(summary.at("seeds").size() == 2);
  CHECK(summary.at("aggregate").contains("final_recall_i2t"));

  // Identical reruns must reproduce the metrics files byte for byte.
  const std::string before = slurp(csv1);
  ExperimentConfig again = cfg;
  std::ostringstream log2;
  CHECK(cmd_train(again, log2) == 0);
  CHECK(slurp(csv1) == before);

  fs::remove_all(dir);
}

TEST_CASE("csv header matches the documented column list") {
  std::string joined;
  for (const std::string& c : csv_columns()) {
    if (!joined.empty()) joined += ",";
    joined += c;
  }
  CHECK(csv_header() == joined + "\n");
  CHECK(csv_columns().front() == "config_hash");
  for (const std::string& c : csv_columns()) CHECK(c != "seconds");
}

TEST_CASE("cmd_sweep expands the ablation ladder and appends one csv") {
  const fs::path dir = temp_dir("sweep");
  ExperimentConfig base = parse_config_file(
      write_file(dir / "exp.conf", tiny_config_text("mv_simcon")).string());
  apply_overrides(base, (dir / "out").string(), std::string("1"), {"epochs=1"});
  validate(base);

  std::ostringstream log;
  CHECK(cmd_sweep(base, "ablation", {}, log) == 0);
  const fs::path sweep_csv = dir / "out" / "sweep.csv";
  REQUIRE(fs::exists(sweep_csv));
  std::ifstream in(sweep_csv);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 6);  // header + one row per ladder rung

  ExperimentConfig base2 = base;
  base2.out_dir = (dir / "out2").string();
  std::ostringstream log2;
  CHECK(cmd_sweep(base2, "batch_size", {"8", "16"}, log2) == 0);
  std::ifstream in2(dir / "out2" / "sweep.csv");
  lines = 0;
  while (std::getline(in2, line)) ++lines;
  CHECK(lines == 3);

  std::ostringstream sink;
  CHECK_THROWS_AS(cmd_sweep(base, "optimizer", {"adam"}, sink), UsageError);
  CHECK_THROWS_AS(cmd_sweep(base, "loss", {}, sink), UsageError);
  fs::remove_all(dir);
}

TEST_CASE("cli exit codes distinguish usage, config, and success") {
  const fs::path dir = temp_dir("cli");
  CHECK(run_cli("") == 2);
  CHECK(run_cli("train") == 2);  // --config is required
  CHECK(run_cli("train --config " + (dir / "missing.conf").string()) == 2);

  write_file(dir / "bad.conf", "loss_kind = simcon\nepochs = -3\n");
  CHECK(run_cli("train --config " + (dir / "bad.conf").string() + " --out " +
                (dir / "out").string()) == 2);

  write_file(dir / "ok.conf", tiny_config_text("infonce"));
  CHECK(run_cli("train --config " + (dir / "ok.conf").string() + " --out " +
                (dir / "out").string() + " --seeds 1") == 0);
  CHECK(fs::exists(dir / "out" / "metrics_seed1.csv"));

  CHECK(run_cli("gradcheck --seed 3 --instances 2") == 0);
  CHECK(run_cli("gradcheck --instances 0") == 2);
  CHECK(run_cli("oracle-diff --trials 5 --seed 1") == 0);
  CHECK(run_cli("sweep --config " + (dir / "ok.conf").string() + " --axis nope --out " +
                (dir / "outs").string()) == 2);
  fs::remove_all(dir);
}
