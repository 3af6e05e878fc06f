#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "simcon/commands.hpp"
#include "simcon/config.hpp"
#include "simcon/errors.hpp"

namespace {

simcon::ExperimentConfig load_config(const std::string& path,
                                     const std::optional<std::string>& out_dir,
                                     const std::optional<std::string>& seeds,
                                     const std::vector<std::string>& sets) {
  simcon::ExperimentConfig cfg = simcon::parse_config_file(path);
  simcon::apply_overrides(cfg, out_dir, seeds, sets);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SimCon / MV-SimCon contrastive-loss experiment harness"};
  app.require_subcommand(1);

  std::uint64_t seed = 7;
  std::size_t instances = 20;
  bool inject_fault = false;
  std::size_t trials = 100;
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::string> seeds_csv;
  std::vector<std::string> sets;
  std::string axis;
  std::string values_csv;

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "verify analytic gradients against finite differences");
  gradcheck->add_option("--seed", seed, "RNG seed for the random instances");
  gradcheck->add_option("--instances", instances, "instances per loss (default 20)");
  gradcheck->add_flag("--inject-fault", inject_fault, "corrupt one gradient (self-test)")
      ->group("");  // hidden

  CLI::App* oracle = app.add_subcommand(
      "oracle-diff", "compare vectorized losses against brute-force oracles");
  oracle->add_option("--trials", trials, "random trials per loss (default 100)");
  oracle->add_option("--seed", seed, "RNG seed for the random trials");

  CLI::App* train = app.add_subcommand("train", "run the configured experiment per seed");
  train->add_option("--config", config_path, "key=value config file")->required();
  train->add_option("--out", out_dir, "output directory (overrides out_dir)");
  train->add_option("--seeds", seeds_csv, "comma-separated seed list (overrides seeds)");
  train->add_option("--set", sets, "override any config key, key=value (repeatable)");

  CLI::App* sweep = app.add_subcommand("sweep", "run a sweep over one experiment axis");
  sweep->add_option("--config", config_path, "key=value config file")->required();
  sweep->add_option("--axis", axis, "loss | noise_rho | batch_size | ablation")->required();
  sweep->add_option("--values", values_csv, "comma-separated axis values");
  sweep->add_option("--out", out_dir, "output directory (overrides out_dir)");
  sweep->add_option("--seeds", seeds_csv, "comma-separated seed list (overrides seeds)");
  sweep->add_option("--set", sets, "override any config key, key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gradcheck->parsed()) {
      return simcon::cmd_gradcheck(seed, instances, inject_fault, std::cout);
    }
    if (oracle->parsed()) {
      return simcon::cmd_oracle_diff(trials, seed, std::cout);
    }
    if (train->parsed()) {
      return simcon::cmd_train(load_config(config_path, out_dir, seeds_csv, sets), std::cout);
    }
    if (sweep->parsed()) {
      std::vector<std::string> values;
      std::string item;
      std::stringstream ss(values_csv);
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) values.push_back(item);
      }
      return simcon::cmd_sweep(load_config(config_path, out_dir, seeds_csv, sets), axis, values,
                               std::cout);
    }
  } catch (const simcon::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const simcon::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const simcon::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
