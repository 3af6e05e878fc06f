#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "simcon/config.hpp"

namespace simcon {

// Command implementations behind the CLI. Each returns the process exit
// code for success (0) or verification failure (1); config and usage
// problems are raised as ConfigError / UsageError and mapped to exit code 2
// by the entry point, other failures to 3.

int cmd_gradcheck(std::uint64_t seed, std::size_t instances, bool inject_fault,
                  std::ostream& out);

int cmd_oracle_diff(std::size_t trials, std::uint64_t seed, std::ostream& out);

int cmd_train(ExperimentConfig cfg, std::ostream& out);

int cmd_sweep(ExperimentConfig base, const std::string& axis,
              const std::vector<std::string>& values, std::ostream& out);

// Applies CLI overrides on top of a parsed config file, all through the
// config entry parser so value validation is shared.
void apply_overrides(ExperimentConfig& cfg, const std::optional<std::string>& out_dir,
                     const std::optional<std::string>& seeds_csv,
                     const std::vector<std::string>& set_entries);

}  // namespace simcon
