#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pocl/sim.hpp"

namespace pocl::cli {

/// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitSimAborted = 2;
inline constexpr int kExitVerifyFailed = 3;

/// Built-in scenario presets:
///   baseline-even  10 honest miners, even data split
///   fairness       10 honest miners, miners 6-10 hold 4x the data
///   knn-attack     fairness roster with miners 1 and 6 adversarial
std::vector<std::string> preset_names();
sim::SimConfig preset_config(const std::string& name);

/// Loads a JSON config file (see README for the schema). Every field has a
/// default taken from the `fairness` preset's base, so small files work.
/// Unknown keys and type errors raise ConfigError with line/column info.
sim::SimConfig load_config_file(const std::string& path);
sim::SimConfig parse_config_text(const std::string& text, const std::string& origin);

struct RunOptions {
    std::string preset;               // exactly one of preset/config_path
    std::string config_path;
    std::optional<std::uint64_t> seed; // overrides the config seed
    std::optional<std::size_t> workers;
    std::string out_dir = "out";
};

/// Runs the simulation and writes metrics.csv, rounds.txt, chain.txt and
/// summary.txt into out_dir. Returns an exit code; diagnostics go to `err`.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct CalibrateOptions {
    std::string preset;
    std::string config_path;
    double safety_factor = 1.5;
};

/// Prints mean/max simulated train and forward costs over the roster plus
/// suggested model/prediction deadlines (mean cost times the safety
/// factor). Costs are the noiseless cost-model values.
int cmd_calibrate(const CalibrateOptions& options, std::ostream& out, std::ostream& err);

/// Re-parses a chain dump, recomputes every hash, and exits 0 iff the chain
/// verifies. Failures name the offending block height.
int cmd_verify(const std::string& chain_path, std::ostream& out, std::ostream& err);

} // namespace pocl::cli
