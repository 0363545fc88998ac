// pocl — consensus simulator command line.
//
//   pocl run --preset fairness --seed 42 --out results/
//   pocl run --config scenario.json --out results/
//   pocl calibrate --preset knn-attack
//   pocl verify --chain results/chain.txt

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pocl/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Proof-of-Collaborative-Learning consensus simulator"};
    app.require_subcommand(1);

    pocl::cli::RunOptions run_options;
    std::uint64_t seed = 0;
    std::size_t workers = 0;
    CLI::App* run = app.add_subcommand("run", "Run a simulation and write its artifacts");
    run->add_option("--preset", run_options.preset,
                    "Scenario preset: baseline-even, fairness, knn-attack");
    run->add_option("--config", run_options.config_path, "JSON scenario config file");
    CLI::Option* seed_opt = run->add_option("--seed", seed, "Override the config seed");
    CLI::Option* workers_opt =
        run->add_option("--workers", workers, "Worker threads for miner computation");
    run->add_option("--out", run_options.out_dir, "Output directory (created if missing)")
        ->capture_default_str();

    pocl::cli::CalibrateOptions cal_options;
    CLI::App* calibrate =
        app.add_subcommand("calibrate", "Suggest deadlines from the scenario's cost model");
    calibrate->add_option("--preset", cal_options.preset, "Scenario preset");
    calibrate->add_option("--config", cal_options.config_path, "JSON scenario config file");
    calibrate->add_option("--safety", cal_options.safety_factor, "Deadline safety factor")
        ->capture_default_str();

    std::string chain_path;
    CLI::App* verify = app.add_subcommand("verify", "Recompute and check a chain dump");
    verify->add_option("--chain", chain_path, "Chain dump written by `pocl run`")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        if (seed_opt->count() > 0) run_options.seed = seed;
        if (workers_opt->count() > 0) run_options.workers = workers;
        return pocl::cli::cmd_run(run_options, std::cout, std::cerr);
    }
    if (calibrate->parsed()) {
        return pocl::cli::cmd_calibrate(cal_options, std::cout, std::cerr);
    }
    if (verify->parsed()) {
        return pocl::cli::cmd_verify(chain_path, std::cout, std::cerr);
    }
    return pocl::cli::kExitConfigError;
}
