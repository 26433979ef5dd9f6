/* Copyright 2026 the bcosb authors */
/* SPDX-License-Identifier: Apache-2.0 */

// Command-line front end: synth | solve | sweep | validate.
// Exit codes: 0 clean, 2 partial (some point did not converge), 1 failed.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bcosb/bcosb.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "configuration file (INI)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "output directory (overrides [output].dir)");
    cmd->add_option("--seed", args.seed, "random seed for validation batteries")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--jobs", args.jobs, "worker threads for per-tone solves")
        ->check(CLI::PositiveNumber);
}

bcosb::RunConfig load(const CommonArgs& args) {
    bcosb::RunConfig cfg =
        args.config_path.empty() ? bcosb::parse_config_string("") : bcosb::load_config(args.config_path);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.seed_set) cfg.seed = args.seed;
    cfg.solver.jobs = args.jobs;
    return cfg;
}

void print_points(const bcosb::RunOutputs& out) {
    for (const auto& pt : out.points) {
        std::printf("w = (");
        for (std::size_t j = 0; j < pt.w.size(); ++j)
            std::printf("%s%.3g", j ? ", " : "", pt.w[j]);
        std::printf("): ");
        for (std::size_t j = 0; j < pt.res.rates_mbps.size(); ++j)
            std::printf("%sR%zu = %.3f Mbps", j ? ", " : "", j + 1, pt.res.rates_mbps[j]);
        std::printf("  [%s]\n", pt.res.converged ? "converged" : "NOT converged");
    }
}

int run_command(const bcosb::RunConfig& cfg, const std::string& command) {
    bcosb::RunOutputs out =
        command == "sweep" ? bcosb::run_sweep(cfg) : bcosb::run_solve(cfg);
    print_points(out);
    bcosb::print_order_table(std::cout, out);
    const int rc = bcosb::emit_run_outputs(cfg, out, command);
    std::printf("artifacts written to %s (%.2f s)\n", cfg.out_dir.c_str(), out.wall_time_s);
    return rc;
}

int run_validate(const bcosb::RunConfig& cfg, std::size_t instances) {
    bcosb::BatteryOptions opt;
    opt.instances = instances;
    opt.seed = cfg.seed == 0 ? 1 : cfg.seed;
    opt.jobs = cfg.solver.jobs;
    const auto checks = bcosb::run_validation(cfg, opt);
    for (const auto& c : checks)
        std::printf("[%s] %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                    c.detail.c_str());
    return bcosb::all_passed(checks) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"optimal downstream spectra for multi-line DSL broadcast channels"};
    app.set_version_flag("--version", bcosb::kVersionString);
    app.require_subcommand(1);

    CommonArgs synth_args, solve_args, sweep_args, validate_args;
    std::size_t instances = 200;

    auto* synth = app.add_subcommand("synth", "write the synthetic channel as channel.csv");
    add_common(synth, synth_args);
    auto* solve = app.add_subcommand("solve", "optimize one weight point and emit reports");
    add_common(solve, solve_args);
    auto* sweep = app.add_subcommand("sweep", "trace the weighted rate region");
    add_common(sweep, sweep_args);
    auto* validate = app.add_subcommand("validate", "run the invariant and oracle battery");
    add_common(validate, validate_args);
    validate->add_option("--instances", instances, "random battery size");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const auto cfg = load(synth_args);
            bcosb::run_synth(cfg);
            std::printf("channel.csv written to %s\n", cfg.out_dir.c_str());
            return 0;
        }
        if (solve->parsed()) return run_command(load(solve_args), "solve");
        if (sweep->parsed()) return run_command(load(sweep_args), "sweep");
        if (validate->parsed()) return run_validate(load(validate_args), instances);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
