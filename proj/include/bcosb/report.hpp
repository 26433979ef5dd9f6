/* Copyright 2026 the bcosb authors */
/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bcosb/config.hpp"
#include "bcosb/solver.hpp"
#include "bcosb/version.hpp"

namespace bcosb {

/// Shortest-round-trip style formatting; identical doubles always print the
/// same bytes, which is what the CSV determinism contract rests on.
inline std::string format_g(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

struct RunPoint {
    WeightVector w;
    SolveResult res;
    std::string label;  // non-empty for table rows
};

struct RunOutputs {
    std::vector<RunPoint> points;       // rows of rate_region.csv
    std::vector<RunPoint> table_rows;   // encode-order comparison, stdout only
    std::size_t covariance_point = 0;   // index into points for the Q spectrum
    double wall_time_s = 0.0;
};

namespace detail {

inline SolveResult solve_one(const ChannelTensor& ch, const NoiseSpec& noise, const ToneGrid& grid,
                             const BandPlan& bands, const WeightVector& w,
                             const PowerBudget& budget, const SolverParams& params) {
    return budget.kind == PowerBudget::Kind::Total
               ? solve_total_power(ch, noise, grid, bands, w, budget, params)
               : solve_per_modem(ch, noise, grid, bands, w, budget, params);
}

/// "User k first" in the two-row table means user k is encoded first, i.e.
/// decoded last in the dual uplink.
inline std::string encode_first_label(const SolveResult& res) {
    return "User " + std::to_string(res.order.back() + 1) + " first";
}

}  // namespace detail

/// Solve each weight vector in sequence, warm-starting the multiplier search
/// from the previous point. With table mode on (two users, equal weights),
/// both encoding orders are solved for the stdout comparison table.
inline RunOutputs run_points(const RunConfig& cfg, const std::vector<WeightVector>& weights) {
    const auto t0 = std::chrono::steady_clock::now();
    const ChannelTensor ch = cfg.make_channel();
    const NoiseSpec noise = cfg.make_noise();
    const PowerBudget budget = cfg.make_budget(ch.n_tx);
    SolverParams params = cfg.make_solver_params();

    RunOutputs out;
    for (const auto& w : weights) {
        if (w.size() != ch.n_users())
            throw ConfigError("weights: " + std::to_string(w.size()) + " entries but the channel has " +
                              std::to_string(ch.n_users()) + " users");
        SolveResult r = detail::solve_one(ch, noise, cfg.grid, cfg.bands, w, budget, params);
        if (params.warm_start) {
            if (budget.kind == PowerBudget::Kind::Total)
                params.lambda_init =
                    std::clamp(r.lambda_scalar, params.lambda_min, params.lambda_max);
            else
                params.lambda_init_vec = r.lambda.lambda;
        }
        out.points.push_back({w, std::move(r), ""});
    }

    // Covariance spectrum follows the most balanced point (closest to equal
    // weights), matching the equal-priority setting of the reference plots.
    double best = 1e300;
    for (std::size_t i = 0; i < out.points.size(); ++i) {
        const auto& w = out.points[i].w;
        double spread = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j)
            for (std::size_t k = j + 1; k < w.size(); ++k)
                spread = std::max(spread, std::abs(w[j] - w[k]));
        if (spread < best) {
            best = spread;
            out.covariance_point = i;
        }
    }

    if (cfg.table && ch.n_users() == 2) {
        const WeightVector& w = out.points.front().w;
        if (std::abs(w[0] - w[1]) <= 1e-9) {
            SolverParams p = cfg.make_solver_params();
            for (const auto order : {std::vector<std::size_t>{0, 1}, {1, 0}}) {
                p.forced_order = order;
                SolveResult r = detail::solve_one(ch, noise, cfg.grid, cfg.bands, w, budget, p);
                const std::string label = detail::encode_first_label(r);
                out.table_rows.push_back({w, std::move(r), label});
            }
        }
    }

    out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

inline void write_rate_region_csv(std::ostream& os, const RunOutputs& out) {
    if (out.points.empty()) return;
    const std::size_t U = out.points.front().w.size();
    const std::size_t T = out.points.front().res.lambda.size();
    for (std::size_t j = 1; j <= U; ++j) os << "w" << j << ",";
    for (std::size_t j = 1; j <= U; ++j) os << "R" << j << "_mbps,";
    for (std::size_t t = 1; t <= T; ++t) os << "lambda_" << t << ",";
    os << "converged\n";
    for (const auto& pt : out.points) {
        for (std::size_t j = 0; j < U; ++j) os << format_g(pt.w[j]) << ",";
        for (std::size_t j = 0; j < U; ++j) os << format_g(pt.res.rates_mbps[j]) << ",";
        for (std::size_t t = 0; t < T; ++t) os << format_g(pt.res.lambda[t]) << ",";
        os << (pt.res.converged ? "true" : "false") << "\n";
    }
}

/// Downlink covariance spectrum. Diagonals are per-line PSDs (tone power over
/// spacing, in dBm/Hz); off-diagonals report magnitude in the same unit with
/// the sign of the real part in a separate column. Entries below the -400
/// dBm/Hz floor (including exact zeros) are written as -400 with sign 0.
inline void write_covariance_csv(std::ostream& os, const SolveResult& res, const ToneGrid& grid) {
    os << "tone,freq_mhz,user,m,n,value_dbm_hz,sign\n";
    const double floor_mw = psd_to_tone_power(-400.0, grid.spacing_hz);
    for (std::size_t i = 1; i <= grid.n_tones; ++i) {
        const auto& qs = res.bc.Q[i - 1];
        const std::string prefix =
            std::to_string(i) + "," + format_g(grid.tone_frequency(i) / 1e6) + ",";
        for (std::size_t j = 0; j < qs.size(); ++j) {
            const CMat& Q = qs[j];
            for (Eigen::Index m = 0; m < Q.rows(); ++m) {
                for (Eigen::Index n = 0; n < Q.cols(); ++n) {
                    const cplx v = Q(m, n);
                    const double mag = m == n ? v.real() : std::abs(v);
                    double dbm_hz = -400.0;
                    int sign = 0;
                    if (mag > floor_mw) {
                        dbm_hz = tone_power_to_psd(mag, grid.spacing_hz);
                        sign = v.real() > 0.0 ? 1 : (v.real() < 0.0 ? -1 : 0);
                    }
                    os << prefix << (j + 1) << "," << (m + 1) << "," << (n + 1) << ","
                       << format_g(dbm_hz) << "," << sign << "\n";
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Summary document
// ---------------------------------------------------------------------------

inline nlohmann::json config_echo(const RunConfig& cfg) {
    nlohmann::json j;
    j["grid"] = {{"n_tones", cfg.grid.n_tones},
                 {"spacing_hz", cfg.grid.spacing_hz},
                 {"symbol_rate_hz", cfg.grid.symbol_rate_hz},
                 {"start_hz", cfg.grid.start_hz}};
    nlohmann::json iv = nlohmann::json::array();
    for (const auto& [lo, hi] : cfg.bands.intervals) iv.push_back({lo, hi});
    j["bands"] = {{"label", cfg.bands.label}, {"intervals_hz", iv}};
    j["channel"] = {{"source", cfg.source == RunConfig::Source::Scenario ? "scenario" : "csv"},
                    {"csv_path", cfg.channel_csv},
                    {"mode", cfg.scenario.mode == ScenarioSpec::Mode::DM ? "dm" : "dm_pm"},
                    {"loop_lengths_m", cfg.scenario.loop_lengths_m},
                    {"direct_k1_db_km", cfg.scenario.direct_k1_db_km},
                    {"direct_k2_db_km", cfg.scenario.direct_k2_db_km},
                    {"fext_kappa", cfg.scenario.fext_kappa},
                    {"pm_gain_db", cfg.scenario.pm_gain_db},
                    {"velocity_mps", cfg.scenario.velocity_mps}};
    j["noise"] = {{"psd_dbm_hz", cfg.noise_psd_dbm_hz}, {"csv_path", cfg.noise_csv}};
    j["budget"] = {{"kind", cfg.budget_kind == PowerBudget::Kind::Total ? "total" : "per_modem"},
                   {"total_dbm", cfg.total_dbm},
                   {"total_mw", cfg.total_mw},
                   {"per_modem_dbm", cfg.per_modem_dbm},
                   {"per_modem_mw", cfg.per_modem_mw}};
    j["weights"] = {{"w", cfg.weight_point}, {"sweep_count", cfg.sweep_count}};
    j["solver"] = {{"eps_power_rel", cfg.solver.eps_power_rel},
                   {"lambda_init", cfg.solver.lambda_init},
                   {"step_init", cfg.solver.step_init},
                   {"step_floor", cfg.solver.step_floor},
                   {"max_outer_iters", cfg.solver.max_outer_iters},
                   {"lambda_min", cfg.solver.lambda_min},
                   {"lambda_max", cfg.solver.lambda_max},
                   {"gamma_db", cfg.solver.gamma_db},
                   {"refine", cfg.solver.refine},
                   {"refine_max_iters", cfg.solver.refine_max_iters},
                   {"grid_levels", cfg.make_psd_grid().size()},
                   {"forced_order", cfg.solver.forced_order},
                   {"jobs", cfg.solver.jobs}};
    j["output"] = {{"dir", cfg.out_dir},
                   {"rate_region", cfg.emit_rate_region},
                   {"covariance", cfg.emit_covariance},
                   {"summary", cfg.emit_summary},
                   {"table", cfg.table}};
    return j;
}

inline nlohmann::json point_json(const RunPoint& pt) {
    const SolveResult& r = pt.res;
    std::vector<double> per_modem_dbm;
    for (double p : r.per_modem_mw)
        per_modem_dbm.push_back(p > 0.0 ? mw_to_dbm(p) : -400.0);
    nlohmann::json j;
    j["w"] = pt.w.w;
    j["rates_mbps"] = r.rates_mbps;
    j["bits_per_symbol"] = r.bits;
    j["lambda"] = r.lambda.lambda;
    j["decode_order"] = r.order;
    j["per_modem_mw"] = r.per_modem_mw;
    j["per_modem_dbm"] = per_modem_dbm;
    j["objective_bits"] = r.objective;
    j["dual_value_bits"] = r.dual_value;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["budget_slack"] = r.budget_slack;
    j["comp_slack_residual"] = r.comp_slack_residual;
    j["duality"] = {{"max_rate_delta", r.duality.max_rate_delta},
                    {"max_power_delta", r.duality.max_power_delta},
                    {"passed", r.duality.passed}};
    if (!pt.label.empty()) j["label"] = pt.label;
    return j;
}

inline nlohmann::json summary_json(const RunConfig& cfg, const RunOutputs& out,
                                   const std::string& command) {
    nlohmann::json j;
    j["tool"] = "bcosb";
    j["version"] = kVersionString;
    j["command"] = command;
    j["seed"] = cfg.seed;
    j["generated_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    j["wall_time_s"] = out.wall_time_s;
    j["config"] = config_echo(cfg);
    j["points"] = nlohmann::json::array();
    for (const auto& pt : out.points) j["points"].push_back(point_json(pt));
    for (const auto& pt : out.table_rows) j["points"].push_back(point_json(pt));
    return j;
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

inline void print_order_table(std::ostream& os, const RunOutputs& out) {
    if (out.table_rows.empty()) return;
    char buf[128];
    os << "  encoding order    R1 (Mbps)    R2 (Mbps)\n";
    for (const auto& row : out.table_rows) {
        std::snprintf(buf, sizeof buf, "  %-15s %10.3f   %10.3f\n", row.label.c_str(),
                      row.res.rates_mbps[0], row.res.rates_mbps[1]);
        os << buf;
    }
}

/// Write the configured artifacts; returns 0 when every point converged and
/// 2 when some did not (partial result).
inline int emit_run_outputs(const RunConfig& cfg, const RunOutputs& out,
                            const std::string& command) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    if (cfg.emit_rate_region) {
        std::ofstream os(fs::path(cfg.out_dir) / "rate_region.csv");
        write_rate_region_csv(os, out);
    }
    if (cfg.emit_covariance && !out.points.empty()) {
        std::ofstream os(fs::path(cfg.out_dir) / "covariance_spectrum.csv");
        write_covariance_csv(os, out.points[out.covariance_point].res, cfg.grid);
    }
    if (cfg.emit_summary) {
        std::ofstream os(fs::path(cfg.out_dir) / "summary.json");
        os << summary_json(cfg, out, command).dump(2) << "\n";
    }
    int rc = 0;
    for (const auto& pt : out.points)
        if (!pt.res.converged) rc = 2;
    return rc;
}

/// One weight point from [weights].w.
inline RunOutputs run_solve(const RunConfig& cfg) {
    return run_points(cfg, {WeightVector{cfg.weight_point}});
}

/// Equal-spaced two-user weight sweep from [weights].sweep_count.
inline RunOutputs run_sweep(const RunConfig& cfg) {
    return run_points(cfg, cfg.make_sweep_weights());
}

/// Emit the synthetic channel itself (channel.csv) for external use.
inline void run_synth(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    const ChannelTensor ch = cfg.make_channel();
    fs::create_directories(cfg.out_dir);
    std::ofstream os(fs::path(cfg.out_dir) / "channel.csv");
    save_channel_csv(ch, os);
}

}  // namespace bcosb
