/* Copyright 2026 the bcosb authors */
/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bcosb/channel.hpp"
#include "bcosb/errors.hpp"
#include "bcosb/solver.hpp"
#include "bcosb/units.hpp"

namespace bcosb {

/// Named band plans. "vdsl2_down" is the downstream FDD pair used by the
/// default scenario; "wideband" opens the whole 0-30 MHz range; "all" places
/// no restriction.
inline BandPlan band_preset(const std::string& name) {
    if (name == "vdsl2_down")
        return BandPlan{{{138e3, 3.75e6}, {5.2e6, 8.5e6}}, "vdsl2_down"};
    if (name == "wideband") return BandPlan{{{0.0, 30e6}}, "wideband"};
    if (name == "all") return BandPlan{{{0.0, 1e300}}, "all"};
    throw ConfigError("bands.preset: unknown preset '" + name +
                      "' (expected vdsl2_down, wideband, or all)");
}

/// Fully resolved run description. Everything has a workable default, so an
/// empty document is a valid config (DM 2x2 scenario, per-line budgets).
struct RunConfig {
    enum class Source { Scenario, Csv };

    ToneGrid grid{2048, 4312.5, 4000.0, 0.0};
    BandPlan bands = band_preset("vdsl2_down");

    Source source = Source::Scenario;
    ScenarioSpec scenario;
    std::string channel_csv;
    std::size_t rows_per_user = 1;  // regrouping for CSV channels

    double noise_psd_dbm_hz = -140.0;
    std::string noise_csv;

    PowerBudget::Kind budget_kind = PowerBudget::Kind::PerModem;
    double total_dbm = 29.0;  // joint two-modem budget, stored as given
    double total_mw = 0.0;    // overrides total_dbm when > 0
    std::vector<double> per_modem_dbm = {14.5};  // scalar replicates per line
    std::vector<double> per_modem_mw;            // overrides per_modem_dbm

    std::vector<double> weight_point = {0.5, 0.5};
    std::size_t sweep_count = 11;

    SolverParams solver;
    std::vector<double> psd_grid_dbm_hz;  // explicit levels; else min/max/levels
    double grid_min_dbm_hz = -120.0;
    double grid_max_dbm_hz = -40.0;
    std::size_t grid_levels = 40;
    bool grid_explicit = false;

    std::string out_dir = "out";
    bool emit_rate_region = true;
    bool emit_covariance = true;
    bool emit_summary = true;
    bool table = false;
    std::uint64_t seed = 0;

    /// Candidate tone powers for the solver: always level 0 plus strictly
    /// ascending PSD levels converted at the configured spacing.
    std::vector<double> make_psd_grid() const {
        std::vector<double> levels = psd_grid_dbm_hz;
        if (!grid_explicit) {
            levels.clear();
            if (grid_levels < 2) throw ConfigError("solver.grid_levels must be >= 2");
            if (!(grid_min_dbm_hz < grid_max_dbm_hz))
                throw ConfigError("solver.grid_min_dbm_hz must be below grid_max_dbm_hz");
            for (std::size_t k = 0; k < grid_levels; ++k)
                levels.push_back(grid_min_dbm_hz + (grid_max_dbm_hz - grid_min_dbm_hz) *
                                                       static_cast<double>(k) /
                                                       static_cast<double>(grid_levels - 1));
        }
        std::vector<double> g = {0.0};
        for (double dbm_hz : levels) g.push_back(psd_to_tone_power(dbm_hz, grid.spacing_hz));
        std::sort(g.begin(), g.end());
        return g;
    }

    /// Materialized solver parameters (the PSD grid needs the tone spacing).
    SolverParams make_solver_params() const {
        SolverParams p = solver;
        p.psd_grid = make_psd_grid();
        p.validate();
        return p;
    }

    /// Budget resolved against the channel width; scalar per-line defaults
    /// replicate, explicit vectors must match n_tx.
    PowerBudget make_budget(std::size_t n_tx) const {
        if (budget_kind == PowerBudget::Kind::Total)
            return PowerBudget::total(total_mw > 0.0 ? total_mw : dbm_to_mw(total_dbm));
        std::vector<double> mw = per_modem_mw;
        if (mw.empty()) {
            std::vector<double> dbm = per_modem_dbm;
            if (dbm.size() == 1) dbm.assign(n_tx, dbm[0]);
            for (double d : dbm) mw.push_back(dbm_to_mw(d));
        }
        if (mw.size() == 1) mw.assign(n_tx, mw[0]);
        if (mw.size() != n_tx)
            throw ConfigError("budget: per-modem vector has " + std::to_string(mw.size()) +
                              " entries but the channel has " + std::to_string(n_tx) +
                              " transmit lines");
        return PowerBudget::per_modem(std::move(mw));
    }

    /// Channel from the configured source. CSV channels must agree with the
    /// grid's tone count so frequency labels stay meaningful.
    ChannelTensor make_channel() const {
        ChannelTensor ch;
        if (source == Source::Scenario) {
            ch = synth_channel(scenario, grid);
        } else {
            std::ifstream in(channel_csv);
            if (!in) throw ConfigError("channel.csv_path: cannot open '" + channel_csv + "'");
            ch = load_channel_csv(in);
            if (rows_per_user > 1) {
                if (ch.n_rx % rows_per_user != 0)
                    throw ConfigError("channel.rows_per_user = " + std::to_string(rows_per_user) +
                                      " does not divide " + std::to_string(ch.n_rx) +
                                      " receive rows");
                ch.regroup(std::vector<std::size_t>(ch.n_rx / rows_per_user, rows_per_user));
            }
        }
        if (ch.n_tones != grid.n_tones)
            throw ConfigError("channel has " + std::to_string(ch.n_tones) +
                              " tones but grid.n_tones = " + std::to_string(grid.n_tones));
        return ch;
    }

    NoiseSpec make_noise() const {
        if (noise_csv.empty()) return NoiseSpec::flat(noise_psd_dbm_hz);
        std::ifstream in(noise_csv);
        if (!in) throw ConfigError("noise.csv_path: cannot open '" + noise_csv + "'");
        return load_noise_csv(in);
    }

    /// Equal-spaced weight sweep for two users: w1 = 0..1 over sweep_count
    /// points (w2 = 1 - w1).
    std::vector<WeightVector> make_sweep_weights() const {
        if (sweep_count < 2) throw ConfigError("weights.sweep_count must be >= 2");
        std::vector<WeightVector> out;
        for (std::size_t k = 0; k < sweep_count; ++k) {
            const double w1 =
                static_cast<double>(k) / static_cast<double>(sweep_count - 1);
            out.push_back(WeightVector{{w1, 1.0 - w1}});
        }
        return out;
    }

    void validate() const {
        scenario.validate();
        if (source == Source::Csv && channel_csv.empty())
            throw ConfigError("channel.source = csv requires channel.csv_path");
        if (rows_per_user < 1) throw ConfigError("channel.rows_per_user must be >= 1");
        if (weight_point.empty()) throw ConfigError("weights.w must not be empty");
        for (double w : weight_point)
            if (!(w >= 0.0)) throw ConfigError("weights.w entries must be >= 0");
        make_psd_grid();  // surfaces grid schema errors eagerly
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct IniEntry {
    std::string section, key, value;
    std::size_t line = 0;
};

/// Minimal INI reader: [section] headers, key = value pairs, '#' or ';'
/// comments. Anything else is a parse error with its line number.
inline std::vector<IniEntry> parse_ini(std::istream& in) {
    std::vector<IniEntry> entries;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3)
                throw ParseError("config: malformed section header '" + t + "'", lineno);
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("config: expected 'key = value', got '" + t + "'", lineno);
        IniEntry e;
        e.section = section;
        e.key = trim(t.substr(0, eq));
        e.value = trim(t.substr(eq + 1));
        e.line = lineno;
        if (e.section.empty())
            throw ParseError("config: key '" + e.key + "' appears before any [section]", lineno);
        if (e.key.empty()) throw ParseError("config: empty key", lineno);
        entries.push_back(std::move(e));
    }
    return entries;
}

inline ConfigError key_error(const IniEntry& e, const std::string& src, const std::string& what) {
    return ConfigError("config key '" + e.section + "." + e.key + "' at " + src + ":" +
                       std::to_string(e.line) + ": " + what);
}

inline double to_double(const IniEntry& e, const std::string& src) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(e.value, &pos);
        if (trim(e.value.substr(pos)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw key_error(e, src, "expected a number, got '" + e.value + "'");
}

inline std::size_t to_size(const IniEntry& e, const std::string& src) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(e.value, &pos);
        if (trim(e.value.substr(pos)).empty() && v >= 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw key_error(e, src, "expected a non-negative integer, got '" + e.value + "'");
}

inline bool to_bool(const IniEntry& e, const std::string& src) {
    if (e.value == "true" || e.value == "yes" || e.value == "1") return true;
    if (e.value == "false" || e.value == "no" || e.value == "0") return false;
    throw key_error(e, src, "expected a boolean (true/false), got '" + e.value + "'");
}

inline std::vector<double> to_double_list(const IniEntry& e, const std::string& src) {
    std::vector<double> out;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw key_error(e, src, "empty list entry");
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (!trim(item.substr(pos)).empty()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw key_error(e, src, "expected a number list, got '" + e.value + "'");
        }
    }
    if (out.empty()) throw key_error(e, src, "expected a non-empty number list");
    return out;
}

/// Band intervals as "lo-hi" pairs in Hz, comma separated.
inline std::vector<std::pair<double, double>> to_intervals(const IniEntry& e,
                                                           const std::string& src) {
    std::vector<std::pair<double, double>> out;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto dash = item.find('-');
        if (dash == std::string::npos)
            throw key_error(e, src, "expected 'lo-hi' interval, got '" + item + "'");
        try {
            out.emplace_back(std::stod(trim(item.substr(0, dash))),
                             std::stod(trim(item.substr(dash + 1))));
        } catch (const std::exception&) {
            throw key_error(e, src, "expected numeric interval bounds in '" + item + "'");
        }
    }
    if (out.empty()) throw key_error(e, src, "expected at least one interval");
    return out;
}

}  // namespace detail

/// Parse and fully resolve a config document. Unknown sections or keys and
/// duplicate keys are fatal, naming the key and its location.
inline RunConfig parse_config(std::istream& in, const std::string& source_name = "<config>") {
    using detail::IniEntry;
    RunConfig cfg;
    std::size_t n_tones = cfg.grid.n_tones;
    double spacing = cfg.grid.spacing_hz, symbol = cfg.grid.symbol_rate_hz,
           start = cfg.grid.start_hz;
    std::string bands_preset = "vdsl2_down";
    std::vector<std::pair<double, double>> bands_intervals;
    bool saw_per_modem_list = false;

    std::set<std::string> seen;
    for (const IniEntry& e : detail::parse_ini(in)) {
        const std::string full = e.section + "." + e.key;
        if (!seen.insert(full).second)
            throw detail::key_error(e, source_name, "duplicate key");
        const std::string& s = source_name;
        if (e.section == "grid") {
            if (e.key == "n_tones") n_tones = detail::to_size(e, s);
            else if (e.key == "spacing_hz") spacing = detail::to_double(e, s);
            else if (e.key == "symbol_rate_hz") symbol = detail::to_double(e, s);
            else if (e.key == "start_hz") start = detail::to_double(e, s);
            else throw detail::key_error(e, s, "unknown key");
        } else if (e.section == "bands") {
            if (e.key == "preset") bands_preset = e.value;
            else if (e.key == "intervals") bands_intervals = detail::to_intervals(e, s);
            else throw detail::key_error(e, s, "unknown key");
        } else if (e.section == "channel") {
            if (e.key == "source") {
                if (e.value == "scenario") cfg.source = RunConfig::Source::Scenario;
                else if (e.value == "csv") cfg.source = RunConfig::Source::Csv;
                else throw detail::key_error(e, s, "expected 'scenario' or 'csv'");
            } else if (e.key == "csv_path") cfg.channel_csv = e.value;
            else if (e.key == "rows_per_user") cfg.rows_per_user = detail::to_size(e, s);
            else if (e.key == "mode") {
                if (e.value == "dm") cfg.scenario.mode = ScenarioSpec::Mode::DM;
                else if (e.value == "dm_pm") cfg.scenario.mode = ScenarioSpec::Mode::DM_PM;
                else throw detail::key_error(e, s, "expected 'dm' or 'dm_pm'");
            } else if (e.key == "loop_lengths_m")
                cfg.scenario.loop_lengths_m = detail::to_double_list(e, s);
            else if (e.key == "direct_k1_db_km") cfg.scenario.direct_k1_db_km = detail::to_double(e, s);
            else if (e.key == "direct_k2_db_km") cfg.scenario.direct_k2_db_km = detail::to_double(e, s);
            else if (e.key == "fext_kappa") cfg.scenario.fext_kappa = detail::to_double(e, s);
            else if (e.key == "pm_gain_db") cfg.scenario.pm_gain_db = detail::to_double(e, s);
            else if (e.key == "velocity_mps") cfg.scenario.velocity_mps = detail::to_double(e, s);
            else throw detail::key_error(e, s, "unknown key");
        } else if (e.section == "noise") {
            if (e.key == "psd_dbm_hz") cfg.noise_psd_dbm_hz = detail::to_double(e, s);
            else if (e.key == "csv_path") cfg.noise_csv = e.value;
            else throw detail::key_error(e, s, "unknown key");
        } else if (e.section == "budget") {
            if (e.key == "kind") {
                if (e.value == "total") cfg.budget_kind = PowerBudget::Kind::Total;
                else if (e.value == "per_modem") cfg.budget_kind = PowerBudget::Kind::PerModem;
                else throw detail::key_error(e, s, "expected 'total' or 'per_modem'");
            } else if (e.key == "total_dbm") cfg.total_dbm = detail::to_double(e, s);
            else if (e.key == "total_mw") cfg.total_mw = detail::to_double(e, s);
            else if (e.key == "per_modem_dbm") {
                cfg.per_modem_dbm = detail::to_double_list(e, s);
                saw_per_modem_list = true;
            } else if (e.key == "per_modem_mw") {
                cfg.per_modem_mw = detail::to_double_list(e, s);
                saw_per_modem_list = true;
            } else throw detail::key_error(e, s, "unknown key");
        } else if (e.section == "weights") {
            if (e.key == "w") cfg.weight_point = detail::to_double_list(e, s);
            else if (e.key == "sweep_count") cfg.sweep_count = detail::to_size(e, s);
            else throw detail::key_error(e, s, "unknown key");
        } else if (e.section == "solver") {
            if (e.key == "eps_power_rel") cfg.solver.eps_power_rel = detail::to_double(e, s);
            else if (e.key == "lambda_init") cfg.solver.lambda_init = detail::to_double(e, s);
            else if (e.key == "step_init") cfg.solver.step_init = detail::to_double(e, s);
            else if (e.key == "step_floor") cfg.solver.step_floor = detail::to_double(e, s);
            else if (e.key == "max_outer_iters") cfg.solver.max_outer_iters = detail::to_size(e, s);
            else if (e.key == "lambda_min") cfg.solver.lambda_min = detail::to_double(e, s);
            else if (e.key == "lambda_max") cfg.solver.lambda_max = detail::to_double(e, s);
            else if (e.key == "gamma_db") cfg.solver.gamma_db = detail::to_double(e, s);
            else if (e.key == "refine") cfg.solver.refine = detail::to_bool(e, s);
            else if (e.key == "refine_max_iters")
                cfg.solver.refine_max_iters = detail::to_size(e, s);
            else if (e.key == "psd_grid_dbm_hz") {
                cfg.psd_grid_dbm_hz = detail::to_double_list(e, s);
                cfg.grid_explicit = true;
            } else if (e.key == "grid_min_dbm_hz") cfg.grid_min_dbm_hz = detail::to_double(e, s);
            else if (e.key == "grid_max_dbm_hz") cfg.grid_max_dbm_hz = detail::to_double(e, s);
            else if (e.key == "grid_levels") cfg.grid_levels = detail::to_size(e, s);
            else if (e.key == "forced_order") {
                cfg.solver.forced_order.clear();
                for (double v : detail::to_double_list(e, s)) {
                    if (v < 1.0 || v != std::floor(v))
                        throw detail::key_error(e, s, "expected 1-based user indices");
                    cfg.solver.forced_order.push_back(static_cast<std::size_t>(v) - 1);
                }
            } else throw detail::key_error(e, s, "unknown key");
        } else if (e.section == "output") {
            if (e.key == "dir") cfg.out_dir = e.value;
            else if (e.key == "rate_region") cfg.emit_rate_region = detail::to_bool(e, s);
            else if (e.key == "covariance") cfg.emit_covariance = detail::to_bool(e, s);
            else if (e.key == "summary") cfg.emit_summary = detail::to_bool(e, s);
            else if (e.key == "table") cfg.table = detail::to_bool(e, s);
            else throw detail::key_error(e, s, "unknown key");
        } else {
            throw ConfigError("config: unknown section '[" + e.section + "]' at " + source_name +
                              ":" + std::to_string(e.line));
        }
    }

    cfg.grid = ToneGrid{n_tones, spacing, symbol, start};
    cfg.bands = bands_intervals.empty() ? band_preset(bands_preset)
                                        : BandPlan{std::move(bands_intervals), "custom"};
    if (cfg.budget_kind == PowerBudget::Kind::Total && saw_per_modem_list)
        throw ConfigError("config: budget.kind = total conflicts with per-modem budget lists");
    cfg.validate();
    return cfg;
}

inline RunConfig parse_config_string(const std::string& text,
                                     const std::string& source_name = "<string>") {
    std::istringstream in(text);
    return parse_config(in, source_name);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    return parse_config(in, path);
}

}  // namespace bcosb
