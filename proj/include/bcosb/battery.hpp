/* Copyright 2026 the bcosb authors */
/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bcosb/config.hpp"
#include "bcosb/duality.hpp"
#include "bcosb/linalg.hpp"
#include "bcosb/solver.hpp"

namespace bcosb {

struct BatteryCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

inline bool all_passed(const std::vector<BatteryCheck>& checks) {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

struct BatteryOptions {
    std::size_t instances = 200;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

/// One randomized small instance: 2-3 users (occasionally two receive rows),
/// up to 4 transmit lines, up to 8 tones, unit-noise normalization so the
/// whitening step is the identity.
struct BatteryInstance {
    ChannelTensor ch;
    ToneGrid grid;
    WeightVector w;
    double budget_mw = 0.0;
};

inline BatteryInstance make_battery_instance(std::uint64_t seed, std::size_t idx) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + idx + 1);
    std::uniform_int_distribution<int> users_d(2, 3), tx_d(1, 4), tones_d(2, 8), row_d(0, 3);
    std::uniform_real_distribution<double> wd(0.1, 1.0), bd(0.4, 1.5);
    std::normal_distribution<double> nd(0.0, 1.0);

    BatteryInstance inst;
    const int U = users_d(rng), n_tx = tx_d(rng), tones = tones_d(rng);
    inst.ch.n_tones = static_cast<std::size_t>(tones);
    inst.ch.n_tx = static_cast<std::size_t>(n_tx);
    Eigen::Index row = 0;
    for (int j = 0; j < U; ++j) {
        const int rows = row_d(rng) == 0 ? 2 : 1;
        std::vector<Eigen::Index> mine;
        for (int r = 0; r < rows; ++r) mine.push_back(row++);
        inst.ch.user_rows.push_back(std::move(mine));
    }
    inst.ch.n_rx = static_cast<std::size_t>(row);
    for (int i = 0; i < tones; ++i) {
        CMat H(row, n_tx);
        for (Eigen::Index a = 0; a < row; ++a)
            for (Eigen::Index b = 0; b < n_tx; ++b)
                H(a, b) = cplx(nd(rng), nd(rng)) / std::sqrt(2.0);
        inst.ch.tones.push_back(std::move(H));
    }
    inst.ch.validate();
    inst.grid = ToneGrid{static_cast<std::size_t>(tones), 1.0, 1.0, 0.0};
    std::vector<double> w;
    for (int j = 0; j < U; ++j) w.push_back(wd(rng));
    inst.w = WeightVector{std::move(w)};
    inst.budget_mw = bd(rng) * U;
    return inst;
}

/// Solver setting used by the randomized battery: modest log-spaced grid with
/// refinement on, tight power tolerance so the measured duality gap collapses
/// to the tolerance itself.
inline SolverParams battery_params(unsigned jobs = 1) {
    SolverParams p;
    p.psd_grid = {0.0};
    for (int k = 0; k < 12; ++k)
        p.psd_grid.push_back(1e-4 * std::pow(4.0 / 1e-4, k / 11.0));
    p.refine = true;
    p.eps_power_rel = 1e-5;
    p.step_floor = 1.0 + 1e-9;
    p.max_outer_iters = 4000;
    p.jobs = jobs;
    return p;
}

/// Worst-case measurements across the battery; thresholds applied separately
/// so a report can show the observed extremes.
struct BatteryStats {
    std::size_t instances = 0, converged = 0;
    double max_gap_rel = 0.0;
    double max_rate_delta = 0.0;
    double max_power_delta = 0.0;
    double max_trace_transform = 0.0;  // trace(S~) vs trace(Q~), relative
    double max_trace_precoder = 0.0;   // sum_t lambda_t Q_tt vs trace(Q~), relative
    double min_eigenvalue = 0.0;       // most negative scaled eigenvalue seen
    double max_overshoot = 0.0;        // max over runs of P/B - 1
    std::size_t enum_checked = 0, enum_mismatches = 0;
    std::size_t failures = 0;
    std::string first_failure;
};

namespace detail {

/// Both transform identities on one result: the duality map preserves the
/// per-tone trace, and the multiplier-weighted downlink diagonal recovers the
/// transformed trace. `lam` is the precoder multiplier vector the transform
/// actually used: all ones on the total-power route, the per-line multipliers
/// on the per-modem route.
inline void accumulate_trace_identities(const SolveResult& res, const std::vector<double>& lam,
                                        BatteryStats& st) {
    for (std::size_t i = 0; i < res.mac.S.size(); ++i) {
        double ts = 0.0, tq = 0.0, weighted = 0.0;
        for (const auto& S : res.mac.S[i]) ts += S.diagonal().real().sum();
        for (const auto& Q : res.bc.Q[i]) {
            for (std::size_t t = 0; t < lam.size(); ++t) {
                const double qtt = Q(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t)).real();
                tq += lam[t] * qtt;        // trace of Q~ = Lambda^(1/2) Q Lambda^(1/2)
                weighted += lam[t] * qtt;  // multiplier-weighted downlink diagonal
            }
        }
        const double denom = std::max(1.0, ts);
        st.max_trace_transform = std::max(st.max_trace_transform, std::abs(ts - tq) / denom);
        st.max_trace_precoder =
            std::max(st.max_trace_precoder, std::abs(weighted - tq) / std::max(1.0, tq));
    }
}

inline void accumulate_min_eig(const SolveResult& res, BatteryStats& st) {
    for (const auto& tone : res.mac.S)
        for (const auto& S : tone) {
            const double scale = std::max(1.0, S.norm());
            st.min_eigenvalue = std::min(st.min_eigenvalue, linalg::min_eigenvalue(S) / scale);
        }
    for (const auto& tone : res.bc.Q)
        for (const auto& Q : tone) {
            const double scale = std::max(1.0, Q.norm());
            st.min_eigenvalue = std::min(st.min_eigenvalue, linalg::min_eigenvalue(Q) / scale);
        }
}

/// Independent odometer enumeration of the per-user level tuples with the
/// published tie-break (higher value, then lower power, then lexicographically
/// smaller tuple in user order). T_p sums are rebuilt from scratch per tuple.
inline bool enumeration_agrees(const std::vector<CMat>& H, const WeightVector& w, double price,
                               const SolverParams& params) {
    SolverParams off = params;
    off.refine = false;
    const ToneSolution dfs = per_tone_lagrangian_max(H, w, price, off);

    const std::size_t U = H.size();
    const auto order = order_from_weights(w);
    const auto c = order_coefficients(w, order);
    const Eigen::Index n = H[0].cols();
    const auto& g = off.psd_grid;

    std::vector<std::size_t> idx(U, 0), best(U, 0);
    double best_L = -std::numeric_limits<double>::infinity(), best_power = 0.0;
    bool done = false;
    while (!done) {
        double power = 0.0;
        for (std::size_t j = 0; j < U; ++j) power += g[idx[j]];
        double L = -price * power;
        CMat T = CMat::Identity(n, n);
        for (std::size_t p = U; p-- > 0;) {
            const std::size_t j = order[p];
            const double r = static_cast<double>(H[j].rows());
            T += (g[idx[j]] / r) * (H[j].adjoint() * H[j]);
            linalg::hermitianize(T);
            L += c[p] * linalg::log2_det_hpd(T);
        }
        if (L > best_L ||
            (L == best_L && (power < best_power ||
                             (power == best_power &&
                              std::lexicographical_compare(idx.begin(), idx.end(), best.begin(),
                                                           best.end()))))) {
            best_L = L;
            best_power = power;
            best = idx;
        }
        // odometer advance, last user fastest
        std::size_t j = U;
        while (j-- > 0) {
            if (++idx[j] < g.size()) break;
            idx[j] = 0;
            if (j == 0) done = true;
        }
    }

    for (std::size_t j = 0; j < U; ++j) {
        const double r = static_cast<double>(H[j].rows());
        const CMat expect = (g[best[j]] / r) * CMat::Identity(H[j].rows(), H[j].rows());
        if ((dfs.S[j] - expect).norm() != 0.0) return false;
    }
    return std::abs(dfs.lagrangian - best_L) <= 1e-9 * std::max(1.0, std::abs(best_L));
}

}  // namespace detail

/// Run the randomized battery and record worst-case measurements. Each
/// instance is solved under a total power budget (duality gap, duality audit,
/// feasibility, PSD) and briefly under per-modem budgets (multiplier-weighted
/// trace identities away from unit multipliers).
inline BatteryStats run_battery_stats(const BatteryOptions& opt) {
    BatteryStats st;
    st.instances = opt.instances;
    const NoiseSpec noise = NoiseSpec::flat(0.0);
    const BandPlan plan{{{0.0, 1e300}}, "all"};
    for (std::size_t i = 0; i < opt.instances; ++i) {
        const BatteryInstance inst = make_battery_instance(opt.seed, i);
        try {
            SolverParams params = battery_params(opt.jobs);
            const auto res = solve_total_power(inst.ch, noise, inst.grid, plan, inst.w,
                                               PowerBudget::total(inst.budget_mw), params);
            if (res.converged) ++st.converged;
            const double gap = std::abs(res.dual_value - res.objective) /
                               std::max(1.0, std::abs(res.objective));
            st.max_gap_rel = std::max(st.max_gap_rel, gap);
            st.max_rate_delta = std::max(st.max_rate_delta, res.duality.max_rate_delta);
            st.max_power_delta = std::max(st.max_power_delta, res.duality.max_power_delta);
            double total = 0.0;
            for (double p : res.per_modem_mw) total += p;
            st.max_overshoot = std::max(st.max_overshoot, total / inst.budget_mw - 1.0);
            detail::accumulate_trace_identities(res, std::vector<double>(inst.ch.n_tx, 1.0), st);
            detail::accumulate_min_eig(res, st);

            SolverParams pm_params = params;
            pm_params.max_outer_iters = 4;  // identities hold at any multipliers
            const auto pm = solve_per_modem(
                inst.ch, noise, inst.grid, plan, inst.w,
                PowerBudget::per_modem(
                    std::vector<double>(inst.ch.n_tx, inst.budget_mw / inst.ch.n_tx)),
                pm_params);
            st.max_rate_delta = std::max(st.max_rate_delta, pm.duality.max_rate_delta);
            st.max_power_delta = std::max(st.max_power_delta, pm.duality.max_power_delta);
            detail::accumulate_trace_identities(pm, pm.lambda.lambda, st);
            detail::accumulate_min_eig(pm, st);

            if (i % 5 == 0) {
                std::vector<CMat> H;
                for (std::size_t j = 0; j < inst.ch.n_users(); ++j)
                    H.push_back(inst.ch.user_block(0, j));
                for (double price : {0.6, 1.7}) {
                    ++st.enum_checked;
                    if (!detail::enumeration_agrees(H, inst.w, price, params))
                        ++st.enum_mismatches;
                }
            }
        } catch (const std::exception& e) {
            ++st.failures;
            if (st.first_failure.empty())
                st.first_failure = "instance " + std::to_string(i) + ": " + e.what();
        }
    }
    return st;
}

namespace detail {

inline std::string fmt_sci(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

inline void push_check(std::vector<BatteryCheck>& out, const std::string& name, bool ok,
                       const std::string& detail) {
    out.push_back({name, ok, detail});
}

}  // namespace detail

/// Map battery measurements onto named pass/fail lines.
inline std::vector<BatteryCheck> battery_checks(const BatteryStats& st) {
    using detail::fmt_sci;
    std::vector<BatteryCheck> out;
    detail::push_check(out, "battery-exceptions", st.failures == 0,
                       st.failures == 0 ? "no solver failures" : st.first_failure);
    detail::push_check(out, "battery-converged", st.converged == st.instances,
                       std::to_string(st.converged) + "/" + std::to_string(st.instances) +
                           " instances converged");
    detail::push_check(out, "battery-duality-gap", st.max_gap_rel <= 1e-4,
                       "max relative gap " + fmt_sci(st.max_gap_rel) + " (limit 1e-4)");
    detail::push_check(out, "battery-rate-duality", st.max_rate_delta <= 1e-8,
                       "max per-user rate delta " + fmt_sci(st.max_rate_delta) + " (limit 1e-8)");
    detail::push_check(out, "battery-trace-transform", st.max_trace_transform <= 1e-9,
                       "max trace delta " + fmt_sci(st.max_trace_transform) + " (limit 1e-9)");
    detail::push_check(out, "battery-trace-precoder", st.max_trace_precoder <= 1e-9,
                       "max weighted-diagonal delta " + fmt_sci(st.max_trace_precoder) +
                           " (limit 1e-9)");
    detail::push_check(out, "battery-psd", st.min_eigenvalue >= -1e-10,
                       "min scaled eigenvalue " + fmt_sci(st.min_eigenvalue) + " (limit -1e-10)");
    detail::push_check(out, "battery-feasibility", st.max_overshoot <= 1e-5 * (1.0 + 1e-6),
                       "max budget overshoot " + fmt_sci(st.max_overshoot) + " (limit 1e-5)");
    detail::push_check(out, "battery-enumeration",
                       st.enum_checked > 0 && st.enum_mismatches == 0,
                       std::to_string(st.enum_checked - st.enum_mismatches) + "/" +
                           std::to_string(st.enum_checked) + " grid searches matched");
    return out;
}

/// Full validation: the configured instance end to end, a waterfilling oracle
/// cross-check, a negative control that must fail, and the randomized battery.
inline std::vector<BatteryCheck> run_validation(const RunConfig& cfg, const BatteryOptions& opt) {
    std::vector<BatteryCheck> out;
    using detail::fmt_sci;

    const ChannelTensor ch = cfg.make_channel();
    const NoiseSpec noise = cfg.make_noise();
    const PowerBudget budget = cfg.make_budget(ch.n_tx);
    SolverParams params = cfg.make_solver_params();
    params.jobs = opt.jobs;
    const WeightVector w{cfg.weight_point};
    const SolveResult res =
        budget.kind == PowerBudget::Kind::Total
            ? solve_total_power(ch, noise, cfg.grid, cfg.bands, w, budget, params)
            : solve_per_modem(ch, noise, cfg.grid, cfg.bands, w, budget, params);

    detail::push_check(out, "config-converged", res.converged,
                       "solver " + std::string(res.converged ? "converged" : "did not converge") +
                           " in " + std::to_string(res.iterations) + " evaluations");
    detail::push_check(out, "config-duality", res.duality.passed,
                       "max rate delta " + fmt_sci(res.duality.max_rate_delta) +
                           ", max power delta " + fmt_sci(res.duality.max_power_delta));
    bool feasible = true;
    if (budget.kind == PowerBudget::Kind::Total) {
        double total = 0.0;
        for (double p : res.per_modem_mw) total += p;
        feasible = total <= budget.total_mw * (1.0 + params.eps_power_rel);
    } else {
        for (std::size_t t = 0; t < res.per_modem_mw.size(); ++t)
            feasible = feasible && res.per_modem_mw[t] <=
                                       budget.per_modem_mw[t] * (1.0 + params.eps_power_rel);
    }
    detail::push_check(out, "config-feasible", feasible, "budget respected within eps_power_rel");
    BatteryStats one;
    detail::accumulate_min_eig(res, one);
    detail::push_check(out, "config-psd", one.min_eigenvalue >= -1e-10,
                       "min scaled eigenvalue " + fmt_sci(one.min_eigenvalue));

    // Negative control: a 1% covariance perturbation must trip the audit.
    {
        const ChannelTensor wh = whiten(ch, noise, cfg.grid);
        BcCovarianceSet bad = res.bc;
        std::size_t tone = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < bad.Q.size(); ++i) {
            double tr = 0.0;
            for (const auto& Q : bad.Q[i]) tr += Q.diagonal().real().sum();
            if (tr > best) {
                best = tr;
                tone = i;
            }
        }
        bool tripped = false;
        if (best > 0.0) {
            bad.Q[tone][0] *= 1.01;
            const MultiplierVector lam = budget.kind == PowerBudget::Kind::Total
                                             ? MultiplierVector::ones(ch.n_tx)
                                             : res.lambda;
            tripped = !verify_duality(wh, lam, res.mac, bad, res.order).passed;
        }
        detail::push_check(out, "negative-control", tripped,
                           "1% covariance perturbation flagged by the duality audit");
    }

    // Single-user oracle: the solver against closed-form SVD waterfilling.
    {
        const BatteryInstance inst = make_battery_instance(opt.seed, 1000003);
        ChannelTensor single;
        single.n_tones = inst.ch.n_tones;
        single.n_tx = inst.ch.n_tx;
        single.n_rx = inst.ch.user_rows[0].size();
        single.user_rows = {inst.ch.user_rows[0]};
        for (const auto& H : inst.ch.tones)
            single.tones.push_back(H.topRows(inst.ch.user_rows[0].size()));
        single.validate();
        const NoiseSpec unit = NoiseSpec::flat(0.0);
        const BandPlan plan{{{0.0, 1e300}}, "all"};
        SolverParams bp = battery_params(opt.jobs);
        bp.eps_power_rel = 1e-6;
        const double P = 2.0;
        const auto sres = solve_total_power(single, unit, inst.grid, plan, WeightVector{{1.0}},
                                            PowerBudget::total(P), bp);
        const auto wf = svd_waterfilling_single_user(single, PowerBudget::total(P), inst.grid, plan);
        const double rel = std::abs(sres.bits[0] - wf.bits) / std::max(1.0, wf.bits);
        detail::push_check(out, "waterfilling-oracle", sres.converged && rel <= 1e-6,
                           "relative rate delta " + fmt_sci(rel) + " (limit 1e-6)");
    }

    const auto battery = battery_checks(run_battery_stats(opt));
    out.insert(out.end(), battery.begin(), battery.end());
    return out;
}

}  // namespace bcosb
