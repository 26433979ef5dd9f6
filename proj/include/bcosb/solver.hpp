/*
 * Copyright 2026 the bcosb authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "bcosb/channel.hpp"
#include "bcosb/duality.hpp"
#include "bcosb/errors.hpp"
#include "bcosb/linalg.hpp"
#include "bcosb/rates.hpp"
#include "bcosb/threading.hpp"
#include "bcosb/units.hpp"

namespace bcosb {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct SolverParams {
    /// Candidate per-user tone powers in mW, strictly ascending, starting at 0.
    /// The top level doubles as the per-user trace cap during refinement, so
    /// the "unpriced" optimum stays bounded when a budget is slack.
    std::vector<double> psd_grid;
    bool refine = true;
    double eps_power_rel = 1e-3;
    double lambda_init = 1.0;
    std::vector<double> lambda_init_vec;  // per-modem warm start; empty = lambda_init
    double step_init = 2.0;
    double step_floor = 1.0 + 1e-6;
    std::size_t max_outer_iters = 500;
    double lambda_min = 1e-12;
    double lambda_max = 1e12;
    double gamma_db = 0.0;  // SNR gap, reporting only; the solver rejects != 0
    unsigned jobs = 1;
    std::size_t refine_max_iters = 400;
    double refine_tol = 1e-9;
    /// Force a decode order (0-based users); empty derives it from the
    /// weights. Concave-refinement guarantees hold for ascending-weight
    /// orders, which includes either order under equal weights.
    std::vector<std::size_t> forced_order;
    bool warm_start = false;  // sweep_rate_region: seed lambda from prior point

    /// {0} followed by 40 log-spaced tone powers spanning -120..-40 dBm/Hz.
    static std::vector<double> default_grid(double spacing_hz) {
        const double lo = psd_to_tone_power(-120.0, spacing_hz);
        const double hi = psd_to_tone_power(-40.0, spacing_hz);
        std::vector<double> g = {0.0};
        for (int k = 0; k < 40; ++k) g.push_back(lo * std::pow(hi / lo, k / 39.0));
        return g;
    }

    void validate() const {
        if (psd_grid.empty()) throw ConfigError("SolverParams: psd_grid is empty");
        if (psd_grid.front() != 0.0) throw ConfigError("SolverParams: psd_grid must start at 0");
        for (std::size_t k = 1; k < psd_grid.size(); ++k)
            if (!(psd_grid[k] > psd_grid[k - 1]) || !std::isfinite(psd_grid[k]))
                throw ConfigError("SolverParams: psd_grid must be strictly ascending and finite");
        if (!(eps_power_rel > 0.0 && eps_power_rel < 0.1))
            throw ConfigError("SolverParams: eps_power_rel must lie in (0, 0.1)");
        if (!(step_init > 1.0)) throw ConfigError("SolverParams: step_init must exceed 1");
        if (!(step_floor > 1.0)) throw ConfigError("SolverParams: step_floor must exceed 1");
        if (!(lambda_min > 0.0 && lambda_min < lambda_max))
            throw ConfigError("SolverParams: need 0 < lambda_min < lambda_max");
        if (!(lambda_init >= lambda_min && lambda_init <= lambda_max))
            throw ConfigError("SolverParams: lambda_init outside lambda bounds");
        if (!(refine_tol > 0.0)) throw ConfigError("SolverParams: refine_tol must be positive");
    }
};

// ---------------------------------------------------------------------------
// Per-tone Lagrangian maximization
// ---------------------------------------------------------------------------

struct ToneSolution {
    std::vector<CMat> S;        // per-user MAC covariances
    std::vector<double> rates;  // bits/symbol, user-indexed
    double lagrangian = 0.0;    // sum_j w_j b_j - price * power
    double power = 0.0;         // total trace
};

namespace detail {

/// Weighted-sum coefficients over the decode order: the objective telescopes
/// into sum_p c_p log2 det(T_p) with c_0 = w_{d0} and c_p = w_{dp} - w_{dp-1},
/// all nonnegative when the order is ascending in weight.
inline std::vector<double> order_coefficients(const WeightVector& w,
                                              const std::vector<std::size_t>& order) {
    std::vector<double> c(order.size());
    for (std::size_t p = 0; p < order.size(); ++p)
        c[p] = w[order[p]] - (p ? w[order[p - 1]] : 0.0);
    return c;
}

/// Objective value for given covariances; optionally captures every T_p for
/// the gradient pass. T_p = I + sum_{q >= p} H^H S H over the decode order.
inline double tone_objective(const std::vector<CMat>& H, const std::vector<CMat>& S,
                             const std::vector<std::size_t>& order, const std::vector<double>& c,
                             double price, std::vector<CMat>* T_out) {
    const Eigen::Index n = H[order[0]].cols();
    CMat T = CMat::Identity(n, n);
    double f = 0.0, power = 0.0;
    for (std::size_t p = order.size(); p-- > 0;) {
        const std::size_t j = order[p];
        T.noalias() += H[j].adjoint() * S[j] * H[j];
        linalg::hermitianize(T);
        if (T_out) (*T_out)[p] = T;
        f += c[p] * linalg::log2_det_hpd(T);
        power += S[j].diagonal().real().sum();
    }
    return f - price * power;
}

/// Project onto {S >= 0, trace(S) <= cap}: clamp the spectrum, then rescale
/// if the trace still exceeds the cap.
inline CMat project_capped(const CMat& S, double cap) {
    CMat P = linalg::project_psd(S);
    double tr = P.diagonal().real().sum();
    if (tr > cap) P *= cap / tr;
    return P;
}

/// Projected gradient ascent on the concave per-tone objective, starting from
/// the grid winner. Accepts only improving steps, so the grid value is a
/// floor. Gradient wrt S_j: (1/ln2) sum_{p <= pos_j} c_p H_j T_p^{-1} H_j^H
/// minus price * I.
inline void refine_tone(const std::vector<CMat>& H, std::vector<CMat>& S,
                        const std::vector<std::size_t>& order, const std::vector<double>& c,
                        double price, const SolverParams& params) {
    const std::size_t U = order.size();
    const double cap = params.psd_grid.back();
    std::vector<CMat> T(U), grads(U);
    double f = tone_objective(H, S, order, c, price, &T);
    double t = 1.0 / (1.0 + price);

    for (std::size_t iter = 0; iter < params.refine_max_iters; ++iter) {
        // prefix[p] = sum_{q <= p} c_q T_q^{-1}
        const Eigen::Index n = H[order[0]].cols();
        CMat prefix = CMat::Zero(n, n);
        double s_norm = 0.0;
        for (std::size_t p = 0; p < U; ++p) {
            const std::size_t j = order[p];
            if (c[p] != 0.0) {
                prefix.noalias() += c[p] * T[p].llt().solve(CMat::Identity(n, n));
                linalg::hermitianize(prefix);
            }
            const Eigen::Index r = H[j].rows();
            grads[j] = (1.0 / std::numbers::ln2) * (H[j] * prefix * H[j].adjoint()) -
                       price * CMat::Identity(r, r);
            linalg::hermitianize(grads[j]);
            s_norm = std::max(s_norm, S[j].norm());
        }

        // Unit-step gradient mapping is an exact stationarity certificate on
        // the projected concave problem.
        double pg = 0.0;
        for (std::size_t j = 0; j < U; ++j)
            pg = std::max(pg, (project_capped(S[j] + grads[j], cap) - S[j]).norm());
        if (pg <= params.refine_tol * (1.0 + s_norm)) break;

        bool accepted = false;
        std::vector<CMat> cand(U), T_cand(U);
        while (t > 1e-18) {
            for (std::size_t j = 0; j < U; ++j) cand[j] = project_capped(S[j] + t * grads[j], cap);
            double f_new = tone_objective(H, cand, order, c, price, &T_cand);
            if (f_new > f) {
                S.swap(cand);
                T.swap(T_cand);
                f = f_new;
                t = std::min(t * 2.0, 1e9);
                accepted = true;
                break;
            }
            t *= 0.25;
        }
        if (!accepted) break;
    }
}

}  // namespace detail

/// Maximize sum_j w_j b_j - price * sum_j trace(S_j) on one tone. The grid
/// stage enumerates per-user trace levels with isotropic covariances,
/// evaluated incrementally with the last-decoded user outermost; ties resolve
/// to the lower total power, then the lexicographically smallest level tuple
/// in user order. Refinement (if enabled) then runs a projected concave
/// ascent that can reshape the matrices but never lowers the objective.
inline ToneSolution per_tone_lagrangian_max(const std::vector<CMat>& H, const WeightVector& w,
                                            double price, const SolverParams& params,
                                            std::size_t tone = 0) {
    w.validate();
    if (params.psd_grid.empty()) throw ConfigError("per_tone_lagrangian_max: empty grid");
    if (!(price > 0.0) || !std::isfinite(price))
        throw InvalidArgument("per_tone_lagrangian_max: price must be positive");
    const std::size_t U = H.size();
    if (w.size() != U) throw InvalidArgument("per_tone_lagrangian_max: weight count mismatch");
    std::vector<std::size_t> order =
        params.forced_order.empty() ? order_from_weights(w) : params.forced_order;
    detail::check_permutation(order, U);
    const std::vector<double> c = detail::order_coefficients(w, order);

    const Eigen::Index n_tx = H[0].cols();
    std::vector<CMat> gram(U);
    for (std::size_t j = 0; j < U; ++j) {
        if (H[j].cols() != n_tx)
            throw InvalidArgument("per_tone_lagrangian_max: channel width mismatch");
        gram[j] = H[j].adjoint() * H[j];
        linalg::hermitianize(gram[j]);
    }

    const auto& g = params.psd_grid;
    double best_L = -std::numeric_limits<double>::infinity();
    double best_power = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> cur(U, 0), best_idx(U, 0);

    auto consider = [&](double L, double power) {
        bool better = false;
        if (L > best_L) {
            better = true;
        } else if (L == best_L) {
            std::vector<std::size_t> by_user(U);
            for (std::size_t p = 0; p < U; ++p) by_user[order[p]] = cur[p];
            std::vector<std::size_t> best_by_user(U);
            for (std::size_t p = 0; p < U; ++p) best_by_user[order[p]] = best_idx[p];
            better = power < best_power ||
                     (power == best_power &&
                      std::lexicographical_compare(by_user.begin(), by_user.end(),
                                                   best_by_user.begin(), best_by_user.end()));
        }
        if (better) {
            best_L = L;
            best_power = power;
            best_idx = cur;
        }
    };

    // Depth-first over decode positions, last-decoded outermost, reusing the
    // accumulated T of the enclosing levels.
    auto enumerate = [&](auto&& self, std::size_t p, const CMat& T_next, double acc,
                         double power) -> void {
        const std::size_t j = order[p];
        const double r = static_cast<double>(H[j].rows());
        for (std::size_t k = 0; k < g.size(); ++k) {
            cur[p] = k;
            const double s = g[k];
            CMat T = T_next + (s / r) * gram[j];
            linalg::hermitianize(T);
            double acc2 = acc + c[p] * linalg::log2_det_hpd(T) - price * s;
            if (p == 0)
                consider(acc2, power + s);
            else
                self(self, p - 1, T, acc2, power + s);
        }
    };
    try {
        enumerate(enumerate, U - 1, CMat::Identity(n_tx, n_tx), 0.0, 0.0);
    } catch (const NumericalFailure& e) {
        throw NumericalFailure(std::string("per_tone_lagrangian_max: ") + e.what(), tone);
    }

    ToneSolution sol;
    sol.S.resize(U);
    for (std::size_t p = 0; p < U; ++p) {
        const std::size_t j = order[p];
        const Eigen::Index r = H[j].rows();
        sol.S[j] = (g[best_idx[p]] / static_cast<double>(r)) * CMat::Identity(r, r);
    }
    if (params.refine) detail::refine_tone(H, sol.S, order, c, price, params);

    sol.rates = mac_sic_rates(H, sol.S, order);
    sol.power = 0.0;
    for (const auto& s : sol.S) sol.power += s.diagonal().real().sum();
    sol.lagrangian = weighted_sum(sol.rates, w) - price * sol.power;
    return sol;
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct SolveResult {
    MacCovarianceSet mac;    // every tone; zeros outside the band plan
    BcCovarianceSet bc;      // every tone; zeros outside the band plan
    MultiplierVector lambda; // per-modem multipliers (uniform for total power)
    double lambda_scalar = 0.0;
    std::vector<std::size_t> order;  // decode order used
    std::vector<double> bits;        // per-user bits/symbol over active tones
    std::vector<double> rates_mbps;
    std::vector<double> per_modem_mw;
    double objective = 0.0;   // achieved weighted rate sum (bits/symbol)
    double dual_value = 0.0;  // sum of tone Lagrangian maxima + priced budget
    std::size_t iterations = 0;
    DualityReport duality;
    bool converged = false;
    bool budget_slack = false;
    double comp_slack_residual = 0.0;  // max_t |lambda_t (P_t - budget_t)|
};

struct RateRegionPoint {
    WeightVector w;
    std::vector<double> mbps;
    MultiplierVector lambda;
    bool converged = false;
};

struct WaterfillingResult {
    BcCovarianceSet bc;  // every tone; single user
    double bits = 0.0;
    double rate_mbps = 0.0;
    double power_mw = 0.0;
    double water_level = 0.0;
};

namespace detail {

struct Evaluation {
    std::vector<ToneSolution> tones;  // one per active tone
    double lagrangian_sum = 0.0;
    double weighted_bits = 0.0;
    double total_power = 0.0;
};

/// Solve every active tone at one price; the reduction runs in ascending tone
/// order so totals are independent of the worker schedule.
inline Evaluation evaluate_tones(const std::vector<std::vector<CMat>>& blocks,
                                 const std::vector<std::size_t>& tone_ids, const WeightVector& w,
                                 double price, const SolverParams& params) {
    Evaluation ev;
    ev.tones.resize(blocks.size());
    parallel_for(blocks.size(), params.jobs, [&](std::size_t i) {
        ev.tones[i] = per_tone_lagrangian_max(blocks[i], w, price, params, tone_ids[i]);
    });
    for (const auto& sol : ev.tones) {
        ev.lagrangian_sum += sol.lagrangian;
        ev.weighted_bits += weighted_sum(sol.rates, w);
        ev.total_power += sol.power;
    }
    return ev;
}

inline std::vector<std::vector<CMat>> active_blocks(const ChannelTensor& ch,
                                                    const std::vector<std::size_t>& active) {
    std::vector<std::vector<CMat>> blocks(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
        blocks[i].resize(ch.n_users());
        for (std::size_t j = 0; j < ch.n_users(); ++j)
            blocks[i][j] = ch.user_block(active[i] - 1, j);
    }
    return blocks;
}

inline std::vector<std::vector<CMat>> rescale_blocks(std::vector<std::vector<CMat>> blocks,
                                                     const std::vector<double>& lam) {
    for (auto& tone : blocks)
        for (auto& H : tone)
            for (Eigen::Index t = 0; t < H.cols(); ++t) H.col(t) /= std::sqrt(lam[t]);
    return blocks;
}

/// Expand active-tone covariances to full-grid sets with zeros elsewhere.
inline void fill_covariance_sets(const ChannelTensor& ch, const std::vector<std::size_t>& active,
                                 const Evaluation& ev, const std::vector<std::vector<CMat>>& bc_q,
                                 SolveResult& out) {
    const std::size_t U = ch.n_users();
    out.mac.S.assign(ch.n_tones, {});
    out.bc.Q.assign(ch.n_tones, {});
    for (std::size_t i = 0; i < ch.n_tones; ++i) {
        out.mac.S[i].resize(U);
        out.bc.Q[i].resize(U);
        for (std::size_t j = 0; j < U; ++j) {
            const Eigen::Index r = ch.user_rows[j].size();
            out.mac.S[i][j] = CMat::Zero(r, r);
            out.bc.Q[i][j] = CMat::Zero(ch.n_tx, ch.n_tx);
        }
    }
    for (std::size_t i = 0; i < active.size(); ++i) {
        out.mac.S[active[i] - 1] = ev.tones[i].S;
        out.bc.Q[active[i] - 1] = bc_q[i];
    }
    out.bits.assign(U, 0.0);
    for (const auto& sol : ev.tones)
        for (std::size_t j = 0; j < U; ++j) out.bits[j] += sol.rates[j];
}

inline double clamp_lambda(double v, const SolverParams& p) {
    return std::min(std::max(v, p.lambda_min), p.lambda_max);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Total power constraint
// ---------------------------------------------------------------------------

/// Outer search on the scalar multiplier: raise lambda when over budget,
/// lower it when under, shrink the multiplicative step to its square root on
/// every direction reversal, and stop on power balance, a slack budget at the
/// lambda floor, or step exhaustion. The reported state is the best feasible
/// iterate seen.
inline SolveResult solve_total_power(const ChannelTensor& channel, const NoiseSpec& noise,
                                     const ToneGrid& grid, const BandPlan& plan,
                                     const WeightVector& w, const PowerBudget& budget,
                                     const SolverParams& params) {
    params.validate();
    w.validate();
    if (budget.kind != PowerBudget::Kind::Total)
        throw InvalidArgument("solve_total_power: budget must be Total");
    if (params.gamma_db != 0.0)
        throw InvalidArgument("solve_total_power: the optimizer requires a 0 dB SNR gap");
    if (w.size() != channel.n_users())
        throw InvalidArgument("solve_total_power: weight count must equal user count");
    const double Ptot = budget.total_mw;

    const ChannelTensor wh = whiten(channel, noise, grid);
    const auto active = active_tones(grid, plan);
    const auto blocks = detail::active_blocks(wh, active);
    const std::vector<std::size_t> order =
        params.forced_order.empty() ? order_from_weights(w) : params.forced_order;

    SolveResult res;
    res.order = order;

    double lam = detail::clamp_lambda(params.lambda_init, params);
    double step = params.step_init;
    int prev_dir = 0;
    bool tol_met = false, slack = false;

    struct Best {
        bool has = false, feasible = false;
        double lam = 0.0, mismatch = 0.0;
        detail::Evaluation ev;
    } best;

    std::size_t iters = 0;
    while (iters < params.max_outer_iters) {
        ++iters;
        auto ev = active.empty() ? detail::Evaluation{}
                                 : detail::evaluate_tones(blocks, active, w, lam, params);
        const double P = ev.total_power;
        const double mismatch = std::abs(P - Ptot);
        const bool feasible = P <= Ptot * (1.0 + params.eps_power_rel);
        const int dir = P > Ptot ? 1 : -1;
        // An under-budget iterate at the lambda floor means the constraint is
        // slack; its evaluation wins outright so the reported multiplier is
        // the KKT-consistent floor value.
        const bool at_floor = dir < 0 && lam <= params.lambda_min * (1.0 + 1e-9);
        if (!best.has || at_floor || (feasible && !best.feasible) ||
            (feasible == best.feasible && mismatch < best.mismatch)) {
            best = {true, feasible, lam, mismatch, std::move(ev)};
        }
        if (mismatch <= params.eps_power_rel * Ptot) {
            tol_met = true;
            break;
        }
        if (at_floor) {
            slack = true;  // budget cannot be reached even unpriced
            break;
        }
        if (prev_dir != 0 && dir != prev_dir) step = std::sqrt(step);
        if (step <= params.step_floor) break;
        lam = detail::clamp_lambda(dir > 0 ? lam * step : lam / step, params);
        prev_dir = dir;
    }

    const auto& ev = best.ev;
    std::vector<std::vector<CMat>> bc_q(active.size());
    for (std::size_t i = 0; i < active.size(); ++i)
        bc_q[i] = mac_to_bc(blocks[i], ev.tones[i].S, order, active[i]);
    detail::fill_covariance_sets(wh, active, ev, bc_q, res);

    res.lambda_scalar = best.lam;
    res.lambda = MultiplierVector::uniform(channel.n_tx, best.lam);
    res.rates_mbps = rates_to_mbps(res.bits, grid.symbol_rate_hz);
    res.per_modem_mw = per_modem_power(res.bc);
    res.objective = weighted_sum(res.bits, w);
    res.dual_value = ev.lagrangian_sum + best.lam * Ptot;
    res.iterations = iters;
    res.budget_slack = slack;
    res.comp_slack_residual = std::abs(best.lam * (ev.total_power - Ptot));
    res.converged = tol_met || (slack && best.feasible) || active.empty();
    // The total-power transform needs no precoder, so the audit runs at unit
    // multipliers; the constraint multiplier is reported separately.
    res.duality = verify_duality(wh, MultiplierVector::ones(channel.n_tx), res.mac, res.bc, order);
    return res;
}

// ---------------------------------------------------------------------------
// Per-modem total power constraints
// ---------------------------------------------------------------------------

/// Cyclic multiplier sweeps (descending modem index). Each adjustment prices
/// the rescaled channel at unit trace cost, maps the tone optima through the
/// duality transform, and compares the resulting per-line powers against the
/// budgets. A modem is left alone when it is balanced, slack at the lambda
/// floor, or out of step range; a full pass with no change terminates.
inline SolveResult solve_per_modem(const ChannelTensor& channel, const NoiseSpec& noise,
                                   const ToneGrid& grid, const BandPlan& plan,
                                   const WeightVector& w, const PowerBudget& budget,
                                   const SolverParams& params) {
    params.validate();
    w.validate();
    if (budget.kind != PowerBudget::Kind::PerModem)
        throw InvalidArgument("solve_per_modem: budget must be PerModem");
    if (budget.per_modem_mw.size() != channel.n_tx)
        throw InvalidArgument("solve_per_modem: budget length must equal n_tx");
    if (params.gamma_db != 0.0)
        throw InvalidArgument("solve_per_modem: the optimizer requires a 0 dB SNR gap");
    if (w.size() != channel.n_users())
        throw InvalidArgument("solve_per_modem: weight count must equal user count");
    const std::size_t T = channel.n_tx;
    const std::vector<double>& B = budget.per_modem_mw;

    const ChannelTensor wh = whiten(channel, noise, grid);
    const auto active = active_tones(grid, plan);
    const auto blocks = detail::active_blocks(wh, active);
    const std::vector<std::size_t> order =
        params.forced_order.empty() ? order_from_weights(w) : params.forced_order;

    std::vector<double> lam(T, detail::clamp_lambda(params.lambda_init, params));
    if (!params.lambda_init_vec.empty()) {
        if (params.lambda_init_vec.size() != T)
            throw ConfigError("solve_per_modem: lambda_init_vec length must equal n_tx");
        for (std::size_t t = 0; t < T; ++t)
            lam[t] = detail::clamp_lambda(params.lambda_init_vec[t], params);
    }
    std::vector<double> step(T, params.step_init);
    std::vector<int> prev_dir(T, 0);

    struct PmEval {
        detail::Evaluation ev;
        std::vector<std::vector<CMat>> q;  // BC covariances per active tone
        std::vector<double> power;         // per-line
    };
    std::size_t evals = 0;
    auto evaluate = [&](const std::vector<double>& lamv) {
        ++evals;
        PmEval pe;
        auto scaled = detail::rescale_blocks(blocks, lamv);
        pe.ev = active.empty() ? detail::Evaluation{}
                               : detail::evaluate_tones(scaled, active, w, 1.0, params);
        pe.q.resize(active.size());
        pe.power.assign(T, 0.0);
        for (std::size_t i = 0; i < active.size(); ++i) {
            pe.q[i] = mac_to_bc(scaled[i], pe.ev.tones[i].S, order, active[i]);
            for (auto& qj : pe.q[i])
                for (Eigen::Index m = 0; m < qj.rows(); ++m) {
                    for (Eigen::Index n = 0; n < qj.cols(); ++n)
                        qj(m, n) /= std::sqrt(lamv[m] * lamv[n]);
                }
            for (const auto& qj : pe.q[i])
                for (std::size_t t = 0; t < T; ++t) pe.power[t] += qj(t, t).real();
        }
        return pe;
    };

    std::optional<PmEval> cache;
    auto current = [&]() -> const PmEval& {
        if (!cache) cache = evaluate(lam);
        return *cache;
    };

    for (std::size_t pass = 0; pass < params.max_outer_iters; ++pass) {
        bool changed = false;
        for (std::size_t t = T; t-- > 0;) {
            const double residual = current().power[t] - B[t];
            if (std::abs(residual) <= params.eps_power_rel * B[t]) continue;
            const int dir = residual > 0 ? 1 : -1;
            if (dir < 0 && lam[t] <= params.lambda_min * (1.0 + 1e-9)) continue;  // slack
            if (prev_dir[t] != 0 && dir != prev_dir[t]) step[t] = std::sqrt(step[t]);
            if (step[t] <= params.step_floor) continue;
            lam[t] = detail::clamp_lambda(dir > 0 ? lam[t] * step[t] : lam[t] / step[t], params);
            prev_dir[t] = dir;
            cache.reset();
            changed = true;
        }
        if (!changed) break;
    }

    const PmEval& fin = current();
    SolveResult res;
    res.order = order;
    detail::fill_covariance_sets(wh, active, fin.ev, fin.q, res);
    res.lambda = MultiplierVector{lam};
    res.lambda_scalar = 0.0;
    res.rates_mbps = rates_to_mbps(res.bits, grid.symbol_rate_hz);
    res.per_modem_mw = fin.power;
    res.objective = weighted_sum(res.bits, w);
    res.dual_value = fin.ev.lagrangian_sum;
    for (std::size_t t = 0; t < T; ++t) res.dual_value += lam[t] * B[t];
    res.iterations = evals;

    bool ok = true, any_slack = false;
    double cs = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double residual = fin.power[t] - B[t];
        const bool feasible = fin.power[t] <= B[t] * (1.0 + params.eps_power_rel);
        const bool balanced = std::abs(residual) <= params.eps_power_rel * B[t];
        const bool slack = residual < 0 && lam[t] <= params.lambda_min * (1.0 + 1e-9);
        ok = ok && feasible && (balanced || slack);
        any_slack = any_slack || slack;
        cs = std::max(cs, std::abs(lam[t] * residual));
    }
    res.converged = ok || active.empty();
    res.budget_slack = any_slack;
    res.comp_slack_residual = cs;
    res.duality = verify_duality(wh, res.lambda, res.mac, res.bc, order);
    return res;
}

// ---------------------------------------------------------------------------
// Rate-region sweep
// ---------------------------------------------------------------------------

inline std::vector<RateRegionPoint> sweep_rate_region(
    const ChannelTensor& channel, const NoiseSpec& noise, const ToneGrid& grid,
    const BandPlan& plan, const std::vector<WeightVector>& weights, const PowerBudget& budget,
    const SolverParams& params) {
    if (weights.empty()) throw InvalidArgument("sweep_rate_region: no weight vectors");
    std::vector<RateRegionPoint> points;
    SolverParams p = params;
    for (const auto& w : weights) {
        SolveResult r = budget.kind == PowerBudget::Kind::Total
                            ? solve_total_power(channel, noise, grid, plan, w, budget, p)
                            : solve_per_modem(channel, noise, grid, plan, w, budget, p);
        if (params.warm_start) {
            if (budget.kind == PowerBudget::Kind::Total)
                p.lambda_init = std::clamp(r.lambda_scalar, p.lambda_min, p.lambda_max);
            else
                p.lambda_init_vec = r.lambda.lambda;
        }
        points.push_back({w, r.rates_mbps, r.lambda, r.converged});
    }
    return points;
}

// ---------------------------------------------------------------------------
// Single-user SVD waterfilling oracle
// ---------------------------------------------------------------------------

/// Closed-form baseline: waterfill the total budget over every singular-value
/// subchannel of the active tones (bisection on the water level to 1e-10
/// relative power balance) and assemble covariances from the right singular
/// vectors. Expects an already-whitened single-user channel.
inline WaterfillingResult svd_waterfilling_single_user(const ChannelTensor& whitened,
                                                       const PowerBudget& budget,
                                                       const ToneGrid& grid,
                                                       const BandPlan& plan) {
    if (whitened.n_users() != 1)
        throw InvalidArgument("svd_waterfilling_single_user: exactly one user required");
    if (budget.kind != PowerBudget::Kind::Total)
        throw InvalidArgument("svd_waterfilling_single_user: budget must be Total");
    const double P = budget.total_mw;
    const auto active = active_tones(grid, plan);

    struct Sub {
        std::size_t tone_idx;  // into `active`
        double gain;
    };
    std::vector<Sub> subs;
    std::vector<CMat> V(active.size());
    std::vector<std::vector<double>> gains(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
        const CMat& H = whitened.tones[active[i] - 1];
        Eigen::JacobiSVD<CMat> svd(H, Eigen::ComputeThinV);
        V[i] = svd.matrixV();
        for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
            const double g = svd.singularValues()(k) * svd.singularValues()(k);
            gains[i].push_back(g);
            if (g > 0.0) subs.push_back({i, g});
        }
    }

    WaterfillingResult out;
    out.bc.Q.assign(whitened.n_tones, {CMat::Zero(whitened.n_tx, whitened.n_tx)});
    if (subs.empty()) return out;

    auto power_at = [&](double mu) {
        double s = 0.0;
        for (const auto& sub : subs) s += std::max(0.0, mu - 1.0 / sub.gain);
        return s;
    };
    double inv_max = 0.0;
    for (const auto& sub : subs) inv_max = std::max(inv_max, 1.0 / sub.gain);
    double lo = 0.0, hi = P + inv_max, mu = hi;
    for (int it = 0; it < 200; ++it) {
        mu = 0.5 * (lo + hi);
        const double pw = power_at(mu);
        if (std::abs(pw - P) <= 1e-10 * P) break;
        (pw > P ? hi : lo) = mu;
    }
    out.water_level = mu;

    for (std::size_t i = 0; i < active.size(); ++i) {
        CMat& Q = out.bc.Q[active[i] - 1][0];
        for (std::size_t k = 0; k < gains[i].size(); ++k) {
            const double g = gains[i][k];
            if (g <= 0.0) continue;
            const double p = std::max(0.0, mu - 1.0 / g);
            if (p == 0.0) continue;
            Q += p * (V[i].col(k) * V[i].col(k).adjoint());
            out.bits += std::log2(1.0 + g * p);
            out.power_mw += p;
        }
        linalg::hermitianize(Q);
    }
    out.rate_mbps = grid.symbol_rate_hz * out.bits / 1e6;
    return out;
}

}  // namespace bcosb
