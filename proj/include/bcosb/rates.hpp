/*
 * Copyright 2026 the bcosb authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "bcosb/errors.hpp"
#include "bcosb/linalg.hpp"

namespace bcosb {

// ---------------------------------------------------------------------------
// Weights and decode order
// ---------------------------------------------------------------------------

struct WeightVector {
    std::vector<double> w;

    std::size_t size() const { return w.size(); }
    double operator[](std::size_t j) const { return w[j]; }

    void validate() const {
        if (w.empty()) throw InvalidArgument("WeightVector: empty");
        bool any = false;
        for (double v : w) {
            if (!std::isfinite(v) || v < 0.0)
                throw InvalidArgument("WeightVector: weights must be finite and >= 0");
            any = any || v > 0.0;
        }
        if (!any) throw InvalidArgument("WeightVector: at least one weight must be positive");
    }
};

/// Decode order for the dual MAC: users sorted by ascending weight so the
/// largest-weight user is decoded last (interference-free). Ties break by
/// ascending user index. Entries are 0-based user indices.
inline std::vector<std::size_t> order_from_weights(const WeightVector& w) {
    w.validate();
    std::vector<std::size_t> order(w.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return w[a] < w[b]; });
    return order;
}

// ---------------------------------------------------------------------------
// Covariance sets
// ---------------------------------------------------------------------------

/// Dual-MAC transmit covariances: S[i][j] is r_j x r_j on tone i (0-based).
struct MacCovarianceSet {
    std::vector<std::vector<CMat>> S;

    void validate() const {
        for (const auto& tone : S)
            for (const auto& m : tone) {
                if (!linalg::is_hermitian(m)) throw InvalidArgument("MAC covariance not Hermitian");
                if (m.size() && linalg::min_eigenvalue(m) < -1e-10)
                    throw InvalidArgument("MAC covariance not PSD");
            }
    }
};

/// BC transmit covariances: Q[i][j] is n_tx x n_tx on tone i (0-based).
struct BcCovarianceSet {
    std::vector<std::vector<CMat>> Q;

    void validate() const {
        for (const auto& tone : Q)
            for (const auto& m : tone) {
                if (!linalg::is_hermitian(m)) throw InvalidArgument("BC covariance not Hermitian");
                if (m.size() && linalg::min_eigenvalue(m) < -1e-10)
                    throw InvalidArgument("BC covariance not PSD");
            }
    }
};

namespace detail {

/// Rates come out of determinant differences; tiny negative values are
/// conditioning noise, large ones are bugs.
inline double clamp_rate(double b) {
    if (b < -1e-9) throw NumericalFailure("rate below the negativity guard");
    return b < 0.0 ? 0.0 : b;
}

inline void check_permutation(const std::vector<std::size_t>& order, std::size_t n) {
    if (order.size() != n) throw InvalidArgument("order size mismatch");
    std::vector<int> seen(n, 0);
    for (auto j : order) {
        if (j >= n || seen[j]++) throw InvalidArgument("order is not a permutation");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Per-tone rates
// ---------------------------------------------------------------------------

/// Dual-MAC SIC rates on one tone. H[j] is user j's whitened channel block
/// (r_j x n_tx), S[j] its covariance, `order` the decode sequence. The user
/// decoded at position p sees interference only from users decoded after it,
/// so the last-decoded (largest-weight) user gets the clean channel:
///   b_{order[p]} = log2 det(T_p) - log2 det(T_{p+1}),
///   T_p = I + sum_{q >= p} H_{order[q]}^H S_{order[q]} H_{order[q]}.
/// Bits per symbol, user-indexed.
inline std::vector<double> mac_sic_rates(const std::vector<CMat>& H, const std::vector<CMat>& S,
                                         const std::vector<std::size_t>& order) {
    const std::size_t U = H.size();
    if (S.size() != U) throw InvalidArgument("mac_sic_rates: user count mismatch");
    detail::check_permutation(order, U);
    if (U == 0) return {};
    const Eigen::Index n_tx = H[0].cols();
    for (std::size_t j = 0; j < U; ++j) {
        if (H[j].cols() != n_tx) throw InvalidArgument("mac_sic_rates: channel width mismatch");
        if (S[j].rows() != H[j].rows() || S[j].cols() != H[j].rows())
            throw InvalidArgument("mac_sic_rates: covariance shape mismatch");
    }

    std::vector<double> b(U, 0.0);
    CMat T = CMat::Identity(n_tx, n_tx);
    double prev_ld = 0.0;  // log2 det(T_{p+1}), starting from T_U = I
    for (std::size_t p = U; p-- > 0;) {
        const std::size_t j = order[p];
        T.noalias() += H[j].adjoint() * S[j] * H[j];
        linalg::hermitianize(T);
        double ld = linalg::log2_det_hpd(T);
        b[j] = detail::clamp_rate(ld - prev_ld);
        prev_ld = ld;
    }
    return b;
}

/// BC rates under dirty-paper encoding on one tone. Q[j] is user j's
/// n_tx x n_tx covariance; `encode_order` lists users first-encoded first
/// (the reverse of the MAC decode order). The user encoded at position m has
/// the users encoded before it pre-cancelled and sees only later-encoded
/// covariances T as interference:
///   b_j = log2 det(I + H_j (Q_j + T) H_j^H) - log2 det(I + H_j T H_j^H).
inline std::vector<double> bc_dpc_rates(const std::vector<CMat>& H, const std::vector<CMat>& Q,
                                        const std::vector<std::size_t>& encode_order) {
    const std::size_t U = H.size();
    if (Q.size() != U) throw InvalidArgument("bc_dpc_rates: user count mismatch");
    detail::check_permutation(encode_order, U);
    if (U == 0) return {};
    const Eigen::Index n_tx = H[0].cols();
    for (std::size_t j = 0; j < U; ++j) {
        if (H[j].cols() != n_tx) throw InvalidArgument("bc_dpc_rates: channel width mismatch");
        if (Q[j].rows() != n_tx || Q[j].cols() != n_tx)
            throw InvalidArgument("bc_dpc_rates: covariance shape mismatch");
    }

    std::vector<double> b(U, 0.0);
    CMat T = CMat::Zero(n_tx, n_tx);  // covariances of users encoded after position m
    for (std::size_t m = U; m-- > 0;) {
        const std::size_t j = encode_order[m];
        const Eigen::Index r = H[j].rows();
        CMat noise = CMat::Identity(r, r) + H[j] * T * H[j].adjoint();
        linalg::hermitianize(noise);
        CMat signal = noise + H[j] * Q[j] * H[j].adjoint();
        linalg::hermitianize(signal);
        b[j] = detail::clamp_rate(linalg::log2_det_hpd(signal) - linalg::log2_det_hpd(noise));
        T += Q[j];
        linalg::hermitianize(T);
    }
    return b;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

inline double weighted_sum(const std::vector<double>& b, const WeightVector& w) {
    if (b.size() != w.size()) throw InvalidArgument("weighted_sum: size mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) s += w[j] * b[j];
    return s;
}

/// Mbps per user from bits/symbol totals already summed over active tones.
inline std::vector<double> rates_to_mbps(const std::vector<double>& bit_totals,
                                         double symbol_rate_hz) {
    if (!(symbol_rate_hz > 0.0)) throw InvalidArgument("rates_to_mbps: symbol rate must be > 0");
    std::vector<double> r(bit_totals.size());
    for (std::size_t j = 0; j < bit_totals.size(); ++j) {
        if (bit_totals[j] < 0.0) throw InvalidArgument("rates_to_mbps: negative bit total");
        r[j] = symbol_rate_hz * bit_totals[j] / 1e6;
    }
    return r;
}

/// Reporting-only SNR-gap variant: rates with every covariance scaled by
/// 1/gamma_lin. The optimizer itself only accepts gamma = 0 dB.
inline std::vector<double> mac_sic_rates_gap(const std::vector<CMat>& H,
                                             const std::vector<CMat>& S,
                                             const std::vector<std::size_t>& order,
                                             double gamma_db) {
    if (!std::isfinite(gamma_db)) throw InvalidArgument("mac_sic_rates_gap: gamma must be finite");
    const double gamma_lin = std::pow(10.0, gamma_db / 10.0);
    std::vector<CMat> scaled = S;
    for (auto& m : scaled) m /= gamma_lin;
    return mac_sic_rates(H, scaled, order);
}

}  // namespace bcosb
