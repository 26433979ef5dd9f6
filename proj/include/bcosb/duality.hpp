/*
 * Copyright 2026 the bcosb authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bcosb/channel.hpp"
#include "bcosb/errors.hpp"
#include "bcosb/linalg.hpp"
#include "bcosb/rates.hpp"

namespace bcosb {

// ---------------------------------------------------------------------------
// Multipliers
// ---------------------------------------------------------------------------

/// One Lagrange multiplier per transmit line; diag(lambda) is the precoder
/// rescaling applied to the channel columns.
struct MultiplierVector {
    std::vector<double> lambda;

    std::size_t size() const { return lambda.size(); }
    double operator[](std::size_t t) const { return lambda[t]; }

    static MultiplierVector ones(std::size_t n) { return {std::vector<double>(n, 1.0)}; }
    static MultiplierVector uniform(std::size_t n, double v) {
        return {std::vector<double>(n, v)};
    }

    void validate() const {
        if (lambda.empty()) throw DomainError("MultiplierVector: empty");
        for (double v : lambda)
            if (!(v > 0.0) || !std::isfinite(v))
                throw DomainError("MultiplierVector: multipliers must be positive and finite");
    }
};

/// Rescaled channel: every column t of every tone scaled by lambda_t^(-1/2).
inline ChannelTensor effective_channel(const ChannelTensor& ch, const MultiplierVector& lam) {
    lam.validate();
    if (lam.size() != ch.n_tx)
        throw DomainError("effective_channel: multiplier count must equal n_tx");
    ChannelTensor out = ch;
    for (std::size_t t = 0; t < ch.n_tx; ++t) {
        const double s = 1.0 / std::sqrt(lam[t]);
        for (auto& H : out.tones) H.col(t) *= s;
    }
    return out;
}

// ---------------------------------------------------------------------------
// MAC -> BC covariance transformation (one tone)
// ---------------------------------------------------------------------------

/// Map dual-MAC covariances to BC covariances on one tone, preserving per-user
/// rates and total trace. H[j] is user j's (rescaled, whitened) channel block,
/// `order` the MAC decode sequence. Users are processed in decode order; for
/// the user at position p,
///   A = I + H_j (sum of already-produced BC covariances) H_j^H   (its DPC
///       interference: users decoded earlier are encoded later),
///   B = I + sum over users decoded after it of H^H S H            (its MAC
///       interference),
/// and with the flipped-channel SVD B^(-1/2) H_j^H A^(-1/2) = F D G^H,
///   Q_j = B^(-1/2) F G^H A^(1/2) S_j A^(1/2) G F^H B^(-1/2).
/// `tone` (1-based) only tags numerical failures.
inline std::vector<CMat> mac_to_bc(const std::vector<CMat>& H, const std::vector<CMat>& S,
                                   const std::vector<std::size_t>& order, std::size_t tone = 0) {
    const std::size_t U = H.size();
    if (S.size() != U) throw InvalidArgument("mac_to_bc: user count mismatch");
    detail::check_permutation(order, U);
    if (U == 0) return {};
    const Eigen::Index n_tx = H[0].cols();
    for (std::size_t j = 0; j < U; ++j) {
        if (H[j].cols() != n_tx) throw InvalidArgument("mac_to_bc: channel width mismatch");
        if (S[j].rows() != H[j].rows() || S[j].cols() != H[j].rows())
            throw InvalidArgument("mac_to_bc: covariance shape mismatch");
    }

    // Suffix interference sums: uplink[p] = I + sum_{q > p} H^H S H over the
    // decode order, accumulated from the tail to avoid cancellation.
    std::vector<CMat> uplink(U);
    CMat acc = CMat::Identity(n_tx, n_tx);
    for (std::size_t p = U; p-- > 0;) {
        uplink[p] = acc;
        const std::size_t j = order[p];
        acc.noalias() += H[j].adjoint() * S[j] * H[j];
        linalg::hermitianize(acc);
    }

    std::vector<CMat> Q(U);
    CMat downlink_sum = CMat::Zero(n_tx, n_tx);
    for (std::size_t p = 0; p < U; ++p) {
        const std::size_t j = order[p];
        const Eigen::Index r = H[j].rows();
        CMat A = CMat::Identity(r, r) + H[j] * downlink_sum * H[j].adjoint();
        linalg::hermitianize(A);
        try {
            auto a = linalg::herm_sqrt_pair(A);
            auto b = linalg::herm_sqrt_pair(uplink[p]);
            CMat flipped = b.inv_sqrt * H[j].adjoint() * a.inv_sqrt;
            Eigen::JacobiSVD<CMat> svd(flipped, Eigen::ComputeThinU | Eigen::ComputeThinV);
            CMat rot = svd.matrixU() * svd.matrixV().adjoint();
            CMat core = a.sqrt * S[j] * a.sqrt;
            linalg::hermitianize(core);
            Q[j] = b.inv_sqrt * rot * core * rot.adjoint() * b.inv_sqrt;
            linalg::hermitianize(Q[j]);
        } catch (const NumericalFailure& e) {
            throw NumericalFailure(std::string("mac_to_bc: ") + e.what(), tone);
        }
        downlink_sum += Q[j];
        linalg::hermitianize(downlink_sum);
    }
    return Q;
}

/// Undo the multiplier precoder: Q = diag(lambda)^(-1/2) Qt diag(lambda)^(-1/2).
inline BcCovarianceSet untransform_bc(const BcCovarianceSet& transformed,
                                      const MultiplierVector& lam) {
    lam.validate();
    BcCovarianceSet out = transformed;
    for (auto& tone : out.Q)
        for (auto& q : tone) {
            if (static_cast<std::size_t>(q.rows()) != lam.size())
                throw DomainError("untransform_bc: multiplier count must equal n_tx");
            for (Eigen::Index m = 0; m < q.rows(); ++m)
                for (Eigen::Index n = 0; n < q.cols(); ++n)
                    q(m, n) /= std::sqrt(lam[m] * lam[n]);
        }
    return out;
}

/// Per-line powers: P_t = sum over tones and users of the t-th diagonal entry.
inline std::vector<double> per_modem_power(const BcCovarianceSet& set) {
    std::vector<double> p;
    for (const auto& tone : set.Q)
        for (const auto& q : tone) {
            if (p.empty()) p.assign(q.rows(), 0.0);
            if (static_cast<std::size_t>(q.rows()) != p.size())
                throw InvalidArgument("per_modem_power: inconsistent covariance widths");
            for (Eigen::Index t = 0; t < q.rows(); ++t) p[t] += q(t, t).real();
        }
    return p;
}

// ---------------------------------------------------------------------------
// End-to-end verification
// ---------------------------------------------------------------------------

/// Numerical duality audit: per-tone, per-user deltas between MAC rates (on
/// the rescaled channel with S) and BC rates (on the plain channel with Q),
/// plus the per-tone transformed sum-power identity
/// sum_t lambda_t (Q)_tt = sum_j Trace(S_j). Rate deltas are normalized by
/// max(1, b_MAC); power deltas are relative to the tone's MAC trace.
struct DualityReport {
    std::vector<double> tone_rate_delta;   // per tone, max over users
    std::vector<double> tone_power_delta;  // per tone, relative
    double max_rate_delta = 0.0;
    double max_power_delta = 0.0;
    bool passed = true;  // both maxima <= 1e-6

    static constexpr double kFailThreshold = 1e-6;
};

inline DualityReport verify_duality(const ChannelTensor& channel, const MultiplierVector& lam,
                                    const MacCovarianceSet& S, const BcCovarianceSet& Q,
                                    const std::vector<std::size_t>& order) {
    if (S.S.size() != channel.n_tones || Q.Q.size() != channel.n_tones)
        throw InvalidArgument("verify_duality: covariance sets must cover every tone");
    const ChannelTensor rescaled = effective_channel(channel, lam);
    std::vector<std::size_t> encode_order(order.rbegin(), order.rend());

    DualityReport rep;
    rep.tone_rate_delta.resize(channel.n_tones, 0.0);
    rep.tone_power_delta.resize(channel.n_tones, 0.0);
    const std::size_t U = channel.n_users();
    for (std::size_t i = 0; i < channel.n_tones; ++i) {
        std::vector<CMat> Hp(U), Hr(U);
        for (std::size_t j = 0; j < U; ++j) {
            Hp[j] = channel.user_block(i, j);
            Hr[j] = rescaled.user_block(i, j);
        }
        auto b_mac = mac_sic_rates(Hr, S.S[i], order);
        auto b_bc = bc_dpc_rates(Hp, Q.Q[i], encode_order);
        double rd = 0.0;
        for (std::size_t j = 0; j < U; ++j)
            rd = std::max(rd, std::abs(b_mac[j] - b_bc[j]) / std::max(1.0, b_mac[j]));
        rep.tone_rate_delta[i] = rd;

        double mac_trace = 0.0, weighted_diag = 0.0;
        for (std::size_t j = 0; j < U; ++j) {
            mac_trace += S.S[i][j].diagonal().real().sum();
            for (Eigen::Index t = 0; t < Q.Q[i][j].rows(); ++t)
                weighted_diag += lam[t] * Q.Q[i][j](t, t).real();
        }
        double pd = std::abs(weighted_diag - mac_trace);
        if (mac_trace > 0.0) pd /= mac_trace;
        rep.tone_power_delta[i] = pd;

        rep.max_rate_delta = std::max(rep.max_rate_delta, rd);
        rep.max_power_delta = std::max(rep.max_power_delta, pd);
    }
    rep.passed = rep.max_rate_delta <= DualityReport::kFailThreshold &&
                 rep.max_power_delta <= DualityReport::kFailThreshold;
    return rep;
}

}  // namespace bcosb
