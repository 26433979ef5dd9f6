/*
 * Copyright 2026 the bcosb authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "bcosb/errors.hpp"
#include "bcosb/linalg.hpp"
#include "bcosb/units.hpp"

namespace bcosb {

// ---------------------------------------------------------------------------
// ChannelTensor: per-tone complex channel matrices plus the per-user
// partition of receive rows.
// ---------------------------------------------------------------------------

struct ChannelTensor {
    std::size_t n_tones = 0;
    std::size_t n_rx = 0;
    std::size_t n_tx = 0;
    /// Disjoint, covering sets of 0-based receive-row indices, one per user.
    std::vector<std::vector<Eigen::Index>> user_rows;
    /// One n_rx x n_tx matrix per tone (index 0 is tone 1).
    std::vector<CMat> tones;

    std::size_t n_users() const { return user_rows.size(); }

    const CMat& tone(std::size_t t0) const { return tones[t0]; }

    /// Rows of tone `t0` (0-based) belonging to user `j`, as an r_j x n_tx block.
    CMat user_block(std::size_t t0, std::size_t j) const {
        const auto& rows = user_rows[j];
        CMat block(rows.size(), n_tx);
        for (std::size_t r = 0; r < rows.size(); ++r) block.row(r) = tones[t0].row(rows[r]);
        return block;
    }

    /// One user per receive row, in row order.
    static std::vector<std::vector<Eigen::Index>> one_row_per_user(std::size_t n_rx) {
        std::vector<std::vector<Eigen::Index>> u(n_rx);
        for (std::size_t r = 0; r < n_rx; ++r) u[r] = {static_cast<Eigen::Index>(r)};
        return u;
    }

    /// Regroup receive rows into contiguous per-user blocks of the given sizes.
    void regroup(const std::vector<std::size_t>& rows_per_user) {
        std::size_t total = 0;
        for (auto r : rows_per_user) total += r;
        if (total != n_rx)
            throw InvalidArgument("ChannelTensor::regroup: row counts must sum to n_rx");
        user_rows.clear();
        Eigen::Index next = 0;
        for (auto r : rows_per_user) {
            if (r == 0) throw InvalidArgument("ChannelTensor::regroup: empty user");
            std::vector<Eigen::Index> rows(r);
            for (std::size_t k = 0; k < r; ++k) rows[k] = next++;
            user_rows.push_back(std::move(rows));
        }
    }

    void validate() const {
        if (tones.size() != n_tones) throw InvalidArgument("ChannelTensor: tone count mismatch");
        std::vector<int> seen(n_rx, 0);
        for (const auto& rows : user_rows)
            for (auto r : rows) {
                if (r < 0 || static_cast<std::size_t>(r) >= n_rx)
                    throw InvalidArgument("ChannelTensor: row index out of range");
                if (seen[r]++) throw InvalidArgument("ChannelTensor: rows assigned twice");
            }
        for (std::size_t r = 0; r < n_rx; ++r)
            if (!seen[r]) throw InvalidArgument("ChannelTensor: unassigned receive row");
        for (const auto& m : tones) {
            if (static_cast<std::size_t>(m.rows()) != n_rx ||
                static_cast<std::size_t>(m.cols()) != n_tx)
                throw InvalidArgument("ChannelTensor: inconsistent tone shape");
            if (!m.allFinite()) throw InvalidArgument("ChannelTensor: non-finite entry");
        }
    }
};

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

/// Per-tone, per-receive-row noise PSD in dBm/Hz. Empty table means flat.
struct NoiseSpec {
    double flat_psd_dbm_hz = -140.0;
    Eigen::MatrixXd table;  // n_tones x n_rx when non-empty

    double psd(std::size_t tone0, std::size_t row) const {
        double v = table.size() ? table(tone0, row) : flat_psd_dbm_hz;
        if (!std::isfinite(v) || v <= -400.0)
            throw InvalidArgument("NoiseSpec: PSD must be finite and above -400 dBm/Hz");
        return v;
    }

    static NoiseSpec flat(double psd_dbm_hz) {
        NoiseSpec n;
        n.flat_psd_dbm_hz = psd_dbm_hz;
        if (!std::isfinite(psd_dbm_hz) || psd_dbm_hz <= -400.0)
            throw InvalidArgument("NoiseSpec: PSD must be finite and above -400 dBm/Hz");
        return n;
    }
};

/// Scale each receive row by 1/sqrt(noise tone power) so that all rate
/// formulas downstream can assume unit noise covariance.
inline ChannelTensor whiten(const ChannelTensor& ch, const NoiseSpec& noise,
                            const ToneGrid& grid) {
    if (noise.table.size() &&
        (static_cast<std::size_t>(noise.table.rows()) != ch.n_tones ||
         static_cast<std::size_t>(noise.table.cols()) != ch.n_rx))
        throw InvalidArgument("whiten: noise table shape does not match channel");
    ChannelTensor out = ch;
    for (std::size_t t = 0; t < ch.n_tones; ++t)
        for (std::size_t r = 0; r < ch.n_rx; ++r) {
            double p = psd_to_tone_power(noise.psd(t, r), grid.spacing_hz);
            out.tones[t].row(r) /= std::sqrt(p);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Parametric synthesizer
// ---------------------------------------------------------------------------

/// Scenario for the VDSL-like synthesizer. DM serves each user over its own
/// differential pair (square channel); DM_PM adds a phantom-mode column that
/// couples into every user like boosted FEXT.
struct ScenarioSpec {
    enum class Mode { DM, DM_PM };

    Mode mode = Mode::DM;
    std::vector<double> loop_lengths_m = {400.0, 800.0};
    double direct_k1_db_km = 3.0;    // flat attenuation
    double direct_k2_db_km = 15.0;   // per sqrt(MHz)
    double fext_kappa = 1e-4;        // |H_fext|^2 = kappa * f_MHz^2 * L_km * |H_dd|^2
    double pm_gain_db = 3.0;         // phantom coupling above DM FEXT
    double velocity_mps = 2.0e8;     // propagation speed for path delays

    std::size_t n_users() const { return loop_lengths_m.size(); }
    std::size_t n_tx() const { return n_users() + (mode == Mode::DM_PM ? 1 : 0); }

    void validate() const {
        if (loop_lengths_m.empty()) throw ConfigError("ScenarioSpec: no users");
        for (double L : loop_lengths_m)
            if (!(L >= 0.0) || !std::isfinite(L))
                throw ConfigError("ScenarioSpec: loop lengths must be >= 0");
        if (!(fext_kappa >= 0.0)) throw ConfigError("ScenarioSpec: fext_kappa must be >= 0");
        if (!(velocity_mps > 0.0)) throw ConfigError("ScenarioSpec: velocity must be > 0");
    }
};

namespace detail {

/// |H_dd(f, L)|: flat plus sqrt(f) attenuation in dB, linear in length.
inline double direct_gain(const ScenarioSpec& s, double f_hz, double length_m) {
    double f_mhz = std::max(f_hz, 0.0) / 1e6;
    double att_db = (s.direct_k1_db_km + s.direct_k2_db_km * std::sqrt(f_mhz)) * length_m / 1000.0;
    return std::pow(10.0, -att_db / 20.0);
}

/// |H_fext(f)| over a shared binder length, 1%-worst-case-style law.
inline double fext_gain(const ScenarioSpec& s, double f_hz, double coupling_m) {
    double f_mhz = std::max(f_hz, 0.0) / 1e6;
    double mag2 = s.fext_kappa * f_mhz * f_mhz * (coupling_m / 1000.0) *
                  std::pow(direct_gain(s, f_hz, coupling_m), 2);
    return std::sqrt(mag2);
}

inline cplx path_phase(const ScenarioSpec& s, double f_hz, double length_m) {
    double tau = length_m / s.velocity_mps;
    double angle = -2.0 * std::numbers::pi * f_hz * tau;
    return cplx(std::cos(angle), std::sin(angle));
}

}  // namespace detail

/// Deterministic per-tone channel: direct paths on the diagonal, FEXT off the
/// diagonal, optional phantom column. Phases are linear in frequency with the
/// per-path propagation delay.
inline ChannelTensor synth_channel(const ScenarioSpec& spec, const ToneGrid& grid) {
    spec.validate();
    const std::size_t users = spec.n_users();
    const std::size_t cols = spec.n_tx();

    ChannelTensor ch;
    ch.n_tones = grid.n_tones;
    ch.n_rx = users;
    ch.n_tx = cols;
    ch.user_rows = ChannelTensor::one_row_per_user(users);
    ch.tones.resize(grid.n_tones);

    const double pm_scale = std::pow(10.0, spec.pm_gain_db / 20.0);
    for (std::size_t t = 0; t < grid.n_tones; ++t) {
        double f = grid.tone_frequency(t + 1);
        CMat H = CMat::Zero(users, cols);
        for (std::size_t v = 0; v < users; ++v) {
            double Lv = spec.loop_lengths_m[v];
            H(v, v) = detail::direct_gain(spec, f, Lv) * detail::path_phase(spec, f, Lv);
            for (std::size_t d = 0; d < users; ++d) {
                if (d == v) continue;
                double Lc = std::min(Lv, spec.loop_lengths_m[d]);
                H(v, d) = detail::fext_gain(spec, f, Lc) * detail::path_phase(spec, f, Lc);
            }
            if (spec.mode == ScenarioSpec::Mode::DM_PM) {
                // Phantom line shares the victim's path length.
                H(v, cols - 1) =
                    pm_scale * detail::fext_gain(spec, f, Lv) * detail::path_phase(spec, f, Lv);
            }
        }
        ch.tones[t] = H;
    }
    ch.validate();
    return ch;
}

// ---------------------------------------------------------------------------
// CSV serialization
// ---------------------------------------------------------------------------
// Channel CSV: header `tone,rx,tx,re,im`, one record per complex entry,
// 1-based tone/rx/tx, every combination of the declared shape present.
// Noise CSV:   header `tone,rx,psd_dbm_hz`.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, std::size_t line_no, const char* what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(std::string("expected a number for ") + what + ", got '" + s + "'",
                         line_no);
    }
}

inline std::size_t parse_index(const std::string& s, std::size_t line_no, const char* what) {
    try {
        std::size_t pos = 0;
        long v = std::stol(s, &pos);
        if (pos != s.size() || v < 1) throw std::invalid_argument(s);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ParseError(std::string("expected a 1-based index for ") + what + ", got '" + s + "'",
                         line_no);
    }
}

}  // namespace detail

inline void save_channel_csv(const ChannelTensor& ch, std::ostream& os) {
    os << "tone,rx,tx,re,im\n";
    char buf[64];
    for (std::size_t t = 0; t < ch.n_tones; ++t)
        for (std::size_t r = 0; r < ch.n_rx; ++r)
            for (std::size_t c = 0; c < ch.n_tx; ++c) {
                const cplx v = ch.tones[t](r, c);
                os << (t + 1) << ',' << (r + 1) << ',' << (c + 1) << ',';
                std::snprintf(buf, sizeof buf, "%.17g", v.real());
                os << buf << ',';
                std::snprintf(buf, sizeof buf, "%.17g", v.imag());
                os << buf << '\n';
            }
}

/// Parse a channel CSV. The shape is inferred from the largest indices seen;
/// the record set must then be complete. Users default to one per row.
inline ChannelTensor load_channel_csv(std::istream& is) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(is, line)) throw ParseError("empty channel CSV");
    if (detail::split_csv_line(line) != std::vector<std::string>{"tone", "rx", "tx", "re", "im"})
        throw ParseError("channel CSV header must be 'tone,rx,tx,re,im'", 1);

    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, cplx> entries;
    std::size_t max_t = 0, max_r = 0, max_c = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 5) throw ParseError("expected 5 fields", line_no);
        std::size_t t = detail::parse_index(f[0], line_no, "tone");
        std::size_t r = detail::parse_index(f[1], line_no, "rx");
        std::size_t c = detail::parse_index(f[2], line_no, "tx");
        double re = detail::parse_double(f[3], line_no, "re");
        double im = detail::parse_double(f[4], line_no, "im");
        if (!std::isfinite(re) || !std::isfinite(im))
            throw ParseError("non-finite channel entry", line_no);
        if (!entries.emplace(std::make_tuple(t, r, c), cplx(re, im)).second)
            throw ParseError("duplicate (tone,rx,tx) record", line_no);
        max_t = std::max(max_t, t);
        max_r = std::max(max_r, r);
        max_c = std::max(max_c, c);
    }
    if (entries.empty()) throw ParseError("channel CSV has no records");

    ChannelTensor ch;
    ch.n_tones = max_t;
    ch.n_rx = max_r;
    ch.n_tx = max_c;
    ch.user_rows = ChannelTensor::one_row_per_user(max_r);
    ch.tones.assign(max_t, CMat::Zero(max_r, max_c));
    for (std::size_t t = 1; t <= max_t; ++t)
        for (std::size_t r = 1; r <= max_r; ++r)
            for (std::size_t c = 1; c <= max_c; ++c) {
                auto it = entries.find(std::make_tuple(t, r, c));
                if (it == entries.end())
                    throw ParseError("missing record for tone " + std::to_string(t) + ", rx " +
                                     std::to_string(r) + ", tx " + std::to_string(c));
                ch.tones[t - 1](r - 1, c - 1) = it->second;
            }
    ch.validate();
    return ch;
}

/// Parse a noise CSV into a complete (n_tones x n_rx) PSD table.
inline NoiseSpec load_noise_csv(std::istream& is) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(is, line)) throw ParseError("empty noise CSV");
    if (detail::split_csv_line(line) != std::vector<std::string>{"tone", "rx", "psd_dbm_hz"})
        throw ParseError("noise CSV header must be 'tone,rx,psd_dbm_hz'", 1);

    std::map<std::pair<std::size_t, std::size_t>, double> entries;
    std::size_t max_t = 0, max_r = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 3) throw ParseError("expected 3 fields", line_no);
        std::size_t t = detail::parse_index(f[0], line_no, "tone");
        std::size_t r = detail::parse_index(f[1], line_no, "rx");
        double psd = detail::parse_double(f[2], line_no, "psd_dbm_hz");
        if (!std::isfinite(psd) || psd <= -400.0)
            throw ParseError("noise PSD must be finite and above -400 dBm/Hz", line_no);
        if (!entries.emplace(std::make_pair(t, r), psd).second)
            throw ParseError("duplicate (tone,rx) record", line_no);
        max_t = std::max(max_t, t);
        max_r = std::max(max_r, r);
    }
    if (entries.empty()) throw ParseError("noise CSV has no records");

    NoiseSpec noise;
    noise.table.resize(max_t, max_r);
    for (std::size_t t = 1; t <= max_t; ++t)
        for (std::size_t r = 1; r <= max_r; ++r) {
            auto it = entries.find(std::make_pair(t, r));
            if (it == entries.end())
                throw ParseError("missing record for tone " + std::to_string(t) + ", rx " +
                                 std::to_string(r));
            noise.table(t - 1, r - 1) = it->second;
        }
    return noise;
}

}  // namespace bcosb
