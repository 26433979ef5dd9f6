/*
 * Copyright 2026 the bcosb authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bcosb/errors.hpp"

namespace bcosb {

// ---------------------------------------------------------------------------
// Power / PSD unit bridges. All powers are carried in mW internally; dBm and
// dBm/Hz appear only at configuration and reporting boundaries.
// ---------------------------------------------------------------------------

/// dBm -> mW.
inline double dbm_to_mw(double dbm) {
    if (!std::isfinite(dbm)) throw InvalidArgument("dbm_to_mw: non-finite level");
    return std::pow(10.0, dbm / 10.0);
}

/// mW -> dBm. Requires p > 0; zero power has no finite dBm representation and
/// must be handled by the caller.
inline double mw_to_dbm(double mw) {
    if (!(mw > 0.0) || !std::isfinite(mw)) throw DomainError("mw_to_dbm: power must be > 0 mW");
    return 10.0 * std::log10(mw);
}

/// PSD in dBm/Hz over one tone of width `spacing_hz` -> tone power in mW.
inline double psd_to_tone_power(double psd_dbm_hz, double spacing_hz) {
    if (!std::isfinite(psd_dbm_hz)) throw InvalidArgument("psd_to_tone_power: non-finite PSD");
    if (!(spacing_hz > 0.0) || !std::isfinite(spacing_hz))
        throw InvalidArgument("psd_to_tone_power: spacing must be > 0 Hz");
    return dbm_to_mw(psd_dbm_hz) * spacing_hz;
}

/// Tone power in mW over `spacing_hz` -> PSD in dBm/Hz. Requires mw > 0.
inline double tone_power_to_psd(double mw, double spacing_hz) {
    if (!(spacing_hz > 0.0)) throw InvalidArgument("tone_power_to_psd: spacing must be > 0 Hz");
    return mw_to_dbm(mw / spacing_hz);
}

// ---------------------------------------------------------------------------
// Tone grid
// ---------------------------------------------------------------------------

/// Uniform DMT subcarrier grid. Tone indices are 1-based; tone 1 sits at
/// `start_hz` and tone i at start_hz + (i-1)*spacing_hz.
struct ToneGrid {
    std::size_t n_tones = 0;
    double spacing_hz = 0.0;
    double symbol_rate_hz = 0.0;
    double start_hz = 0.0;

    ToneGrid() = default;
    ToneGrid(std::size_t n, double spacing, double symbol_rate, double start = 0.0)
        : n_tones(n), spacing_hz(spacing), symbol_rate_hz(symbol_rate), start_hz(start) {
        if (n_tones < 1) throw InvalidArgument("ToneGrid: n_tones must be >= 1");
        if (!(spacing_hz > 0.0)) throw InvalidArgument("ToneGrid: spacing must be > 0");
        if (!(symbol_rate_hz > 0.0)) throw InvalidArgument("ToneGrid: symbol rate must be > 0");
        if (!(start_hz >= 0.0)) throw InvalidArgument("ToneGrid: start frequency must be >= 0");
    }

    /// Center frequency of 1-based tone i.
    double tone_frequency(std::size_t i) const {
        if (i < 1 || i > n_tones)
            throw InvalidArgument("tone_frequency: tone index " + std::to_string(i) +
                                  " out of range 1.." + std::to_string(n_tones));
        return start_hz + static_cast<double>(i - 1) * spacing_hz;
    }
};

// ---------------------------------------------------------------------------
// Band plan
// ---------------------------------------------------------------------------

/// Ordered, disjoint set of frequency intervals. Intervals are closed at the
/// lower edge and open at the upper edge so adjacent bands partition cleanly.
struct BandPlan {
    std::vector<std::pair<double, double>> intervals;  // (f_lo, f_hi) in Hz
    std::string label;

    BandPlan() = default;
    BandPlan(std::vector<std::pair<double, double>> iv, std::string lbl = "")
        : intervals(std::move(iv)), label(std::move(lbl)) {
        for (const auto& [lo, hi] : intervals)
            if (!(lo < hi)) throw InvalidArgument("BandPlan: interval must have f_lo < f_hi");
        for (std::size_t k = 1; k < intervals.size(); ++k)
            if (!(intervals[k - 1].second <= intervals[k].first))
                throw InvalidArgument("BandPlan: intervals must be sorted and disjoint");
    }

    bool contains(double f_hz) const {
        for (const auto& [lo, hi] : intervals)
            if (f_hz >= lo && f_hz < hi) return true;
        return false;
    }
};

/// Ascending 1-based indices of the tones whose center frequency falls inside
/// the plan ([f_lo, f_hi) per interval).
inline std::vector<std::size_t> active_tones(const ToneGrid& grid, const BandPlan& plan) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 1; i <= grid.n_tones; ++i)
        if (plan.contains(grid.tone_frequency(i))) idx.push_back(i);
    return idx;
}

// ---------------------------------------------------------------------------
// Power budgets
// ---------------------------------------------------------------------------

/// Either a single total transmit power budget or one budget per modem
/// (transmit line). Stored in mW.
struct PowerBudget {
    enum class Kind { Total, PerModem };

    Kind kind = Kind::Total;
    double total_mw = 0.0;                // valid iff kind == Total
    std::vector<double> per_modem_mw;     // valid iff kind == PerModem

    static PowerBudget total(double mw) {
        if (!(mw > 0.0) || !std::isfinite(mw))
            throw InvalidArgument("PowerBudget: total budget must be positive and finite");
        PowerBudget b;
        b.kind = Kind::Total;
        b.total_mw = mw;
        return b;
    }

    static PowerBudget per_modem(std::vector<double> mw) {
        if (mw.empty()) throw InvalidArgument("PowerBudget: empty per-modem budget");
        for (double p : mw)
            if (!(p > 0.0) || !std::isfinite(p))
                throw InvalidArgument("PowerBudget: per-modem budgets must be positive and finite");
        PowerBudget b;
        b.kind = Kind::PerModem;
        b.per_modem_mw = std::move(mw);
        return b;
    }

    static PowerBudget total_dbm(double dbm) { return total(dbm_to_mw(dbm)); }

    static PowerBudget per_modem_dbm(const std::vector<double>& dbm) {
        std::vector<double> mw(dbm.size());
        std::transform(dbm.begin(), dbm.end(), mw.begin(), dbm_to_mw);
        return per_modem(std::move(mw));
    }
};

}  // namespace bcosb
