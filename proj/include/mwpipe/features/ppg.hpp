#pragma once

// Pulse-wave morphology features over detected systolic peaks.

#include "mwpipe/dsp.hpp"
#include "mwpipe/features/beats.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace mwpipe::features {

struct PpgBeat {
    std::size_t foot = 0;
    std::size_t peak = 0;
    double pa = 0.0;
    std::optional<std::size_t> notch;
    std::optional<std::size_t> diastolic;
    std::optional<std::size_t> next_foot;
};

struct PpgFeatures {
    std::optional<double> digital_pa, reflection_index, r2r, auc, svri, ipa, prv;
};

namespace detail {

[[nodiscard]] inline std::size_t argmin(std::span<const double> x, std::size_t lo, std::size_t hi) noexcept {
    std::size_t best = lo;
    for (std::size_t i = lo; i < hi; ++i)
        if (x[i] < x[best]) best = i;
    return best;
}

[[nodiscard]] inline double area_above(std::span<const double> x, std::span<const double> t, std::size_t from, std::size_t to,
                                       double base) noexcept {
    double a = 0.0;
    for (std::size_t i = from + 1; i <= to; ++i) a += 0.5 * ((x[i] - base) + (x[i - 1] - base)) * (t[i] - t[i - 1]);
    return a;
}

} // namespace detail

/// Foot: lowest sample between the previous systolic peak (or window start) and this
/// one; beats whose foot falls on the first sample are skipped. Notch: first local
/// minimum after the systolic peak and before the next foot; the diastolic peak is the
/// highest sample between the notch and the next foot.
[[nodiscard]] inline std::vector<PpgBeat> ppg_beats(std::span<const double> x, const BeatSeries& b) {
    std::vector<PpgBeat> out;
    const auto n = x.size();
    for (std::size_t k = 0; k < b.peak_index.size(); ++k) {
        const std::size_t p = b.peak_index[k];
        const std::size_t lo = k == 0 ? 0 : b.peak_index[k - 1] + 1;
        if (p <= lo) continue;
        PpgBeat beat;
        beat.peak = p;
        beat.foot = detail::argmin(x, lo, p);
        if (beat.foot == 0) continue;
        beat.pa = x[p] - x[beat.foot];

        const std::size_t hi = k + 1 < b.peak_index.size() ? b.peak_index[k + 1] : n;
        if (p + 1 < hi) {
            const std::size_t nf = detail::argmin(x, p + 1, hi);
            if (nf + 1 < n) beat.next_foot = nf;
        }
        const std::size_t limit = beat.next_foot ? *beat.next_foot : (n > 0 ? n - 1 : 0);
        for (std::size_t j = p + 1; j + 1 <= limit && j + 1 < n; ++j) {
            if (j == limit) break;
            if (x[j - 1] > x[j] && x[j] <= x[j + 1]) {
                std::size_t dia = j + 1;
                for (std::size_t m = j + 1; m < limit; ++m)
                    if (x[m] > x[dia]) dia = m;
                if (dia < limit && x[dia] > x[j]) {
                    beat.notch = j;
                    beat.diastolic = dia;
                }
                break;
            }
        }
        out.push_back(beat);
    }
    return out;
}

/// `baseline_pa` is the session-baseline pulse amplitude; sVRI is 1.0 until it exists.
[[nodiscard]] inline PpgFeatures ppg_features(std::span<const double> x, std::span<const double> t, const BeatSeries& b,
                                              std::optional<double> baseline_pa) {
    PpgFeatures f;
    if (b.beat_times_s.size() < 2) return f;
    const auto beats = ppg_beats(x, b);

    double pa = 0, ri = 0, auc = 0, ipa = 0;
    std::size_t n_pa = 0, n_ri = 0, n_auc = 0, n_ipa = 0;
    for (const auto& bt : beats) {
        pa += bt.pa;
        ++n_pa;
        if (bt.notch && bt.pa > 0.0) {
            ri += (x[*bt.diastolic] - x[bt.foot]) / bt.pa;
            ++n_ri;
        }
        if (bt.next_foot) {
            const double base = x[bt.foot];
            auc += detail::area_above(x, t, bt.foot, *bt.next_foot, base);
            ++n_auc;
            if (bt.notch) {
                const double before = detail::area_above(x, t, bt.foot, *bt.notch, base);
                const double after = detail::area_above(x, t, *bt.notch, *bt.next_foot, base);
                if (before > 0.0) {
                    ipa += after / before;
                    ++n_ipa;
                }
            }
        }
    }
    if (n_pa > 0) {
        f.digital_pa = pa / static_cast<double>(n_pa);
        f.svri = (baseline_pa && *baseline_pa > 0.0) ? *f.digital_pa / *baseline_pa : 1.0;
    }
    if (n_ri > 0) f.reflection_index = ri / static_cast<double>(n_ri);
    if (n_auc > 0) f.auc = auc / static_cast<double>(n_auc);
    if (n_ipa > 0) f.ipa = ipa / static_cast<double>(n_ipa);
    if (!b.intervals_ms.empty()) f.r2r = dsp::mean(b.intervals_ms);
    if (b.intervals_ms.size() >= 3) {
        double sq = 0.0;
        for (std::size_t i = 1; i < b.intervals_ms.size(); ++i) {
            const double d = b.intervals_ms[i] - b.intervals_ms[i - 1];
            sq += d * d;
        }
        f.prv = std::sqrt(sq / static_cast<double>(b.intervals_ms.size() - 1));
    }
    return f;
}

} // namespace mwpipe::features
