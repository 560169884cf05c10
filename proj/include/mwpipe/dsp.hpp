#pragma once

// Small numeric toolkit shared by the feature extractors.

#include "mwpipe/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <deque>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace mwpipe::dsp {

/// Population mean (÷N). Empty input yields 0.
[[nodiscard]] inline double mean(std::span<const double> x) noexcept {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Population standard deviation (÷N).
[[nodiscard]] inline double pop_std(std::span<const double> x) noexcept {
    if (x.empty()) return 0.0;
    const double m = mean(x);
    double acc = 0.0;
    for (const double v : x) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(x.size()));
}

/// Lower-middle element for even counts.
[[nodiscard]] inline double lower_median(std::span<const double> x) {
    if (x.empty()) throw Error(ErrorCode::InvalidArgument, "median of empty sequence");
    std::vector<double> tmp(x.begin(), x.end());
    const auto mid = tmp.begin() + static_cast<std::ptrdiff_t>((tmp.size() - 1) / 2);
    std::nth_element(tmp.begin(), mid, tmp.end());
    return *mid;
}

/// Direct-form-I biquad section.
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

    /// 2nd-order Butterworth low-pass via the bilinear transform.
    [[nodiscard]] static Biquad lowpass(double fc, double fs) {
        check(fc, fs);
        const double k = std::tan(std::numbers::pi * fc / fs);
        const double q = std::numbers::sqrt2;
        const double norm = 1.0 / (1.0 + q * k + k * k);
        Biquad f;
        f.b0 = k * k * norm;
        f.b1 = 2.0 * f.b0;
        f.b2 = f.b0;
        f.a1 = 2.0 * (k * k - 1.0) * norm;
        f.a2 = (1.0 - q * k + k * k) * norm;
        return f;
    }

    /// 2nd-order Butterworth high-pass via the bilinear transform.
    [[nodiscard]] static Biquad highpass(double fc, double fs) {
        check(fc, fs);
        const double k = std::tan(std::numbers::pi * fc / fs);
        const double q = std::numbers::sqrt2;
        const double norm = 1.0 / (1.0 + q * k + k * k);
        Biquad f;
        f.b0 = norm;
        f.b1 = -2.0 * norm;
        f.b2 = norm;
        f.a1 = 2.0 * (k * k - 1.0) * norm;
        f.a2 = (1.0 - q * k + k * k) * norm;
        return f;
    }

    void apply(std::vector<double>& x) const noexcept {
        double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
        for (double& v : x) {
            const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = v;
            y2 = y1;
            y1 = y;
            v = y;
        }
    }

private:
    static void check(double fc, double fs) {
        if (!(fs > 0.0) || !(fc > 0.0) || !(fc < fs / 2.0))
            throw Error(ErrorCode::InvalidArgument, "cutoff must lie in (0, fs/2)");
    }
};

/// Zero-phase forward-backward filtering with odd reflection padding of `pad` samples
/// at each end to settle the start-up transient.
[[nodiscard]] inline std::vector<double> filtfilt(std::span<const Biquad> sections, std::span<const double> x,
                                                  std::size_t pad) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    pad = std::min(pad, n - 1);
    std::vector<double> y;
    y.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) y.push_back(2.0 * x[0] - x[i]);
    y.insert(y.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) y.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    for (const auto& s : sections) s.apply(y);
    std::reverse(y.begin(), y.end());
    for (const auto& s : sections) s.apply(y);
    std::reverse(y.begin(), y.end());
    return {y.begin() + static_cast<std::ptrdiff_t>(pad), y.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

/// Band-pass as a high-pass section followed by a low-pass section, zero phase.
[[nodiscard]] inline std::vector<double> bandpass(std::span<const double> x, double lo_hz, double hi_hz, double fs) {
    const Biquad sections[] = {Biquad::highpass(lo_hz, fs), Biquad::lowpass(hi_hz, fs)};
    const auto pad = static_cast<std::size_t>(std::ceil(3.0 * fs / lo_hz));
    return filtfilt(sections, x, pad);
}

/// Centered moving median over 2*half+1 samples with edge replication.
[[nodiscard]] inline std::vector<double> moving_median(std::span<const double> x, std::size_t half) {
    const std::size_t n = x.size();
    std::vector<double> out(n);
    std::vector<double> buf(2 * half + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < buf.size(); ++k) {
            const auto j = static_cast<std::ptrdiff_t>(i + k) - static_cast<std::ptrdiff_t>(half);
            const auto clamped = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(n) - 1);
            buf[k] = x[static_cast<std::size_t>(clamped)];
        }
        std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(half), buf.end());
        out[i] = buf[half];
    }
    return out;
}

/// Centered moving maximum over 2*half+1 samples (window clipped at the edges).
[[nodiscard]] inline std::vector<double> moving_max(std::span<const double> x, std::size_t half) {
    const std::size_t n = x.size();
    std::vector<double> out(n);
    std::deque<std::size_t> dq; // indices with decreasing values
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t hi = std::min(n - 1, i + half);
        for (; next <= hi; ++next) {
            while (!dq.empty() && x[dq.back()] <= x[next]) dq.pop_back();
            dq.push_back(next);
        }
        const std::size_t lo = i >= half ? i - half : 0;
        while (dq.front() < lo) dq.pop_front();
        out[i] = x[dq.front()];
    }
    return out;
}

/// One-sided power spectral density estimate.
struct Spectrum {
    double df = 0.0;
    std::vector<double> freq;
    std::vector<double> psd; // units²/Hz

    /// Power in [lo, hi) as a Riemann sum over bins.
    [[nodiscard]] double band_power(double lo, double hi) const noexcept {
        double p = 0.0;
        for (std::size_t i = 0; i < freq.size(); ++i)
            if (freq[i] >= lo && freq[i] < hi) p += psd[i] * df;
        return p;
    }
};

/// Welch estimate: Hann-windowed periodograms over 50%-overlapping segments of
/// min(N, max_segment) samples, averaged. The input is mean-removed first. Scaled so
/// that the sum of psd*df over all bins equals the windowed-signal variance.
[[nodiscard]] inline Spectrum welch(std::span<const double> x, double fs, std::size_t max_segment = 256) {
    Spectrum s;
    const std::size_t n = x.size();
    if (n < 2 || !(fs > 0.0)) return s;
    const std::size_t seg = std::min(n, max_segment);
    const std::size_t step = std::max<std::size_t>(1, seg / 2);
    const double m = mean(x);

    std::vector<double> win(seg);
    double win_pow = 0.0;
    for (std::size_t i = 0; i < seg; ++i) {
        // Periodic Hann keeps the segment mean-power normalization exact for any length.
        win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg));
        win_pow += win[i] * win[i];
    }
    if (win_pow <= 0.0) return s;

    const std::size_t bins = seg / 2 + 1;
    s.df = fs / static_cast<double>(seg);
    s.freq.resize(bins);
    s.psd.assign(bins, 0.0);
    for (std::size_t k = 0; k < bins; ++k) s.freq[k] = static_cast<double>(k) * s.df;

    std::vector<std::complex<double>> twiddle(seg);
    for (std::size_t i = 0; i < seg; ++i)
        twiddle[i] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg));

    std::size_t count = 0;
    std::vector<double> buf(seg);
    for (std::size_t start = 0; start + seg <= n; start += step) {
        for (std::size_t i = 0; i < seg; ++i) buf[i] = (x[start + i] - m) * win[i];
        for (std::size_t k = 0; k < bins; ++k) {
            std::complex<double> acc{0.0, 0.0};
            std::size_t idx = 0;
            for (std::size_t i = 0; i < seg; ++i) {
                acc += buf[i] * twiddle[idx];
                idx += k;
                if (idx >= seg) idx -= seg;
            }
            double p = std::norm(acc) / (fs * win_pow);
            const bool nyquist = (seg % 2 == 0) && (k == bins - 1);
            if (k != 0 && !nyquist) p *= 2.0;
            s.psd[k] += p;
        }
        ++count;
        if (seg == n) break;
    }
    for (double& p : s.psd) p /= static_cast<double>(count);
    return s;
}

/// Trapezoidal integral of y over x.
[[nodiscard]] inline double trapezoid(std::span<const double> x, std::span<const double> y) noexcept {
    double a = 0.0;
    for (std::size_t i = 1; i < std::min(x.size(), y.size()); ++i) a += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    return a;
}

/// Parabolic refinement of a discrete extremum at index i; returns fractional offset in (-0.5, 0.5).
[[nodiscard]] inline double parabolic_offset(double ym1, double y0, double yp1) noexcept {
    const double denom = ym1 - 2.0 * y0 + yp1;
    if (denom == 0.0) return 0.0;
    const double off = 0.5 * (ym1 - yp1) / denom;
    return std::clamp(off, -0.5, 0.5);
}

} // namespace mwpipe::dsp
