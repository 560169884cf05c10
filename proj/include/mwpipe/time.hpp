#pragma once

#include "mwpipe/error.hpp"

#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

namespace mwpipe {

inline constexpr std::uint64_t kNanosPerSecond = 1'000'000'000ULL;

namespace detail {
__extension__ typedef unsigned __int128 u128;
}

/// Nanoseconds since the session epoch (t = 0). Session time never runs backwards.
struct Timestamp {
    std::uint64_t nanos = 0;

    constexpr auto operator<=>(const Timestamp&) const = default;

    [[nodiscard]] static constexpr Timestamp from_nanos(std::uint64_t ns) noexcept { return {ns}; }

    /// Rounds to the nearest nanosecond; negative inputs clamp to the epoch.
    [[nodiscard]] static Timestamp from_seconds(double s) noexcept {
        if (!(s > 0.0)) return {0};
        return {static_cast<std::uint64_t>(std::llround(s * 1e9))};
    }

    [[nodiscard]] constexpr double seconds() const noexcept {
        return static_cast<double>(nanos) / 1e9;
    }
};

/// Signed difference a - b in nanoseconds.
[[nodiscard]] constexpr std::int64_t diff_ns(Timestamp a, Timestamp b) noexcept {
    return static_cast<std::int64_t>(a.nanos) - static_cast<std::int64_t>(b.nanos);
}

[[nodiscard]] inline std::uint64_t seconds_to_ns(double s) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw Error(ErrorCode::InvalidArgument, "duration must be finite and >= 0");
    return static_cast<std::uint64_t>(std::llround(s * 1e9));
}

/// Sampling rate as an exact rational number of hertz (num / den), or aperiodic.
///
/// Sample k of a periodic stream sits at floor(k * 1e9 * den / num) ns. Every stream
/// in the system shares this grid rule, so regenerating a stream over any sub-span
/// reproduces identical timestamps.
struct Rate {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    [[nodiscard]] static constexpr Rate aperiodic() noexcept { return {0, 1}; }

    [[nodiscard]] static Rate hz(std::uint64_t num, std::uint64_t den = 1) {
        if (num == 0 || den == 0) throw Error(ErrorCode::InvalidRate, "rate must be positive");
        const auto g = std::gcd(num, den);
        return {num / g, den / g};
    }

    /// Converts a decimal rate (e.g. 1.008) to a reduced rational with micro-hertz resolution.
    [[nodiscard]] static Rate from_double(double hz_value) {
        if (!(hz_value > 0.0) || !std::isfinite(hz_value)) throw Error(ErrorCode::InvalidRate, "rate must be positive");
        const auto scaled = static_cast<std::uint64_t>(std::llround(hz_value * 1e6));
        if (scaled == 0) throw Error(ErrorCode::InvalidRate, "rate below 1 uHz");
        return hz(scaled, 1'000'000);
    }

    [[nodiscard]] constexpr bool periodic() const noexcept { return num > 0; }
    [[nodiscard]] constexpr double as_double() const noexcept {
        return static_cast<double>(num) / static_cast<double>(den);
    }

    [[nodiscard]] Timestamp grid_time(std::uint64_t k) const noexcept {
        const detail::u128 n = static_cast<detail::u128>(k) * kNanosPerSecond * den / num;
        return {static_cast<std::uint64_t>(n)};
    }

    /// Smallest k with grid_time(k) >= t.
    [[nodiscard]] std::uint64_t first_index_at_or_after(Timestamp t) const noexcept {
        const detail::u128 a = static_cast<detail::u128>(t.nanos) * num;
        const detail::u128 b = static_cast<detail::u128>(kNanosPerSecond) * den;
        return static_cast<std::uint64_t>((a + b - 1) / b);
    }

    /// Nominal sample period rounded up to whole nanoseconds.
    [[nodiscard]] std::uint64_t period_ceil_ns() const noexcept {
        const detail::u128 a = static_cast<detail::u128>(kNanosPerSecond) * den;
        return static_cast<std::uint64_t>((a + num - 1) / num);
    }

    [[nodiscard]] std::string to_string() const {
        if (!periodic()) return "aperiodic";
        if (den == 1) return std::to_string(num);
        return std::to_string(num) + "/" + std::to_string(den);
    }

    /// Parses "aperiodic", "252", "126/125" or a decimal such as "1.008".
    [[nodiscard]] static Rate parse(const std::string& text) {
        if (text == "aperiodic") return aperiodic();
        if (const auto slash = text.find('/'); slash != std::string::npos) {
            try {
                return hz(std::stoull(text.substr(0, slash)), std::stoull(text.substr(slash + 1)));
            } catch (const std::logic_error&) {
                throw Error(ErrorCode::InvalidRate, "cannot parse rate '" + text + "'");
            }
        }
        try {
            return from_double(std::stod(text));
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::InvalidRate, "cannot parse rate '" + text + "'");
        }
    }

    constexpr bool operator==(const Rate&) const = default;
};

/// Source of the session clock used for "auto" stamping.
class Clock {
public:
    virtual ~Clock() = default;
    [[nodiscard]] virtual Timestamp now() const = 0;
};

/// Clock advanced explicitly by its owner; simulated sessions use this.
class ManualClock final : public Clock {
public:
    [[nodiscard]] Timestamp now() const override { return now_; }
    void set(Timestamp t) {
        if (t < now_) throw Error(ErrorCode::TimestampRegression, "session clock cannot run backwards");
        now_ = t;
    }

private:
    Timestamp now_{};
};

/// Monotonic wall-paced clock whose epoch is its construction instant.
class SteadyClock final : public Clock {
public:
    SteadyClock() : start_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] Timestamp now() const override {
        const auto d = std::chrono::steady_clock::now() - start_;
        return {static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(d).count())};
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace mwpipe
