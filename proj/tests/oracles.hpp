#pragma once

// Independent reference implementations used as test oracles. They follow the
// textbook definitions literally in long double and share no code with the library.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace oracle {

struct Hrv {
    long double mean = 0, std = 0, min = 0, max = 0;
    long double rmssd = 0, sdsd = 0, pnn10 = 0, pnn25 = 0, pnn50 = 0, tri = 0;
    long double sd1 = 0, sd2 = 0, sdell = 0;
    std::optional<long double> ratio;
};

inline Hrv hrv(const std::vector<double>& rr) {
    Hrv h;
    const long double n = static_cast<long double>(rr.size());
    long double sum = 0;
    for (double v : rr) sum += v;
    h.mean = sum / n;
    long double ss = 0;
    for (double v : rr) ss += (v - h.mean) * (v - h.mean);
    h.std = std::sqrt(ss / n);
    h.min = *std::min_element(rr.begin(), rr.end());
    h.max = *std::max_element(rr.begin(), rr.end());

    std::vector<long double> d;
    for (std::size_t i = 0; i + 1 < rr.size(); ++i) d.push_back(static_cast<long double>(rr[i + 1]) - rr[i]);
    const long double m = static_cast<long double>(d.size());
    long double sq = 0, dsum = 0;
    int c10 = 0, c25 = 0, c50 = 0;
    for (long double v : d) {
        sq += v * v;
        dsum += v;
        c10 += std::fabs(v) > 10 ? 1 : 0;
        c25 += std::fabs(v) > 25 ? 1 : 0;
        c50 += std::fabs(v) > 50 ? 1 : 0;
    }
    h.rmssd = std::sqrt(sq / m);
    const long double dmean = dsum / m;
    long double dss = 0;
    for (long double v : d) dss += (v - dmean) * (v - dmean);
    h.sdsd = std::sqrt(dss / m);
    h.pnn10 = 100.0L * c10 / m;
    h.pnn25 = 100.0L * c25 / m;
    h.pnn50 = 100.0L * c50 / m;

    // Histogram by sorting bin ids and measuring the longest run.
    std::vector<long long> ids;
    for (double v : rr) ids.push_back(static_cast<long long>(std::floor(static_cast<long double>(v) * 128.0L / 1000.0L)));
    std::sort(ids.begin(), ids.end());
    std::size_t best = 0, run = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        run = (i > 0 && ids[i] == ids[i - 1]) ? run + 1 : 1;
        best = std::max(best, run);
    }
    h.tri = n / static_cast<long double>(best);

    h.sd1 = h.rmssd / std::sqrt(2.0L);
    const long double s2 = 2 * h.std * h.std - 0.5L * h.rmssd * h.rmssd;
    h.sd2 = s2 > 0 ? std::sqrt(s2) : 0;
    if (h.sd2 > 0) h.ratio = h.sd1 / h.sd2;
    h.sdell = 3.14159265358979323846264338327950288L * h.sd1 * h.sd2;
    return h;
}

inline bool rel_close(double got, long double want, long double rel) {
    const long double diff = std::fabs(static_cast<long double>(got) - want);
    if (want == 0) return diff <= rel;
    return diff <= rel * std::fabs(want);
}

} // namespace oracle
