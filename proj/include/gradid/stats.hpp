#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gradid/errors.hpp"

namespace gradid {

// Linear-interpolation percentile over ascending values; p in [0, 100].
inline double percentile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw MetricError("percentile of an empty set is undefined");
    if (p < 0.0 || p > 100.0) throw ParameterError("percentile must lie in [0, 100]");
    if (sorted.size() == 1) return sorted.front();
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(rank);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double percentile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return percentile_sorted(values, p);
}

inline double mean(std::span<const double> values) {
    if (values.empty()) throw MetricError("mean of an empty set is undefined");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

inline double sample_stddev(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) {
        const double d = v - m;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace gradid
