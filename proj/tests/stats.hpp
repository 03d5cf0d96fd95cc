// Sample statistics used by the statistical tests.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace teststats {

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double cov(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean(a), mb = mean(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(a.size() - 1);
}

inline double var(const std::vector<double>& v) { return cov(v, v); }

/// Standard error of the sample covariance of a bivariate normal pair.
inline double cov_se(double va, double vb, double c, std::size_t n) {
    return std::sqrt((va * vb + c * c) / static_cast<double>(n));
}

inline double corr(const std::vector<double>& a, const std::vector<double>& b) {
    return cov(a, b) / std::sqrt(var(a) * var(b));
}

}  // namespace teststats
