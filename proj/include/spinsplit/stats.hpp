#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "spinsplit/errors.hpp"

namespace spinsplit {

// A point estimate with its standard error.
struct Estimate {
    double value = 0.0;
    double sem = 0.0;
};

inline double mean(std::span<const double> xs) {
    require(!xs.empty(), ErrorCategory::domain, "mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Unbiased sample variance (n-1 normalization).
inline double sample_variance(std::span<const double> xs) {
    require(xs.size() >= 2, ErrorCategory::domain, "variance needs at least 2 samples");
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

// Unbiased sample covariance (n-1 normalization).
inline double sample_covariance(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorCategory::domain, "covariance: length mismatch");
    require(a.size() >= 2, ErrorCategory::domain, "covariance needs at least 2 samples");
    const double ma = mean(a);
    const double mb = mean(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(a.size() - 1);
}

// Mean with its standard error.
inline Estimate mean_with_sem(std::span<const double> xs) {
    require(xs.size() >= 2, ErrorCategory::domain, "mean_with_sem needs at least 2 samples");
    const double m = mean(xs);
    const double v = sample_variance(xs);
    return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

// Standard error of the sample variance, using the empirical fourth moment so
// the bound stays honest for non-Gaussian samples.
inline double variance_standard_error(std::span<const double> xs) {
    const std::size_t n = xs.size();
    require(n >= 4, ErrorCategory::domain, "variance_standard_error needs >= 4 samples");
    const double m = mean(xs);
    double m2 = 0.0;
    double m4 = 0.0;
    for (double x : xs) {
        const double d = x - m;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    const double var_of_var = (m4 - m2 * m2) / static_cast<double>(n);
    return std::sqrt(std::max(var_of_var, 0.0));
}

// Standard error of the sample covariance via the delta method.
inline double covariance_standard_error(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    require(n == b.size() && n >= 4, ErrorCategory::domain, "covariance_standard_error: bad input");
    const double ma = mean(a);
    const double mb = mean(b);
    double c = 0.0;
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = (a[i] - ma) * (b[i] - mb);
        c += p;
        q += p * p;
    }
    c /= static_cast<double>(n);
    q /= static_cast<double>(n);
    return std::sqrt(std::max(q - c * c, 0.0) / static_cast<double>(n));
}

}  // namespace spinsplit
