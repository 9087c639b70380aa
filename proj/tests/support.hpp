#pragma once

// Shared helpers for the test suites: independent reference statistics and
// small generators kept deliberately separate from the library internals they
// check.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "htpca/matrix.hpp"
#include "htpca/rng.hpp"

namespace testsup {

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

// Asymptotic Kolmogorov tail probability for the two-sample statistic.
inline double ks_pvalue(double d, std::size_t n, std::size_t m) {
    const double en = std::sqrt(static_cast<double>(n) * m / static_cast<double>(n + m));
    const double lambda = (en + 0.12 + 0.11 / en) * d;
    double p = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        p += 2.0 * sign * term;
        sign = -sign;
        if (term < 1e-12) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

// Levy(c = 1/2) reference draws: 1 / (2 Z^2), Z standard normal.
inline std::vector<double> levy_half_reference(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(n);
    for (auto& v : out) {
        double z = normal(eng);
        while (z == 0.0) z = normal(eng);
        v = 1.0 / (2.0 * z * z);
    }
    return out;
}

// Random d x m matrix with orthonormal columns (Gram-Schmidt on normals).
inline htpca::Mat random_orthonormal(std::size_t d, std::size_t m, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    htpca::Mat w(d, m);
    for (std::size_t k = 0; k < m; ++k) {
        std::vector<double> v(d);
        for (auto& x : v) x = normal(eng);
        for (std::size_t prev = 0; prev < k; ++prev) {
            double dp = 0.0;
            for (std::size_t i = 0; i < d; ++i) dp += v[i] * w(i, prev);
            for (std::size_t i = 0; i < d; ++i) v[i] -= dp * w(i, prev);
        }
        double nrm = 0.0;
        for (double x : v) nrm += x * x;
        nrm = std::sqrt(nrm);
        for (std::size_t i = 0; i < d; ++i) w(i, k) = v[i] / nrm;
    }
    return w;
}

// Random symmetric matrix with entries ~ N(0,1).
inline htpca::Mat random_symmetric(std::size_t d, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    htpca::Mat s(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) s(i, j) = s(j, i) = normal(eng);
    return s;
}

// digamma via central differences of lgamma; plenty for 3-sigma oracles
inline double digamma(double x) {
    const double h = 1e-6;
    return (std::lgamma(x + h) - std::lgamma(x - h)) / (2.0 * h);
}

inline constexpr double kEulerGamma = std::numbers::egamma;
inline const double kLogAbsGauss = -0.5 * (std::numbers::egamma + std::numbers::ln2);

// closed-form Gaussian log-correlation, the independent oracle for the LUT
inline double ell_closed_form(double rho) {
    const double a = std::asin(rho);
    return kLogAbsGauss * kLogAbsGauss + 0.5 * a * a;
}

} // namespace testsup
