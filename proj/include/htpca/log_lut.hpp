#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "htpca/errors.hpp"
#include "htpca/quadrature.hpp"
#include "htpca/rng.hpp"
#include "htpca/sampling.hpp"

namespace htpca {

// E[log|G|] for a unit-variance Gaussian.
inline double expected_log_abs_gauss() {
    return -0.5 * (std::numbers::egamma + std::numbers::ln2);
}

// Monotone table rho -> E[log|G1| log|G2|] for a unit-variance bivariate
// normal pair with correlation rho. Inverting it recovers |rho| from an
// estimated Gaussian log-correlation.
struct LogLut {
    std::vector<double> rho_grid;   // ascending, [0, 1]
    std::vector<double> ell_values; // strictly increasing
    double step = 0.0;
    int order = 0;

    double ell_min() const { return ell_values.front(); }
    double ell_max() const { return ell_values.back(); }

    // forward interpolation rho -> ell
    double lookup(double rho) const {
        rho = std::clamp(rho, 0.0, 1.0);
        const double pos = rho / step;
        const std::size_t lo = std::min(static_cast<std::size_t>(pos), rho_grid.size() - 2);
        const double frac = pos - static_cast<double>(lo);
        return ell_values[lo] + frac * (ell_values[lo + 1] - ell_values[lo]);
    }

    // inverse interpolation ell -> |rho|; out-of-range values clamp to 0 or 1
    double invert(double ell, bool* clamped = nullptr) const {
        if (clamped) *clamped = false;
        if (ell <= ell_values.front()) {
            if (clamped && ell < ell_values.front()) *clamped = true;
            return rho_grid.front();
        }
        if (ell >= ell_values.back()) {
            if (clamped && ell > ell_values.back()) *clamped = true;
            return rho_grid.back();
        }
        const auto it = std::upper_bound(ell_values.begin(), ell_values.end(), ell);
        const std::size_t hi = static_cast<std::size_t>(it - ell_values.begin());
        const std::size_t lo = hi - 1;
        const double frac = (ell - ell_values[lo]) / (ell_values[hi] - ell_values[lo]);
        return rho_grid[lo] + frac * (rho_grid[hi] - rho_grid[lo]);
    }
};

namespace detail {

// Radial and angular pieces of E[log|G1| log|G2|] in polar coordinates:
// G1 = R cos(theta), G2 = R sin(theta + asin(rho)), with R Rayleigh and theta
// uniform, independent. The expectation tensor-factors into
//   E[(log R)^2] + 2 E[log R] E[log|cos|] + T(psi),
// where T(psi) = (1/2pi) int log|cos(t)| log|sin(t+psi)| dt. Each 1-D integral
// is computed numerically with the integration split at the singular angles.
struct LogLutIntegrals {
    double e_log_r;    // E[log R]
    double e_log_r_sq; // E[(log R)^2]
    double e_log_cos;  // (1/2pi) int log|cos|
};

inline LogLutIntegrals log_lut_radial(int order) {
    LogLutIntegrals li{};
    auto rayleigh = [](double r) { return r * std::exp(-0.5 * r * r); };
    li.e_log_r = exp_substitution_integral(
        [&](double r) { return std::log(r) * rayleigh(r); }, -20.0, 3.0, order);
    li.e_log_r_sq = exp_substitution_integral(
        [&](double r) { const double l = std::log(r); return l * l * rayleigh(r); }, -20.0, 3.0,
        order);
    constexpr double pi = std::numbers::pi;
    li.e_log_cos = tanh_sinh([](double t) { return std::log(std::cos(t)); }, 0.0, pi / 2, order) *
                   2.0 / pi; // quarter period covers it by symmetry
    return li;
}

inline double log_lut_angular(double psi, int order) {
    constexpr double pi = std::numbers::pi;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    auto f = [psi](double t) {
        return std::log(std::abs(std::cos(t))) * std::log(std::abs(std::sin(t + psi)));
    };
    // split at the zeros of cos(t) and of sin(t + psi) inside [0, 2pi]
    std::vector<double> cuts = {0.0, pi / 2, 1.5 * pi, two_pi};
    for (double z : {-psi, pi - psi, two_pi - psi, two_pi + pi - psi}) {
        double t = z;
        while (t < 0.0) t += two_pi;
        while (t > two_pi) t -= two_pi;
        cuts.push_back(t);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-13; }),
               cuts.end());
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        if (cuts[k + 1] - cuts[k] > 1e-13) sum += tanh_sinh(f, cuts[k], cuts[k + 1], order);
    return sum / two_pi;
}

} // namespace detail

// Build the lookup table on the grid rho = 0, step, ..., 1. The table is
// verified strictly increasing; a non-monotone result means the quadrature
// order is too low.
inline LogLut build_log_lut(double step = 1e-3, int order = 96) {
    if (!(step > 0.0) || step > 1e-2) throw domain_error("build_log_lut: step must be in (0, 1e-2]");
    if (order < 16) throw domain_error("build_log_lut: order must be >= 16");

    LogLut lut;
    lut.step = step;
    lut.order = order;
    const auto li = detail::log_lut_radial(order);

    const std::size_t n = static_cast<std::size_t>(std::llround(1.0 / step));
    lut.rho_grid.resize(n + 1);
    lut.ell_values.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        const double rho = std::min(1.0, static_cast<double>(k) * step);
        const double psi = std::asin(rho);
        lut.rho_grid[k] = rho;
        lut.ell_values[k] =
            li.e_log_r_sq + 2.0 * li.e_log_r * li.e_log_cos + detail::log_lut_angular(psi, order);
    }
    for (std::size_t k = 0; k + 1 <= n; ++k)
        if (!(lut.ell_values[k + 1] > lut.ell_values[k]))
            throw numerical_error(
                "build_log_lut: table not strictly increasing at rho = " +
                std::to_string(lut.rho_grid[k]) + "; increase the quadrature order");
    return lut;
}

// E[log A] and E[(log A)^2] of a subordinator, plus the analytic E[log|G|]
// constant. Monte-Carlo for stable/student kinds, exact for degenerate.
struct SubordinatorLogMoments {
    double e_log_a = 0.0;
    double e_log_a_sq = 0.0;
    double se_log_a = 0.0;    // standard error of the MC estimate
    double se_log_a_sq = 0.0; //
    double e_log_abs_g = expected_log_abs_gauss();
};

inline SubordinatorLogMoments subordinator_log_moments(const Subordinator& sub, std::size_t n_mc,
                                                       const RngSeed& rng) {
    SubordinatorLogMoments lm;
    if (sub.kind == Subordinator::Kind::degenerate) {
        const double l = std::log(sub.value);
        lm.e_log_a = l;
        lm.e_log_a_sq = l * l;
        return lm;
    }
    if (n_mc < 1000000) throw domain_error("subordinator_log_moments: n_mc must be >= 1e6");
    auto eng = make_engine(rng);
    double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        const double l = std::log(sub.draw(eng));
        const double l2 = l * l;
        s1 += l;
        s2 += l2;
        s3 += l2 * l;
        s4 += l2 * l2;
    }
    const double n = static_cast<double>(n_mc);
    lm.e_log_a = s1 / n;
    lm.e_log_a_sq = s2 / n;
    lm.se_log_a = std::sqrt(std::max(0.0, s2 / n - lm.e_log_a * lm.e_log_a) / n);
    lm.se_log_a_sq = std::sqrt(std::max(0.0, s4 / n - lm.e_log_a_sq * lm.e_log_a_sq) / n);
    return lm;
}

} // namespace htpca
