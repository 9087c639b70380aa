#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "htpca/errors.hpp"
#include "htpca/matrix.hpp"

namespace htpca {

enum class EstMode { quantile, ml };

inline const char* to_string(EstMode m) { return m == EstMode::quantile ? "quantile" : "ml"; }

// Location mu and scale gamma of a univariate Cauchy law.
struct CauchyParams {
    double mu = 0.0;
    double gamma = 1.0;
    bool converged = true; // false when ML hit the iteration cap and fell back
};

// Type-7 quantile (linear interpolation between order statistics) of an
// already sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 0) throw domain_error("quantile: empty sample");
    if (n == 1) return sorted[0];
    const double h = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::span<const double> x, double p) {
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    return quantile_sorted(s, p);
}

inline double median(std::span<const double> x) { return quantile(x, 0.5); }

inline double cauchy_loglik(std::span<const double> x, double mu, double gamma) {
    double ll = static_cast<double>(x.size()) * std::log(gamma);
    for (double v : x) {
        const double d = v - mu;
        ll -= std::log(d * d + gamma * gamma);
    }
    return ll; // up to the additive -n log(pi)
}

namespace detail {

struct QuantileInit {
    double mu, gamma;
};

inline QuantileInit cauchy_quantile_init(std::span<const double> x) {
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    if (s.front() == s.back())
        throw data_error("cauchy_fit: degenerate sample (all values equal)");
    const double mu = quantile_sorted(s, 0.5);
    double gamma = 0.5 * (quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25));
    if (!(gamma > 0.0)) {
        // heavy ties around the median; fall back to a positive spread statistic
        double mad = 0.0;
        for (double v : s) mad += std::abs(v - mu);
        gamma = mad / static_cast<double>(s.size());
    }
    if (!(gamma > 0.0)) throw data_error("cauchy_fit: zero spread sample");
    return {mu, gamma};
}

// Plain Fisher scoring, no likelihood evaluations; this is the hot path for
// the pairwise image fits. Callers re-check the likelihood afterwards.
inline CauchyParams cauchy_ml_refine_fast(std::span<const double> x, double mu, double gamma,
                                          int max_iter) {
    const double n = static_cast<double>(x.size());
    CauchyParams out{mu, gamma, false};
    for (int it = 0; it < max_iter; ++it) {
        double smu = 0.0, sg = 0.0;
        for (double v : x) {
            const double d = v - mu;
            const double den = d * d + gamma * gamma;
            smu += d / den;
            sg += (d * d - gamma * gamma) / den;
        }
        const double scale = 2.0 * gamma * gamma / n;
        const double dmu = scale * 2.0 * smu;
        double dg = scale * sg / gamma;
        if (gamma + dg <= 0.0) dg = -0.5 * gamma;
        mu += dmu;
        gamma += dg;
        if (std::abs(dmu) < 1e-9 * (1.0 + std::abs(mu)) && std::abs(dg) < 1e-9 * (1.0 + gamma)) {
            out.converged = true;
            break;
        }
    }
    out.mu = mu;
    out.gamma = gamma;
    return out;
}

// Fisher-scoring iteration for the Cauchy MLE with a step-halving safeguard,
// so the returned fit never has lower likelihood than its initializer.
inline CauchyParams cauchy_ml_refine(std::span<const double> x, double mu, double gamma,
                                     int max_iter) {
    const double n = static_cast<double>(x.size());
    CauchyParams out{mu, gamma, false};
    double ll = cauchy_loglik(x, mu, gamma);
    for (int it = 0; it < max_iter; ++it) {
        double smu = 0.0, sg = 0.0;
        for (double v : x) {
            const double d = v - mu;
            const double den = d * d + gamma * gamma;
            smu += 2.0 * d / den;
            sg += (d * d - gamma * gamma) / den;
        }
        sg /= gamma;
        // per-sample Fisher information is 1/(2 gamma^2) for both parameters
        const double scale = 2.0 * gamma * gamma / n;
        double dmu = scale * smu;
        double dg = scale * sg;
        double step = 1.0;
        double mu2 = mu, g2 = gamma, ll2 = ll;
        for (int half = 0; half < 30; ++half) {
            mu2 = mu + step * dmu;
            g2 = gamma + step * dg;
            if (g2 > 0.0) {
                ll2 = cauchy_loglik(x, mu2, g2);
                if (ll2 >= ll) break;
            }
            step *= 0.5;
        }
        if (!(g2 > 0.0) || ll2 < ll) break; // no admissible ascent step
        const bool done = std::abs(mu2 - mu) < 1e-9 * (1.0 + std::abs(mu2)) &&
                          std::abs(g2 - gamma) < 1e-9 * (1.0 + g2);
        mu = mu2;
        gamma = g2;
        ll = ll2;
        if (done) {
            out.converged = true;
            break;
        }
    }
    out.mu = mu;
    out.gamma = gamma;
    return out;
}

// One-parameter ML scale of a symmetric sample (mu pinned at 0), fitted on the
// pooled {x, -x} sample, which has the same score as fitting x with mu = 0.
inline double cauchy_ml_scale_sym(std::span<const double> x, int max_iter = 200) {
    const double n = static_cast<double>(x.size());
    std::vector<double> absx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) absx[i] = std::abs(x[i]);
    double gamma = median(absx); // half-IQR of the symmetrized sample
    if (!(gamma > 0.0)) {
        double s = 0.0;
        for (double v : absx) s += v;
        gamma = s / n;
    }
    if (!(gamma > 0.0)) throw data_error("marginal_scale: zero spread sample");
    for (int it = 0; it < max_iter; ++it) {
        double sg = 0.0;
        for (double v : x) {
            const double den = v * v + gamma * gamma;
            sg += (v * v - gamma * gamma) / den;
        }
        sg /= gamma;
        const double dg = (2.0 * gamma * gamma / n) * sg;
        double g2 = gamma + dg;
        if (!(g2 > 0.0)) g2 = 0.5 * gamma;
        const bool done = std::abs(g2 - gamma) < 1e-9 * (1.0 + g2);
        gamma = g2;
        if (done) break;
    }
    return gamma;
}

} // namespace detail

// Cauchy location/scale fit. quantile: median and half-IQR. ml: Newton-refined
// MLE initialized at the quantile estimate; falls back to the initializer with
// converged = false if 200 iterations are not enough.
inline CauchyParams cauchy_fit(std::span<const double> samples, EstMode mode = EstMode::ml,
                               int max_iter = 200) {
    if (samples.size() < 8) throw domain_error("cauchy_fit: need at least 8 samples");
    const auto init = detail::cauchy_quantile_init(samples);
    if (mode == EstMode::quantile) return {init.mu, init.gamma, true};
    CauchyParams ml = detail::cauchy_ml_refine_fast(samples, init.mu, init.gamma, max_iter);
    if (ml.converged &&
        cauchy_loglik(samples, ml.mu, ml.gamma) >= cauchy_loglik(samples, init.mu, init.gamma))
        return ml;
    // rare: plain scoring oscillated or lost likelihood; redo with safeguards
    ml = detail::cauchy_ml_refine(samples, init.mu, init.gamma, max_iter);
    if (!ml.converged && !(cauchy_loglik(samples, ml.mu, ml.gamma) >
                           cauchy_loglik(samples, init.mu, init.gamma)))
        return {init.mu, init.gamma, false};
    return ml;
}

// Dispersion statistic, equivariant under scaling: half-IQR (quantile) or the
// ML Cauchy scale of the symmetrized sample (ml).
inline double marginal_scale(std::span<const double> row, EstMode mode = EstMode::ml) {
    if (row.size() < 8) throw domain_error("marginal_scale: need at least 8 samples");
    if (mode == EstMode::quantile) {
        std::vector<double> s(row.begin(), row.end());
        std::sort(s.begin(), s.end());
        if (s.front() == s.back())
            throw data_error("marginal_scale: degenerate sample (all values equal)");
        const double g = 0.5 * (quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25));
        if (!(g > 0.0)) throw data_error("marginal_scale: zero spread sample");
        return g;
    }
    bool all_equal = true;
    for (std::size_t i = 1; i < row.size(); ++i)
        if (row[i] != row[0]) {
            all_equal = false;
            break;
        }
    if (all_equal) throw data_error("marginal_scale: degenerate sample (all values equal)");
    return detail::cauchy_ml_scale_sym(row);
}

// Per-row location estimate: the "average image" subtracted before PCA.
inline std::vector<double> location_vector(const Mat& x, EstMode mode = EstMode::ml) {
    if (x.cols() < 8) throw domain_error("location_vector: need at least 8 samples per row");
    std::vector<double> loc(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::span<const double> row(x.row(i), x.cols());
        if (mode == EstMode::quantile) {
            std::vector<double> s(row.begin(), row.end());
            std::sort(s.begin(), s.end());
            if (s.front() == s.back())
                throw data_error("location_vector: degenerate row " + std::to_string(i));
            loc[i] = quantile_sorted(s, 0.5);
        } else {
            try {
                loc[i] = cauchy_fit(row, EstMode::ml).mu;
            } catch (const data_error&) {
                throw data_error("location_vector: degenerate row " + std::to_string(i));
            }
        }
    }
    return loc;
}

} // namespace htpca
