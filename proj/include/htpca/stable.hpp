#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "htpca/errors.hpp"
#include "htpca/rng.hpp"

namespace htpca {

// Parameters of a univariate alpha-stable law S(alpha, beta, gamma, delta) in
// the 1-parameterization (Samorodnitsky-Taqqu convention). For alpha < 1 and
// beta = 1 the support is [delta, inf), which is what the subordinator uses.
struct StableParams {
    double alpha = 2.0;  // stability index, (0, 2]
    double beta = 0.0;   // skewness, [-1, 1]
    double gamma = 1.0;  // scale, > 0
    double delta = 0.0;  // location

    void validate() const {
        if (!(alpha > 0.0) || alpha > 2.0) throw domain_error("StableParams: alpha must be in (0,2]");
        if (beta < -1.0 || beta > 1.0) throw domain_error("StableParams: beta must be in [-1,1]");
        if (!(gamma > 0.0)) throw domain_error("StableParams: gamma must be > 0");
        if (!std::isfinite(delta)) throw domain_error("StableParams: delta must be finite");
    }
};

namespace detail {

// Chambers-Mallows-Stuck transform for a standard S(alpha, beta, 1, 0) draw
// from a uniform angle u in (-pi/2, pi/2) and an exponential w > 0.
inline double cms_standard(double alpha, double beta, double u, double w) {
    constexpr double half_pi = 1.5707963267948966;
    if (alpha == 1.0) {
        const double a = half_pi + beta * u;
        return (a * std::tan(u) - beta * std::log(half_pi * w * std::cos(u) / a)) / half_pi;
    }
    const double ta = std::tan(half_pi * alpha);
    const double b0 = std::atan(beta * ta) / alpha;
    const double s0 = std::pow(1.0 + beta * beta * ta * ta, 0.5 / alpha);
    const double au = alpha * (u + b0);
    return s0 * std::sin(au) / std::pow(std::cos(u), 1.0 / alpha) *
           std::pow(std::cos(u - au) / w, (1.0 - alpha) / alpha);
}

// Scale/shift a standard draw into S(alpha, beta, gamma, delta). In the
// 1-parameterization alpha = 1 picks up the (2/pi) beta gamma log gamma term.
inline double cms_scaled(const StableParams& p, double x0) {
    if (p.alpha == 1.0 && p.beta != 0.0)
        return p.gamma * x0 + 2.0 / 3.141592653589793 * p.beta * p.gamma * std::log(p.gamma) + p.delta;
    return p.gamma * x0 + p.delta;
}

template <class Engine>
double draw_stable(const StableParams& p, Engine& eng) {
    constexpr double half_pi = 1.5707963267948966;
    std::uniform_real_distribution<double> unif(-half_pi, half_pi);
    std::exponential_distribution<double> expo(1.0);
    double u = unif(eng);
    // the transform is singular exactly at the endpoints
    while (std::abs(u) >= half_pi) u = unif(eng);
    double w = expo(eng);
    while (!(w > 0.0)) w = expo(eng);
    return cms_scaled(p, cms_standard(p.alpha, p.beta, u, w));
}

} // namespace detail

// i.i.d. draws from S(alpha, beta, gamma, delta); deterministic given the seed.
inline std::vector<double> sample_standard_stable(const StableParams& params, std::size_t n,
                                                  const RngSeed& rng) {
    params.validate();
    if (n < 1) throw domain_error("sample_standard_stable: n must be >= 1");
    std::vector<double> out(n);
    auto eng = make_engine(rng);
    for (std::size_t i = 0; i < n; ++i) out[i] = detail::draw_stable(params, eng);
    return out;
}

} // namespace htpca
