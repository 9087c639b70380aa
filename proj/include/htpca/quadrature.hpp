#pragma once

#include <cmath>
#include <cstddef>
#include <functional>

namespace htpca {

// Double-exponential (tanh-sinh) quadrature on a finite interval. Converges
// at machine precision for integrands with endpoint log/algebraic
// singularities, which is what the log-moment integrals have.
//
// order = number of nodes per side per unit of t; the rule uses a fixed
// t-range and step h = t_max / order.
inline double tanh_sinh(const std::function<double(double)>& f, double a, double b,
                        int order = 96) {
    constexpr double half_pi = 1.5707963267948966;
    const double c = 0.5 * (a + b);
    const double r = 0.5 * (b - a);
    const double t_max = 3.6; // |x - endpoint| ~ exp(-pi/2 sinh t_max) ~ 1e-40
    const double h = t_max / order;
    double sum = 0.0;
    for (int k = -order; k <= order; ++k) {
        const double t = h * k;
        const double sh = half_pi * std::sinh(t);
        const double x = std::tanh(sh);
        const double w = half_pi * std::cosh(t) / (std::cosh(sh) * std::cosh(sh));
        const double xv = c + r * x;
        if (xv <= a || xv >= b) continue; // underflowed to the endpoint
        const double fv = f(xv);
        if (std::isfinite(fv)) sum += w * fv;
    }
    return sum * r * h;
}

// Integral over (0, inf) of g via the substitution r = exp(s): the transformed
// integrand decays double-exponentially for Gaussian-type tails, so the
// trapezoid rule on s converges at machine precision.
inline double exp_substitution_integral(const std::function<double(double)>& g, double s_lo,
                                        double s_hi, int order = 96) {
    const double h = (s_hi - s_lo) / (2 * order);
    double sum = 0.0;
    for (int k = 0; k <= 2 * order; ++k) {
        const double s = s_lo + h * k;
        const double r = std::exp(s);
        const double fv = g(r) * r; // Jacobian dr = r ds
        if (std::isfinite(fv)) sum += (k == 0 || k == 2 * order) ? 0.5 * fv : fv;
    }
    return sum * h;
}

} // namespace htpca
