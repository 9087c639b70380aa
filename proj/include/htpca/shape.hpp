#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "htpca/eigen.hpp"
#include "htpca/errors.hpp"
#include "htpca/log_lut.hpp"
#include "htpca/matrix.hpp"
#include "htpca/robust.hpp"

namespace htpca {

enum class ShapeMethod { m1a, m1b, m1c, m2, m3, tyler, empirical };

inline const char* to_string(ShapeMethod m) {
    switch (m) {
    case ShapeMethod::m1a: return "m1a";
    case ShapeMethod::m1b: return "m1b";
    case ShapeMethod::m1c: return "m1c";
    case ShapeMethod::m2: return "m2";
    case ShapeMethod::m3: return "m3";
    case ShapeMethod::tyler: return "tyler";
    case ShapeMethod::empirical: return "empirical";
    }
    return "?";
}

inline ShapeMethod shape_method_from_string(const std::string& s) {
    if (s == "m1a") return ShapeMethod::m1a;
    if (s == "m1b") return ShapeMethod::m1b;
    if (s == "m1c") return ShapeMethod::m1c;
    if (s == "m2") return ShapeMethod::m2;
    if (s == "m3") return ShapeMethod::m3;
    if (s == "tyler") return ShapeMethod::tyler;
    if (s == "empirical") return ShapeMethod::empirical;
    throw config_error("unknown shape method '" + s + "'");
}

struct ShapeDiagnostics {
    int clamped = 0;           // rho values clamped into [-1, 1]
    int domain_violations = 0; // formula B with (sj/si)^2 gamma^2 > 1.25
    int low_rho_pairs = 0;     // method 2: pairs in the |rho| < 0.3 unreliable zone
    bool low_rho_flag = false;
    bool dim_warning = false; // method 3 with d < 50
    bool regularized = false; // tyler hit a singular iterate
    int iterations = 0;       // tyler
    Mat rho;                  // pairwise correlation estimates, unit diagonal
    Mat ell_g;                // method 2: recovered E[log|G_i| log|G_j|] per pair
};

struct ShapeEstimate {
    Mat sigma; // symmetric PSD, equal to the latent Sigma up to a positive scale
    ShapeDiagnostics diag;
};

// rho from the Cauchy fit of the ratio X_i/X_j plus the marginal scales.
// formula 'A': mu/sqrt(mu^2+gamma^2); 'B': sgn(mu) sqrt(1-(sj/si)^2 gamma^2);
// 'C': mu * sj/si clamped to [-1,1].
inline double rho_from_ratio(const CauchyParams& cp, double si, double sj, char formula,
                             ShapeDiagnostics* diag = nullptr) {
    if (!(cp.gamma > 0.0)) throw domain_error("rho_from_ratio: gamma must be > 0");
    switch (formula) {
    case 'A':
        return cp.mu / std::sqrt(cp.mu * cp.mu + cp.gamma * cp.gamma);
    case 'B': {
        if (!(si > 0.0) || !(sj > 0.0)) throw domain_error("rho_from_ratio: scales must be > 0");
        const double t = (sj / si) * cp.gamma;
        const double t2 = t * t;
        if (t2 > 1.25) {
            if (diag) ++diag->domain_violations;
            return 0.0; // sgn(mu) * 0
        }
        return (cp.mu >= 0.0 ? 1.0 : -1.0) * std::sqrt(std::max(0.0, 1.0 - t2));
    }
    case 'C': {
        if (!(si > 0.0) || !(sj > 0.0)) throw domain_error("rho_from_ratio: scales must be > 0");
        const double r = cp.mu * sj / si;
        if (r > 1.0 || r < -1.0) {
            if (diag) ++diag->clamped;
            return std::clamp(r, -1.0, 1.0);
        }
        return r;
    }
    default:
        throw domain_error(std::string("rho_from_ratio: unknown formula '") + formula + "'");
    }
}

namespace detail {

// Sum in descending sorted order so the result does not depend on how rows
// were labelled (permutation equivariance of method 3).
inline double stable_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end(), std::greater<double>());
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

inline bool row_lex_greater(const double* a, const double* b, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        if (a[k] != b[k]) return a[k] > b[k];
    }
    return false;
}

// Cauchy fit of the pairwise ratio with a content-canonical orientation
// (numerator = larger-scale row), so relabelling rows cannot flip which ratio
// is formed. Returns the fit oriented back as num/den = (i, j).
struct PairRatioFit {
    CauchyParams cp; // fit of row_i / row_j
    bool flipped;    // true when the canonical fit was row_j / row_i
};

inline PairRatioFit fit_pair_ratio(const Mat& x, std::size_t i, std::size_t j, double si,
                                   double sj, EstMode mode, std::vector<double>& work) {
    std::size_t num = i, den = j;
    double sden = sj;
    bool flipped = false;
    if (si < sj || (si == sj && row_lex_greater(x.row(j), x.row(i), x.cols()))) {
        num = j;
        den = i;
        sden = si;
        flipped = true;
    }
    const double* xn = x.row(num);
    const double* xd = x.row(den);
    const double eps = 1e-12 * sden;
    work.clear();
    for (std::size_t k = 0; k < x.cols(); ++k)
        if (std::abs(xd[k]) > eps) work.push_back(xn[k] / xd[k]);
    if (work.size() * 2 < x.cols())
        throw data_error("shape estimation: row " + std::to_string(den) +
                         " excludes more than half the ratio denominators");
    PairRatioFit out;
    out.cp = cauchy_fit(work, mode);
    out.flipped = flipped;
    // mu and gamma of the reciprocal ratio map through the Cauchy closure
    if (flipped) {
        const double m2 = out.cp.mu * out.cp.mu + out.cp.gamma * out.cp.gamma;
        out.cp = CauchyParams{out.cp.mu / m2, out.cp.gamma / m2, out.cp.converged};
    }
    return out;
}

inline std::vector<double> row_scales(const Mat& x, EstMode mode) {
    std::vector<double> s(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        try {
            s[i] = marginal_scale(std::span<const double>(x.row(i), x.cols()), mode);
        } catch (const data_error&) {
            throw data_error("shape estimation: row " + std::to_string(i) +
                             " is degenerate (zero spread)");
        }
    }
    return s;
}

inline Mat assemble_shape(const std::vector<double>& scales, const Mat& rho) {
    const std::size_t d = scales.size();
    Mat s(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        s(i, i) = scales[i] * scales[i];
        for (std::size_t j = i + 1; j < d; ++j)
            s(i, j) = s(j, i) = scales[i] * scales[j] * rho(i, j);
    }
    return s;
}

// Pre-projection symmetric estimate of method 1. The public wrapper projects
// to PSD; fit_heavy_pca consumes this raw form to avoid a second
// eigendecomposition.
inline Mat method1_raw(const Mat& x, char formula, EstMode mode, ShapeDiagnostics& diag) {
    const std::size_t d = x.rows(), n = x.cols();
    if (d < 2) throw domain_error("estimate_shape_method1: need d >= 2");
    if (n < 8) throw domain_error("estimate_shape_method1: need n >= 8");
    const auto scales = row_scales(x, mode);
    diag.rho = Mat::identity(d);
    std::vector<double> work;
    work.reserve(n);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            const auto fit = fit_pair_ratio(x, i, j, scales[i], scales[j], mode, work);
            const double r = rho_from_ratio(fit.cp, scales[i], scales[j], formula, &diag);
            diag.rho(i, j) = diag.rho(j, i) = std::clamp(r, -1.0, 1.0);
        }
    return assemble_shape(scales, diag.rho);
}

inline Mat method2_raw(const Mat& x, const LogLut& lut, const SubordinatorLogMoments& lm,
                       EstMode mode, ShapeDiagnostics& diag) {
    const std::size_t d = x.rows(), n = x.cols();
    if (d < 2) throw domain_error("estimate_shape_method2: need d >= 2");
    if (n < 8) throw domain_error("estimate_shape_method2: need n >= 8");
    if (lut.rho_grid.empty()) throw config_error("estimate_shape_method2: missing lookup table");

    // log|x| rows; zero entries are excluded from every log statistic
    Mat lx(d, n);
    std::vector<double> logsig(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double* xi = x.row(i);
        std::size_t used = 0;
        double mean_log = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (xi[k] == 0.0) {
                lx(i, k) = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            lx(i, k) = std::log(std::abs(xi[k]));
            mean_log += lx(i, k);
            ++used;
        }
        if (used * 2 < n)
            throw data_error("estimate_shape_method2: row " + std::to_string(i) +
                             " has more than half zero entries");
        mean_log /= static_cast<double>(used);
        // log-moment-consistent marginal sigma: E[log|X_i|] = E[log A]/2
        //   + log sigma_i + E[log|G|], solved for sigma_i
        logsig[i] = mean_log - 0.5 * lm.e_log_a - lm.e_log_abs_g;
    }

    const auto scales = row_scales(x, mode);
    diag.rho = Mat::identity(d);
    diag.ell_g = Mat(d, d);
    const double correction = 0.25 * lm.e_log_a_sq + lm.e_log_a * lm.e_log_abs_g;
    std::vector<double> work;
    work.reserve(n);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            double s = 0.0;
            std::size_t used = 0;
            for (std::size_t k = 0; k < n; ++k) {
                const double a = lx(i, k), b = lx(j, k);
                if (std::isnan(a) || std::isnan(b)) continue;
                s += (a - logsig[i]) * (b - logsig[j]);
                ++used;
            }
            if (used * 2 < n)
                throw data_error("estimate_shape_method2: pair (" + std::to_string(i) + "," +
                                 std::to_string(j) + ") excludes more than half the samples");
            const double ell_g = s / static_cast<double>(used) - correction;
            diag.ell_g(i, j) = diag.ell_g(j, i) = ell_g;
            bool clamped = false;
            const double rho_abs = lut.invert(ell_g, &clamped);
            if (clamped) ++diag.clamped;
            const auto fit = fit_pair_ratio(x, i, j, scales[i], scales[j], mode, work);
            const double r = (fit.cp.mu >= 0.0 ? rho_abs : -rho_abs);
            if (std::abs(r) < 0.3) {
                ++diag.low_rho_pairs;
                diag.low_rho_flag = true;
            }
            diag.rho(i, j) = diag.rho(j, i) = r;
        }
    return assemble_shape(scales, diag.rho);
}

} // namespace detail

// Method 1 (ratio of the marginals): pairwise Cauchy fits of X_i/X_j plus
// marginal scales; PSD-projected. The output diagonal carries one common
// unknown positive factor, which leaves eigenvectors untouched.
inline ShapeEstimate estimate_shape_method1(const Mat& x, char formula = 'C',
                                            EstMode mode = EstMode::ml) {
    ShapeEstimate out;
    const Mat raw = detail::method1_raw(x, formula, mode, out.diag);
    out.sigma = psd_project(raw);
    return out;
}

// Method 2 (log-correlation): empirical pairwise log products corrected by the
// subordinator log-moments, inverted through the lookup table. Sign comes from
// the Cauchy location of the pairwise ratio. |rho| < 0.3 is flagged as the
// documented unreliable zone.
inline ShapeEstimate estimate_shape_method2(const Mat& x, const LogLut& lut,
                                            const SubordinatorLogMoments& lm,
                                            EstMode mode = EstMode::ml) {
    ShapeEstimate out;
    const Mat raw = detail::method2_raw(x, lut, lm, mode, out.diag);
    out.sigma = psd_project(raw);
    return out;
}

struct Method3Estimate {
    Mat sigma;
    std::vector<double> a_hat; // per-column subordinator estimates
    ShapeDiagnostics diag;
};

// Method 3 (law of large numbers): A_j ~ ||x_j||^2 / t_hat with t_hat the
// summed squared marginal scales; dividing each column by sqrt(A_j) leaves
// Gaussian data whose empirical covariance estimates Sigma up to scale.
inline Method3Estimate estimate_shape_method3(const Mat& x, EstMode mode = EstMode::ml) {
    const std::size_t d = x.rows(), n = x.cols();
    if (d < 4) throw domain_error("estimate_shape_method3: refused for d < 4");
    if (n < 2) throw domain_error("estimate_shape_method3: need n >= 2");
    Method3Estimate out;
    out.diag.dim_warning = d < 50;

    std::vector<double> sq_scales(d);
    for (std::size_t i = 0; i < d; ++i) {
        std::span<const double> row(x.row(i), n);
        double s;
        if (n >= 8) {
            s = marginal_scale(row, mode);
        } else {
            // too few samples for the full estimators; median |x| keeps scale
            // equivariance
            std::vector<double> a(row.begin(), row.end());
            for (double& v : a) v = std::abs(v);
            s = median(a);
            if (!(s > 0.0)) throw data_error("estimate_shape_method3: row " + std::to_string(i) +
                                             " is degenerate");
        }
        sq_scales[i] = s * s;
    }
    const double t_hat = detail::stable_sum(sq_scales);

    out.a_hat.resize(n);
    Mat y(d, n);
    for (std::size_t j = 0; j < n; ++j) {
        double nrm2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) nrm2 += x(i, j) * x(i, j);
        if (!(nrm2 > 0.0))
            throw data_error("estimate_shape_method3: column " + std::to_string(j) + " is zero");
        out.a_hat[j] = nrm2 / t_hat;
        const double inv = 1.0 / std::sqrt(out.a_hat[j]);
        for (std::size_t i = 0; i < d; ++i) y(i, j) = x(i, j) * inv;
    }

    Mat s(d, d);
    const double invn = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            double acc = 0.0;
            const double* yi = y.row(i);
            const double* yj = y.row(j);
            for (std::size_t k = 0; k < n; ++k) acc += yi[k] * yj[k];
            s(i, j) = s(j, i) = acc * invn;
        }
    out.sigma = std::move(s);
    return out;
}

namespace detail {

// Unpivoted Cholesky solve for the SPD Tyler iterate; returns false when a
// pivot is not positive.
inline bool spd_factor(const Mat& s, Mat& l) {
    const std::size_t d = s.rows();
    l = Mat(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = s(i, j);
            for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
            if (i == j) {
                if (!(sum > 0.0)) return false;
                l(i, i) = std::sqrt(sum);
            } else {
                l(i, j) = sum / l(j, j);
            }
        }
    }
    return true;
}

inline void spd_solve_inplace(const Mat& l, std::vector<double>& b) {
    const std::size_t d = l.rows();
    for (std::size_t i = 0; i < d; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b[k];
        b[i] = s / l(i, i);
    }
    for (std::size_t i = d; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < d; ++k) s -= l(k, i) * b[k];
        b[i] = s / l(i, i);
    }
}

} // namespace detail

// Raised after max_iter Tyler iterations; carries the last iterate.
struct tyler_no_convergence : numerical_error {
    Mat last_iterate;
    tyler_no_convergence(const std::string& what, Mat last)
        : numerical_error(what), last_iterate(std::move(last)) {}
};

// Tyler's M-estimator of scatter: the fixed point of
//   Sigma = (d/n) sum_j x_j x_j^T / (x_j^T Sigma^{-1} x_j),
// trace-normalized to d each iteration, started at the identity.
inline ShapeEstimate tyler_scatter(const Mat& x, double tol = 1e-8, int max_iter = 500) {
    const std::size_t d = x.rows(), n = x.cols();
    if (n <= d) throw domain_error("tyler_scatter: need n > d");
    ShapeEstimate out;
    Mat s = Mat::identity(d);
    Mat l;
    std::vector<double> u(d);
    for (int it = 1; it <= max_iter; ++it) {
        out.diag.iterations = it;
        if (!detail::spd_factor(s, l)) {
            const double eps = 1e-12 * trace(s);
            for (std::size_t i = 0; i < d; ++i) s(i, i) += eps;
            out.diag.regularized = true;
            if (!detail::spd_factor(s, l))
                throw numerical_error("tyler_scatter: iterate is singular beyond repair");
        }
        Mat next(d, d);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < d; ++i) u[i] = x(i, j);
            std::vector<double> v = u;
            detail::spd_solve_inplace(l, v);
            double q = 0.0;
            for (std::size_t i = 0; i < d; ++i) q += u[i] * v[i];
            if (!(q > 0.0)) continue; // zero sample carries no direction
            const double w = 1.0 / q;
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = a; b < d; ++b) next(a, b) += w * u[a] * u[b];
        }
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < a; ++b) next(a, b) = next(b, a);
        next *= static_cast<double>(d) / static_cast<double>(n);
        next *= static_cast<double>(d) / trace(next);
        const double delta = frobenius_norm(next - s) / frobenius_norm(s);
        s = std::move(next);
        if (delta < tol) {
            out.sigma = std::move(s);
            return out;
        }
    }
    throw tyler_no_convergence("tyler_scatter: no convergence after " +
                                   std::to_string(max_iter) + " iterations",
                               std::move(s));
}

enum class Centering { none, median, mean };

inline Centering centering_from_string(const std::string& s) {
    if (s == "none") return Centering::none;
    if (s == "median") return Centering::median;
    if (s == "mean") return Centering::mean;
    throw config_error("unknown centering '" + s + "'");
}

// (1/n) X_c X_c^T after the chosen centering.
inline Mat empirical_covariance(const Mat& x, Centering center = Centering::none) {
    const std::size_t d = x.rows(), n = x.cols();
    if (n < 2) throw domain_error("empirical_covariance: need n >= 2");
    std::vector<double> c(d, 0.0);
    if (center == Centering::mean) {
        for (std::size_t i = 0; i < d; ++i) {
            const double* xi = x.row(i);
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += xi[k];
            c[i] = s / static_cast<double>(n);
        }
    } else if (center == Centering::median) {
        for (std::size_t i = 0; i < d; ++i)
            c[i] = median(std::span<const double>(x.row(i), n));
    }
    Mat s(d, d);
    const double invn = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            const double* xi = x.row(i);
            const double* xj = x.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += (xi[k] - c[i]) * (xj[k] - c[j]);
            s(i, j) = s(j, i) = acc * invn;
        }
    return s;
}

// Correlation entry of a shape matrix.
inline double shape_correlation(const Mat& s, std::size_t i, std::size_t j) {
    return s(i, j) / std::sqrt(s(i, i) * s(j, j));
}

} // namespace htpca
