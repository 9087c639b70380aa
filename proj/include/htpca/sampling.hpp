#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "htpca/errors.hpp"
#include "htpca/matrix.hpp"
#include "htpca/rng.hpp"
#include "htpca/stable.hpp"

namespace htpca {

// Pivoted Cholesky factor of a symmetric PSD matrix: L with L L^T = sigma.
// Rank-deficient inputs get zeroed trailing columns (L is lower-triangular up
// to the pivot permutation). Throws if a pivot goes negative beyond roundoff.
inline Mat cholesky(const Mat& sigma) {
    const std::size_t d = sigma.rows();
    if (sigma.cols() != d) throw domain_error("cholesky: matrix not square");
    if (!is_symmetric(sigma, 1e-12)) throw domain_error("cholesky: matrix not symmetric");

    Mat a = sigma;
    std::vector<std::size_t> perm(d);
    for (std::size_t i = 0; i < d; ++i) perm[i] = i;

    double maxdiag0 = 0.0;
    for (std::size_t i = 0; i < d; ++i) maxdiag0 = std::max(maxdiag0, std::abs(a(i, i)));
    const double neg_tol = 1e-10 * (maxdiag0 > 0 ? maxdiag0 : 1.0);
    const double zero_tol = 1e-14 * (maxdiag0 > 0 ? maxdiag0 : 1.0);

    Mat lp(d, d); // factor in pivoted order
    std::size_t rank = d;
    for (std::size_t k = 0; k < d; ++k) {
        // choose the largest remaining diagonal as pivot
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < d; ++i)
            if (a(perm[i], perm[i]) > a(perm[piv], perm[piv])) piv = i;
        if (piv != k) {
            std::swap(perm[k], perm[piv]);
            for (std::size_t m = 0; m < k; ++m) std::swap(lp(k, m), lp(piv, m));
        }
        const std::size_t pk = perm[k];

        double akk = a(pk, pk);
        if (akk < -neg_tol) throw numerical_error("cholesky: matrix not positive semi-definite");
        if (akk <= zero_tol) {
            rank = k;
            break;
        }
        const double lkk = std::sqrt(akk);
        lp(k, k) = lkk;
        for (std::size_t i = k + 1; i < d; ++i) lp(i, k) = a(perm[i], pk) / lkk;
        for (std::size_t i = k + 1; i < d; ++i)
            for (std::size_t j = k + 1; j <= i; ++j) {
                const double v = a(perm[i], perm[j]) - lp(i, k) * lp(j, k);
                a(perm[i], perm[j]) = v;
                a(perm[j], perm[i]) = v;
            }
    }
    (void)rank;

    // undo the row permutation: row perm[i] of the result is row i of lp
    Mat l(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) l(perm[i], j) = lp(i, j);
    return l;
}

// Positive random scale A of the superstatistical model X = sqrt(A) G.
struct Subordinator {
    enum class Kind { stable, student, degenerate };

    Kind kind = Kind::degenerate;
    double alpha = 1.0; // stability index of the data, kind == stable
    double nu = 1.0;    // degrees of freedom, kind == student
    double value = 1.0; // constant, kind == degenerate

    static Subordinator make_stable(double alpha) {
        if (!(alpha > 0.0) || alpha >= 2.0)
            throw domain_error("Subordinator: stable alpha must be in (0,2)");
        Subordinator s;
        s.kind = Kind::stable;
        s.alpha = alpha;
        return s;
    }
    static Subordinator make_student(double nu) {
        if (!(nu > 0.0)) throw domain_error("Subordinator: student nu must be > 0");
        Subordinator s;
        s.kind = Kind::student;
        s.nu = nu;
        return s;
    }
    static Subordinator make_degenerate(double a) {
        if (!(a > 0.0)) throw domain_error("Subordinator: degenerate value must be > 0");
        Subordinator s;
        s.kind = Kind::degenerate;
        s.value = a;
        return s;
    }

    // A ~ S(alpha/2, 1, cos(alpha pi / 4)^(2/alpha), 0), totally skewed.
    StableParams stable_params() const {
        StableParams p;
        p.alpha = alpha / 2.0;
        p.beta = 1.0;
        p.gamma = std::pow(std::cos(alpha * 3.141592653589793 / 4.0), 2.0 / alpha);
        p.delta = 0.0;
        return p;
    }

    template <class Engine>
    double draw(Engine& eng) const {
        double a = 0.0;
        switch (kind) {
        case Kind::degenerate:
            return value;
        case Kind::stable:
            a = detail::cms_scaled(stable_params(),
                                   detail::cms_standard(alpha / 2.0, 1.0, draw_angle(eng), draw_expo(eng)));
            break;
        case Kind::student: {
            std::chi_squared_distribution<double> chi2(nu);
            double u = chi2(eng);
            while (!(u > 0.0)) u = chi2(eng);
            a = nu / u;
            break;
        }
        }
        if (!(a > 0.0))
            throw numerical_error("Subordinator: nonpositive draw (internal consistency)");
        return a;
    }

private:
    template <class Engine>
    static double draw_angle(Engine& eng) {
        constexpr double half_pi = 1.5707963267948966;
        std::uniform_real_distribution<double> unif(-half_pi, half_pi);
        double u = unif(eng);
        while (std::abs(u) >= half_pi) u = unif(eng);
        return u;
    }
    template <class Engine>
    static double draw_expo(Engine& eng) {
        std::exponential_distribution<double> expo(1.0);
        double w = expo(eng);
        while (!(w > 0.0)) w = expo(eng);
        return w;
    }
};

inline std::vector<double> sample_subordinator(const Subordinator& sub, std::size_t n,
                                               const RngSeed& rng) {
    if (n < 1) throw domain_error("sample_subordinator: n must be >= 1");
    std::vector<double> out(n);
    auto eng = make_engine(rng);
    for (std::size_t i = 0; i < n; ++i) out[i] = sub.draw(eng);
    return out;
}

// Covariance of the latent Gaussian plus its cached Cholesky factor.
struct GaussianSpec {
    Mat sigma;
    Mat chol;

    static GaussianSpec from_sigma(const Mat& sigma) {
        GaussianSpec g;
        g.sigma = sigma;
        g.chol = cholesky(sigma);
        return g;
    }

    std::size_t dim() const { return sigma.rows(); }
};

// d x n draw of the superstatistical model: column j is sqrt(A_j) L z_j with
// A_j and z_j drawn from the column's own substream, so output is independent
// of any parallel schedule.
inline Mat sample_superstatistical(const GaussianSpec& spec, const Subordinator& sub,
                                   std::size_t n, const RngSeed& rng) {
    if (n < 1) throw domain_error("sample_superstatistical: n must be >= 1");
    const std::size_t d = spec.dim();
    if (spec.chol.rows() != d) throw domain_error("sample_superstatistical: spec.chol invalid");

    Mat x(d, n);
    std::vector<double> z(d);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
        auto eng = make_engine(rng, j);
        const double sa = std::sqrt(sub.draw(eng));
        for (std::size_t i = 0; i < d; ++i) z[i] = normal(eng);
        // full row loop: the pivoted factor need not be lower triangular
        for (std::size_t i = 0; i < d; ++i) {
            const double* li = spec.chol.row(i);
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += li[k] * z[k];
            x(i, j) = sa * s;
        }
    }
    return x;
}

} // namespace htpca
