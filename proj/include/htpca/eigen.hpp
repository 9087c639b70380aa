#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "htpca/errors.hpp"
#include "htpca/matrix.hpp"

namespace htpca {

// Eigenvalues descending; vectors.col(k) is the unit eigenvector of values[k].
struct EigenDecomp {
    std::vector<double> values;
    Mat vectors;
};

namespace detail {

// Deterministic orientation: make the largest-magnitude entry of each
// eigenvector positive (first such entry on ties).
inline void fix_eigvec_signs(Mat& v) {
    const std::size_t d = v.rows();
    for (std::size_t j = 0; j < v.cols(); ++j) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double a = std::abs(v(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (v(arg, j) < 0.0)
            for (std::size_t i = 0; i < d; ++i) v(i, j) = -v(i, j);
    }
}

inline void sort_eigen_descending(std::vector<double>& w, Mat& v) {
    const std::size_t d = w.size();
    std::vector<std::size_t> idx(d);
    std::iota(idx.begin(), idx.end(), 0);
    // descending by eigenvalue; near-ties (within 1e-8 of the scale) break by
    // lexicographic comparison of the sign-fixed eigenvectors
    double scale = 0.0;
    for (double x : w) scale = std::max(scale, std::abs(x));
    const double tie = 1e-8 * (scale > 0 ? scale : 1.0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (std::abs(w[a] - w[b]) > tie) return w[a] > w[b];
        for (std::size_t i = 0; i < v.rows(); ++i) {
            if (v(i, a) != v(i, b)) return v(i, a) > v(i, b);
        }
        return a < b;
    });
    std::vector<double> w2(d);
    Mat v2(v.rows(), d);
    for (std::size_t k = 0; k < d; ++k) {
        w2[k] = w[idx[k]];
        for (std::size_t i = 0; i < v.rows(); ++i) v2(i, k) = v(i, idx[k]);
    }
    w = std::move(w2);
    v = std::move(v2);
}

inline double offdiag_norm(const Mat& a) {
    double s = 0.0;
    for (std::size_t p = 0; p < a.rows(); ++p)
        for (std::size_t q = p + 1; q < a.cols(); ++q) s += a(p, q) * a(p, q);
    return std::sqrt(2.0 * s);
}

// Cyclic Jacobi rotations until the off-diagonal Frobenius mass drops below
// 1e-12 of the input norm.
inline EigenDecomp sym_eigen_jacobi(Mat a) {
    const std::size_t d = a.rows();
    Mat v = Mat::identity(d);
    const double target = 1e-12 * frobenius_norm(a);
    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (offdiag_norm(a) <= target) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p), aqq = a(q, q);
                if (std::abs(apq) < 1e-300) {
                    a(p, q) = a(q, p) = 0.0;
                    continue;
                }
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t r = 0; r < d; ++r) {
                    if (r != p && r != q) {
                        const double arp = a(r, p), arq = a(r, q);
                        a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
                        a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
                    }
                    const double vrp = v(r, p), vrq = v(r, q);
                    v(r, p) = vrp - s * (vrq + tau * vrp);
                    v(r, q) = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }
    EigenDecomp e;
    e.values.resize(d);
    for (std::size_t i = 0; i < d; ++i) e.values[i] = a(i, i);
    e.vectors = std::move(v);
    fix_eigvec_signs(e.vectors);
    sort_eigen_descending(e.values, e.vectors);
    return e;
}

inline double hypot2(double a, double b) { return std::sqrt(a * a + b * b); }

// Householder reduction to tridiagonal form with accumulated transforms,
// followed by implicit-shift QL. Classic tred2/tql2 scheme; O(d^3) with a
// small constant, which keeps 784-dimensional image covariances sub-second.
inline EigenDecomp sym_eigen_tridiag(const Mat& s) {
    const std::size_t n = s.rows();
    Mat v = s;
    std::vector<double> d(n, 0.0), e(n, 0.0);

    // tred2
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t l = i - 1;
        double h = 0.0, scale = 0.0;
        if (l > 0) {
            for (std::size_t k = 0; k <= l; ++k) scale += std::abs(v(i, k));
            if (scale == 0.0) {
                e[i] = v(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    v(i, k) /= scale;
                    h += v(i, k) * v(i, k);
                }
                double f = v(i, l);
                double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                v(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    v(j, i) = v(i, j) / h;
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += v(j, k) * v(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k) g += v(k, j) * v(i, k);
                    e[j] = g / h;
                    f += e[j] * v(i, j);
                }
                const double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = v(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (std::size_t k = 0; k <= j; ++k)
                        v(j, k) -= f * e[k] + g * v(i, k);
                }
            }
        } else {
            e[i] = v(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] != 0.0) {
            for (std::size_t j = 0; j < i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k < i; ++k) g += v(i, k) * v(k, j);
                for (std::size_t k = 0; k < i; ++k) v(k, j) -= g * v(k, i);
            }
        }
        d[i] = v(i, i);
        v(i, i) = 1.0;
        for (std::size_t j = 0; j < i; ++j) v(j, i) = v(i, j) = 0.0;
    }

    // tql2
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-300 || std::abs(e[m]) <= 2.3e-16 * dd) break;
            }
            if (m != l) {
                if (++iter > 50) throw numerical_error("sym_eigen: QL iteration did not converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = hypot2(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double si = 1.0, c = 1.0, p = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    double f = si * e[i];
                    const double b = c * e[i];
                    r = hypot2(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    si = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * si + 2.0 * c * b;
                    p = si * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (std::size_t k = 0; k < n; ++k) {
                        f = v(k, i + 1);
                        v(k, i + 1) = si * v(k, i) + c * f;
                        v(k, i) = c * v(k, i) - si * f;
                    }
                }
                if (r == 0.0 && m - l > 1) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }

    EigenDecomp out;
    out.values = std::move(d);
    out.vectors = std::move(v);
    fix_eigvec_signs(out.vectors);
    sort_eigen_descending(out.values, out.vectors);
    return out;
}

} // namespace detail

// Symmetric eigendecomposition. Cyclic Jacobi at small/medium dimension;
// tridiagonalization + QL above 128 where Jacobi's extra sweeps cost seconds.
inline EigenDecomp sym_eigen(const Mat& s) {
    if (s.rows() != s.cols()) throw domain_error("sym_eigen: matrix not square");
    if (!is_symmetric(s, 1e-9)) throw domain_error("sym_eigen: matrix not symmetric");
    Mat a = s;
    symmetrize(a); // exact symmetry for the rotations
    if (s.rows() <= 128) return detail::sym_eigen_jacobi(std::move(a));
    return detail::sym_eigen_tridiag(a);
}

// Clip negative eigenvalues to zero and reassemble. Preserves the leading
// eigenvectors, which are the quantity PCA consumes.
inline Mat psd_project(const Mat& s, EigenDecomp* decomp_out = nullptr) {
    EigenDecomp e = sym_eigen(s);
    const std::size_t d = s.rows();
    Mat out(d, d);
    for (std::size_t k = 0; k < d; ++k) {
        const double lam = std::max(0.0, e.values[k]);
        if (lam == 0.0) continue;
        for (std::size_t i = 0; i < d; ++i) {
            const double vi = lam * e.vectors(i, k);
            if (vi == 0.0) continue;
            for (std::size_t j = i; j < d; ++j) out(i, j) += vi * e.vectors(j, k);
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) out(i, j) = out(j, i);
    if (decomp_out) {
        for (double& w : e.values) w = std::max(0.0, w);
        *decomp_out = std::move(e);
    }
    return out;
}

// (lambda_max - lambda_min) / sum(lambda): eigenvalue spread as a fraction of
// the total spectral mass; 0 for a flat spectrum.
inline double relative_eigenvalue_spread(const std::vector<double>& values) {
    if (values.empty()) throw domain_error("relative_eigenvalue_spread: empty spectrum");
    double lo = values[0], hi = values[0], sum = 0.0;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
    }
    if (!(sum > 0.0)) throw domain_error("relative_eigenvalue_spread: nonpositive trace");
    return (hi - lo) / sum;
}

} // namespace htpca
