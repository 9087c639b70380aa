#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "htpca/eigen.hpp"
#include "htpca/errors.hpp"
#include "htpca/log_lut.hpp"
#include "htpca/matrix.hpp"
#include "htpca/robust.hpp"
#include "htpca/shape.hpp"

namespace htpca {

// Orthonormal component matrix, eigenvalues descending, and the location used
// for centering.
struct PcaModel {
    Mat components; // d x m, W^T W = I_m
    std::vector<double> eigenvalues;
    std::vector<double> location;

    std::size_t dim() const { return components.rows(); }
    std::size_t n_components() const { return components.cols(); }
};

struct LogCostReport {
    double value = 0.0;
    std::size_t n_used = 0;
};

inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw domain_error("cosine_similarity: dimension mismatch");
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    if (!(uu > 0.0) || !(vv > 0.0)) throw domain_error("cosine_similarity: zero vector");
    return uv / std::sqrt(uu * vv);
}

inline bool is_orthonormal(const Mat& w, double tol = 1e-8) {
    const Mat g = mul_at_b(w, w);
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) {
            const double target = (i == j) ? 1.0 : 0.0;
            if (std::abs(g(i, j) - target) > tol) return false;
        }
    return true;
}

// Empirical mean of ln(1 + ||x_j - W M^T x_j||^2). Finite for any tail weight,
// which is the point of using it instead of the squared loss.
inline LogCostReport log_cost(const Mat& x, const Mat& w, const Mat& m_map) {
    if (w.rows() != x.rows() || m_map.rows() != x.rows() || m_map.cols() != w.cols())
        throw domain_error("log_cost: dimension mismatch");
    if (!is_orthonormal(w)) throw domain_error("log_cost: W is not orthonormal");
    const std::size_t d = x.rows(), n = x.cols(), m = w.cols();
    LogCostReport rep;
    std::vector<double> xv(d), t(m);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < d; ++i) xv[i] = x(i, j);
        for (std::size_t k = 0; k < m; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) s += m_map(i, k) * xv[i];
            t[k] = s;
        }
        double r2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double s = xv[i];
            for (std::size_t k = 0; k < m; ++k) s -= w(i, k) * t[k];
            r2 += s * s;
        }
        acc += std::log1p(r2);
    }
    rep.value = n ? acc / static_cast<double>(n) : 0.0;
    rep.n_used = n;
    return rep;
}

// x_hat = location + W W^T (x - location), columnwise.
inline Mat project_reconstruct(const Mat& x, const PcaModel& model) {
    const std::size_t d = x.rows(), n = x.cols(), m = model.n_components();
    if (model.dim() != d) throw domain_error("project_reconstruct: dimension mismatch");
    if (!model.location.empty() && model.location.size() != d)
        throw domain_error("project_reconstruct: bad location length");
    Mat out(d, n);
    std::vector<double> xc(d), t(m);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < d; ++i)
            xc[i] = x(i, j) - (model.location.empty() ? 0.0 : model.location[i]);
        for (std::size_t k = 0; k < m; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) s += model.components(i, k) * xc[i];
            t[k] = s;
        }
        for (std::size_t i = 0; i < d; ++i) {
            double s = model.location.empty() ? 0.0 : model.location[i];
            for (std::size_t k = 0; k < m; ++k) s += model.components(i, k) * t[k];
            out(i, j) = s;
        }
    }
    return out;
}

struct FitOptions {
    EstMode mode = EstMode::ml;
    const LogLut* lut = nullptr;                // method 2
    const SubordinatorLogMoments* lm = nullptr; // method 2
    ShapeDiagnostics* diag_out = nullptr;
};

namespace detail {

inline PcaModel model_from_decomp(EigenDecomp&& e, std::size_t m, std::vector<double> location) {
    PcaModel model;
    model.eigenvalues.assign(e.values.begin(), e.values.begin() + m);
    model.components = Mat(e.vectors.rows(), m);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < e.vectors.rows(); ++i)
            model.components(i, k) = e.vectors(i, k);
    model.location = std::move(location);
    return model;
}

// Top-m eigenpairs of (1/n) X X^T through the n x n Gram matrix; exact for the
// empirical estimator and much cheaper when n << d (image stacks).
inline PcaModel empirical_pca_gram(const Mat& xc, std::size_t m, std::vector<double> location) {
    const std::size_t d = xc.rows(), n = xc.cols();
    Mat g(n, n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a; b < n; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) s += xc(i, a) * xc(i, b);
            g(a, b) = g(b, a) = s / static_cast<double>(n);
        }
    EigenDecomp eg = sym_eigen(g);
    PcaModel model;
    model.location = std::move(location);
    model.components = Mat(d, m);
    model.eigenvalues.assign(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        model.eigenvalues[k] = std::max(0.0, eg.values[k]);
        std::vector<double> u(d, 0.0);
        for (std::size_t a = 0; a < n; ++a) {
            const double va = eg.vectors(a, k);
            if (va == 0.0) continue;
            for (std::size_t i = 0; i < d; ++i) u[i] += xc(i, a) * va;
        }
        const double nrm = norm2(u);
        if (nrm > 0.0)
            for (std::size_t i = 0; i < d; ++i) model.components(i, k) = u[i] / nrm;
        else
            model.components(k < d ? k : 0, k) = 1.0; // null direction, arbitrary axis
    }
    detail::fix_eigvec_signs(model.components);
    return model;
}

} // namespace detail

// Heavy-tailed PCA: center by a robust location, estimate the latent shape by
// the chosen method, take the top-m eigenpairs. The classical baseline
// (method = empirical) centers by the mean instead, matching the usual PCA.
inline PcaModel fit_heavy_pca(const Mat& x, ShapeMethod method, std::size_t m,
                              const FitOptions& opt = {}) {
    const std::size_t d = x.rows(), n = x.cols();
    if (m < 1 || m > d) throw domain_error("fit_heavy_pca: need 1 <= m <= d");

    std::vector<double> loc(d, 0.0);
    Mat xc(d, n);
    if (method == ShapeMethod::empirical) {
        for (std::size_t i = 0; i < d; ++i) {
            const double* xi = x.row(i);
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += xi[k];
            loc[i] = s / static_cast<double>(n);
        }
    } else {
        loc = location_vector(x, opt.mode);
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < n; ++k) xc(i, k) = x(i, k) - loc[i];

    ShapeDiagnostics local_diag;
    ShapeDiagnostics& diag = opt.diag_out ? *opt.diag_out : local_diag;

    Mat raw;
    switch (method) {
    case ShapeMethod::m1a:
        raw = detail::method1_raw(xc, 'A', opt.mode, diag);
        break;
    case ShapeMethod::m1b:
        raw = detail::method1_raw(xc, 'B', opt.mode, diag);
        break;
    case ShapeMethod::m1c:
        raw = detail::method1_raw(xc, 'C', opt.mode, diag);
        break;
    case ShapeMethod::m2:
        if (!opt.lut || !opt.lm)
            throw config_error("fit_heavy_pca: method m2 needs a lookup table and log-moments");
        raw = detail::method2_raw(xc, *opt.lut, *opt.lm, opt.mode, diag);
        break;
    case ShapeMethod::m3:
        raw = estimate_shape_method3(xc, opt.mode).sigma;
        break;
    case ShapeMethod::tyler:
        raw = tyler_scatter(xc).sigma;
        break;
    case ShapeMethod::empirical:
        if (n * 4 <= d) return detail::empirical_pca_gram(xc, m, std::move(loc));
        raw = empirical_covariance(xc, Centering::none);
        break;
    }

    EigenDecomp e = sym_eigen(raw);
    for (double& w : e.values) w = std::max(0.0, w); // PSD clip
    return detail::model_from_decomp(std::move(e), m, std::move(loc));
}

} // namespace htpca
