#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "htpca/errors.hpp"
#include "htpca/io.hpp"
#include "htpca/log_lut.hpp"
#include "htpca/matrix.hpp"
#include "htpca/pca.hpp"
#include "htpca/robust.hpp"
#include "htpca/sampling.hpp"
#include "htpca/shape.hpp"

namespace htpca {

// Index-parallel loop with deterministic output: every item writes to its own
// slot, so the thread count never changes results.
template <class Fn>
inline void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const int t = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (int w = 0; w < t; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += t) fn(i);
        });
    for (auto& th : pool) th.join();
}

enum class ExperimentKind { rho_sweep, pc_recovery, bias_rmse, denoise };

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::rho_sweep;
    Subordinator sub = Subordinator::make_stable(1.0);
    Mat sigma;                    // explicit Sigma; empty -> the built-in family of the kind
    std::vector<double> rho_grid; // sweep; empty -> 0.1 .. 0.9 step 0.1
    std::size_t n = 800;
    std::size_t n_runs = 200;
    std::vector<ShapeMethod> methods = {ShapeMethod::m1c};
    EstMode mode = EstMode::ml;
    RngSeed seed;
    std::string out_dir; // empty -> no files written
    int threads = 1;

    void validate() const {
        if (n < 8) throw config_error("ExperimentConfig: n must be >= 8");
        if (n_runs < 1) throw config_error("ExperimentConfig: n_runs must be >= 1");
        if (methods.empty()) throw config_error("ExperimentConfig: methods must be nonempty");
        if (threads < 1) throw config_error("ExperimentConfig: threads must be >= 1");
    }

    std::string describe() const;
};

inline std::vector<double> default_rho_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 9; ++i) g.push_back(i / 10.0);
    return g;
}

// Eq.-(23)-style 2x2 family used throughout the sweeps.
inline Mat sweep_sigma(double rho) { return Mat{{16.0, 8.0 * rho}, {8.0 * rho, 4.0}}; }

// ---- rho sweep -------------------------------------------------------------

struct SweepRow {
    double rho = 0.0;
    ShapeMethod method = ShapeMethod::m1c;
    double err_pct = 0.0;    // relative error of the run-averaged estimate, percent
    double stderr_pct = 0.0; // per-run standard error, percent of rho
    long clamped = 0;
    bool flagged = false; // method 2 unreliable zone (majority of runs)
};

struct SweepResult {
    std::vector<SweepRow> rows;

    const SweepRow& at(double rho, ShapeMethod m) const {
        for (const auto& r : rows)
            if (r.method == m && std::abs(r.rho - rho) < 1e-12) return r;
        throw config_error("SweepResult: no row for requested (rho, method)");
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << "rho,method,err_pct,stderr_pct,clamped,flagged\n";
        for (const auto& r : rows)
            os << detail::fmt17(r.rho) << ',' << to_string(r.method) << ','
               << detail::fmt17(r.err_pct) << ',' << detail::fmt17(r.stderr_pct) << ','
               << r.clamped << ',' << (r.flagged ? 1 : 0) << '\n';
        return os.str();
    }
};

namespace detail {

struct SweepCell { // one (rho, replicate) worth of per-method estimates
    double rho_hat[7] = {0, 0, 0, 0, 0, 0, 0};
    double ell_g = 0.0; // method 2 pooled statistic
    int m2_sign = 1;
    long clamped[7] = {0, 0, 0, 0, 0, 0, 0};
    bool m2_flagged = false;
};

inline int method_slot(ShapeMethod m) { return static_cast<int>(m); }

} // namespace detail

// Sweep of the relative error in rho-hat across the grid, per method.
// Replicates use seeds derived from (master seed, grid index, replicate), and
// per-method errors compare the run-averaged estimate against the truth; for
// method 2 the run-averaged statistic is the recovered log-correlation, which
// is averaged before the table inversion.
inline SweepResult run_rho_sweep(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.validate();
    if (c.rho_grid.empty()) c.rho_grid = default_rho_grid();
    for (double r : c.rho_grid)
        if (!(r > 0.0) || r >= 1.0) throw config_error("run_rho_sweep: rho grid must be in (0,1)");
    for (ShapeMethod m : c.methods)
        if (m == ShapeMethod::m3)
            throw config_error("run_rho_sweep: method m3 is excluded at d = 2");

    const bool want_m2 =
        std::find(c.methods.begin(), c.methods.end(), ShapeMethod::m2) != c.methods.end();
    LogLut lut;
    SubordinatorLogMoments lm;
    if (want_m2) {
        lut = build_log_lut();
        lm = subordinator_log_moments(c.sub, 1 << 20, c.seed.with_stream(0x106aULL));
    }

    const std::size_t ng = c.rho_grid.size();
    std::vector<detail::SweepCell> cells(ng * c.n_runs);

    parallel_for(ng * c.n_runs, c.threads, [&](std::size_t item) {
        const std::size_t gi = item / c.n_runs;
        const std::size_t run = item % c.n_runs;
        const double rho = c.rho_grid[gi];
        const GaussianSpec spec = GaussianSpec::from_sigma(sweep_sigma(rho));
        const RngSeed rs{mix64(c.seed.seed, 0x5feedULL + gi, run), c.seed.stream};
        const Mat x = sample_superstatistical(spec, c.sub, c.n, rs);
        detail::SweepCell& cell = cells[item];

        ShapeDiagnostics diag;
        const auto scales = detail::row_scales(x, c.mode);
        std::vector<double> work;
        const auto fit = detail::fit_pair_ratio(x, 0, 1, scales[0], scales[1], c.mode, work);
        for (ShapeMethod m : c.methods) {
            const int slot = detail::method_slot(m);
            switch (m) {
            case ShapeMethod::m1a:
            case ShapeMethod::m1b:
            case ShapeMethod::m1c: {
                const char f = (m == ShapeMethod::m1a) ? 'A' : (m == ShapeMethod::m1b ? 'B' : 'C');
                diag.clamped = 0;
                cell.rho_hat[slot] =
                    std::clamp(rho_from_ratio(fit.cp, scales[0], scales[1], f, &diag), -1.0, 1.0);
                cell.clamped[slot] = diag.clamped;
                break;
            }
            case ShapeMethod::m2: {
                ShapeDiagnostics d2;
                detail::method2_raw(x, lut, lm, c.mode, d2);
                cell.ell_g = d2.ell_g(0, 1);
                cell.m2_sign = fit.cp.mu >= 0.0 ? 1 : -1;
                cell.rho_hat[slot] = d2.rho(0, 1);
                cell.clamped[slot] = d2.clamped;
                cell.m2_flagged = d2.low_rho_flag;
                break;
            }
            case ShapeMethod::tyler: {
                const Mat t = tyler_scatter(x).sigma;
                cell.rho_hat[slot] = shape_correlation(t, 0, 1);
                break;
            }
            case ShapeMethod::empirical: {
                const Mat e = empirical_covariance(x, Centering::none);
                cell.rho_hat[slot] = shape_correlation(e, 0, 1);
                break;
            }
            default:
                break;
            }
        }
    });

    SweepResult out;
    for (std::size_t gi = 0; gi < ng; ++gi) {
        const double rho = c.rho_grid[gi];
        for (ShapeMethod m : c.methods) {
            const int slot = detail::method_slot(m);
            SweepRow row;
            row.rho = rho;
            row.method = m;
            double sum = 0.0, sum2 = 0.0, ell_sum = 0.0;
            long clamps = 0, flags = 0, pos_signs = 0;
            for (std::size_t run = 0; run < c.n_runs; ++run) {
                const auto& cell = cells[gi * c.n_runs + run];
                const double v = cell.rho_hat[slot];
                sum += v;
                sum2 += v * v;
                clamps += cell.clamped[slot];
                if (m == ShapeMethod::m2) {
                    ell_sum += cell.ell_g;
                    flags += cell.m2_flagged ? 1 : 0;
                    pos_signs += cell.m2_sign > 0 ? 1 : 0;
                }
            }
            const double nr = static_cast<double>(c.n_runs);
            const double mean = sum / nr;
            const double var = std::max(0.0, sum2 / nr - mean * mean);
            double estimate = mean;
            if (m == ShapeMethod::m2) {
                const double sign = (2 * pos_signs >= static_cast<long>(c.n_runs)) ? 1.0 : -1.0;
                estimate = sign * lut.invert(ell_sum / nr);
                row.flagged = 2 * flags >= static_cast<long>(c.n_runs);
            }
            row.err_pct = 100.0 * std::abs(estimate - rho) / rho;
            row.stderr_pct = 100.0 * std::sqrt(var / nr) / rho;
            row.clamped = clamps;
            out.rows.push_back(row);
        }
    }

    if (!c.out_dir.empty()) {
        std::filesystem::create_directories(c.out_dir);
        auto f = detail::open_out(c.out_dir + "/sweep.csv");
        f << out.to_csv();
    }
    return out;
}

// ---- principal-direction recovery ------------------------------------------

// Built-in Sigma = R D R of the PC-recovery study.
inline Mat pc_recovery_sigma() {
    const Mat r{{1.0, 0.8}, {0.8, 1.0}};
    const Mat d{{1.0, 0.0}, {0.0, 0.4}};
    return r * d * r;
}

struct PcRecoveryResult {
    std::vector<ShapeMethod> methods;
    Mat cosines; // n_runs x methods, |cosine| per seed
    std::vector<double> median, mean;

    std::string to_csv() const {
        std::ostringstream os;
        os << "run";
        for (ShapeMethod m : methods) os << ',' << to_string(m);
        os << '\n';
        for (std::size_t r = 0; r < cosines.rows(); ++r) {
            os << r;
            for (std::size_t k = 0; k < cosines.cols(); ++k)
                os << ',' << detail::fmt17(cosines(r, k));
            os << '\n';
        }
        return os.str();
    }

    std::string summary_csv() const {
        std::ostringstream os;
        os << "method,median_abs_cosine,mean_abs_cosine\n";
        for (std::size_t k = 0; k < methods.size(); ++k)
            os << to_string(methods[k]) << ',' << detail::fmt17(median[k]) << ','
               << detail::fmt17(mean[k]) << '\n';
        return os.str();
    }
};

inline PcRecoveryResult run_pc_recovery(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.validate();
    const Mat sigma = c.sigma.empty() ? pc_recovery_sigma() : c.sigma;
    const GaussianSpec spec = GaussianSpec::from_sigma(sigma);
    const EigenDecomp true_e = sym_eigen(sigma);
    const std::vector<double> pc1 = true_e.vectors.col(0);

    LogLut lut;
    SubordinatorLogMoments lm;
    const bool want_m2 =
        std::find(c.methods.begin(), c.methods.end(), ShapeMethod::m2) != c.methods.end();
    if (want_m2) {
        lut = build_log_lut();
        lm = subordinator_log_moments(c.sub, 1 << 20, c.seed.with_stream(0x106aULL));
    }

    PcRecoveryResult out;
    out.methods = c.methods;
    out.cosines = Mat(c.n_runs, c.methods.size());

    parallel_for(c.n_runs, c.threads, [&](std::size_t run) {
        const RngSeed rs{mix64(c.seed.seed, 0x9caULL, run), c.seed.stream};
        const Mat x = sample_superstatistical(spec, c.sub, c.n, rs);
        for (std::size_t k = 0; k < c.methods.size(); ++k) {
            FitOptions opt;
            opt.mode = c.mode;
            opt.lut = want_m2 ? &lut : nullptr;
            opt.lm = want_m2 ? &lm : nullptr;
            const PcaModel model = fit_heavy_pca(x, c.methods[k], 1, opt);
            out.cosines(run, k) = std::abs(cosine_similarity(model.components.col(0), pc1));
        }
    });

    for (std::size_t k = 0; k < c.methods.size(); ++k) {
        std::vector<double> col = out.cosines.col(k);
        out.mean.push_back(std::accumulate(col.begin(), col.end(), 0.0) / col.size());
        out.median.push_back(median(col));
    }

    if (!c.out_dir.empty()) {
        std::filesystem::create_directories(c.out_dir);
        detail::open_out(c.out_dir + "/cosines.csv") << out.to_csv();
        detail::open_out(c.out_dir + "/summary.csv") << out.summary_csv();
    }
    return out;
}

// ---- 3-D bias / RMSE study -------------------------------------------------

inline Mat bias_rmse_sigma() {
    return Mat{{1.0, 0.9, 0.5}, {0.9, 1.0, 0.2}, {0.5, 0.2, 1.0}};
}

struct BiasRmseResult {
    Mat bias;
    Mat rmse;

    std::string to_csv() const {
        std::ostringstream os;
        os << "matrix,i,j,value\n";
        for (std::size_t i = 0; i < bias.rows(); ++i)
            for (std::size_t j = 0; j < bias.cols(); ++j)
                os << "bias," << i << ',' << j << ',' << detail::fmt17(bias(i, j)) << '\n';
        for (std::size_t i = 0; i < rmse.rows(); ++i)
            for (std::size_t j = 0; j < rmse.cols(); ++j)
                os << "rmse," << i << ',' << j << ',' << detail::fmt17(rmse(i, j)) << '\n';
        return os.str();
    }
};

// Entrywise bias and RMSE of the estimated shape against the true Sigma.
// Marginal scales of sub-Gaussian Cauchy data estimate sigma_i / sqrt(2)
// exactly (both modes), so the Cauchy runs are calibrated by that factor;
// other subordinators fall back to matching the trace of Sigma.
inline BiasRmseResult run_bias_rmse(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.validate();
    const Mat sigma = c.sigma.empty() ? bias_rmse_sigma() : c.sigma;
    const std::size_t d = sigma.rows();
    const GaussianSpec spec = GaussianSpec::from_sigma(sigma);
    const ShapeMethod method = c.methods.front();
    const bool cauchy_cal =
        c.sub.kind == Subordinator::Kind::stable && std::abs(c.sub.alpha - 1.0) < 1e-9;

    std::vector<Mat> estimates(c.n_runs);
    parallel_for(c.n_runs, c.threads, [&](std::size_t run) {
        const RngSeed rs{mix64(c.seed.seed, 0xb1a5ULL, run), c.seed.stream};
        const Mat x = sample_superstatistical(spec, c.sub, c.n, rs);
        Mat est;
        switch (method) {
        case ShapeMethod::m1a:
        case ShapeMethod::m1b:
        case ShapeMethod::m1c: {
            ShapeDiagnostics diag;
            const char f = (method == ShapeMethod::m1a) ? 'A'
                           : (method == ShapeMethod::m1b) ? 'B' : 'C';
            est = detail::method1_raw(x, f, c.mode, diag);
            break;
        }
        case ShapeMethod::tyler:
            est = tyler_scatter(x).sigma;
            break;
        case ShapeMethod::empirical:
            est = empirical_covariance(x, Centering::none);
            break;
        default:
            throw config_error("run_bias_rmse: unsupported method");
        }
        if (method != ShapeMethod::empirical) {
            if (cauchy_cal && method != ShapeMethod::tyler) {
                est *= 2.0; // scales carry 1/sqrt(2) each for Cauchy data
            } else {
                est *= trace(sigma) / trace(est);
            }
        }
        estimates[run] = std::move(est);
    });

    BiasRmseResult out;
    out.bias = Mat(d, d);
    out.rmse = Mat(d, d);
    const double nr = static_cast<double>(c.n_runs);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0, s2 = 0.0;
            for (std::size_t run = 0; run < c.n_runs; ++run) {
                const double e = estimates[run](i, j) - sigma(i, j);
                s += e;
                s2 += e * e;
            }
            out.bias(i, j) = s / nr;
            out.rmse(i, j) = std::sqrt(s2 / nr);
        }

    if (!c.out_dir.empty()) {
        std::filesystem::create_directories(c.out_dir);
        detail::open_out(c.out_dir + "/bias_rmse.csv") << out.to_csv();
        write_matrix_csv(out.bias, c.out_dir + "/bias.csv");
        write_matrix_csv(out.rmse, c.out_dir + "/rmse.csv");
    }
    return out;
}

// ---- image stacks and denoising ---------------------------------------------

// k images of h x w pixels, flattened row-major into a k x (h w) matrix.
struct ImageStack {
    std::size_t height = 0, width = 0;
    Mat images; // k x (h*w)

    std::size_t count() const { return images.rows(); }
    std::size_t pixels() const { return height * width; }
};

// Deterministic synthetic stack: 40 low-rank blob images, 28 x 28, in [0,1].
// Three fixed Gaussian bumps whose weights vary smoothly across the stack.
inline ImageStack synthetic_blob_stack(std::size_t k = 40, std::size_t h = 28,
                                       std::size_t w = 28) {
    ImageStack st;
    st.height = h;
    st.width = w;
    st.images = Mat(k, h * w);
    const double cx[3] = {0.30, 0.68, 0.50};
    const double cy[3] = {0.35, 0.40, 0.72};
    const double ss[3] = {0.12, 0.10, 0.16};
    for (std::size_t im = 0; im < k; ++im) {
        const double t = static_cast<double>(im) / static_cast<double>(k);
        const double wgt[3] = {0.55 + 0.25 * std::sin(6.283185307179586 * t),
                               0.50 + 0.25 * std::cos(6.283185307179586 * t),
                               0.45 + 0.20 * std::sin(12.566370614359172 * t + 0.7)};
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double px = (x + 0.5) / w;
                const double py = (y + 0.5) / h;
                double v = 0.05;
                for (int b = 0; b < 3; ++b) {
                    const double dx = px - cx[b], dy = py - cy[b];
                    v += wgt[b] * std::exp(-(dx * dx + dy * dy) / (2.0 * ss[b] * ss[b]));
                }
                st.images(im, y * w + x) = std::min(1.0, v);
            }
    }
    return st;
}

struct DenoiseOptions {
    Subordinator noise = Subordinator::make_stable(1.0);
    double noise_sigma_scale = 10.0; // Sigma_noise = scale * I
    ShapeMethod method = ShapeMethod::m1c;
    std::size_t rank = 10;
    EstMode mode = EstMode::ml;
    RngSeed seed;
    const LogLut* lut = nullptr;
    const SubordinatorLogMoments* lm = nullptr;
};

// Preset noise scales: the image experiment uses Sigma = 10 I, the video-frame
// experiment 0.02 I, both in [0,1] pixel units.
inline double noise_preset(const std::string& name) {
    if (name == "image" || name == "mnist") return 10.0;
    if (name == "frame" || name == "video") return 0.02;
    throw config_error("unknown noise preset '" + name + "'");
}

struct DenoiseResult {
    ImageStack noisy;
    ImageStack reconstructed;
    double rel_frobenius = 0.0;      // ||recon - clean||_F / ||clean||_F
    std::vector<double> psnr;        // per image, vs clean, MAX = 1
    double rel_frobenius_noisy = 0.0; // ||noisy - clean||_F / ||clean||_F
};

// Adds independent superstatistical noise per image, subtracts the per-pixel
// location, fits a rank-k model with the chosen method, reconstructs.
// Internally the stack is transposed to pixels x images so images act as
// samples.
inline DenoiseResult denoise(const ImageStack& stack, const DenoiseOptions& opt) {
    const std::size_t k = stack.count(), p = stack.pixels();
    if (k < 8) throw config_error("denoise: need at least 8 images in the stack");
    if (stack.images.cols() != p) throw config_error("denoise: stack dimensions inconsistent");
    if (opt.rank < 1 || opt.rank > std::min(k, p)) throw config_error("denoise: bad rank");

    // pixels as dimensions, images as samples
    const Mat clean = stack.images.transposed(); // p x k
    Mat noisy = clean;
    if (opt.noise_sigma_scale > 0.0) {
        const double sn = std::sqrt(opt.noise_sigma_scale);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t j = 0; j < k; ++j) {
            auto eng = make_engine(opt.seed, j);
            const double sa = std::sqrt(opt.noise.draw(eng));
            for (std::size_t i = 0; i < p; ++i) noisy(i, j) += sa * sn * normal(eng);
        }
    }

    FitOptions fopt;
    fopt.mode = opt.mode;
    fopt.lut = opt.lut;
    fopt.lm = opt.lm;
    if (opt.method == ShapeMethod::m3 && p < 4)
        throw config_error("denoise: method m3 needs at least 4 pixel dimensions");
    const PcaModel model = fit_heavy_pca(noisy, opt.method, opt.rank, fopt);
    const Mat recon = project_reconstruct(noisy, model);

    DenoiseResult out;
    out.noisy.height = out.reconstructed.height = stack.height;
    out.noisy.width = out.reconstructed.width = stack.width;
    out.noisy.images = noisy.transposed();
    out.reconstructed.images = recon.transposed();

    const double clean_norm = frobenius_norm(clean);
    out.rel_frobenius = frobenius_norm(recon - clean) / clean_norm;
    out.rel_frobenius_noisy = frobenius_norm(noisy - clean) / clean_norm;
    out.psnr.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        double mse = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            const double e = recon(i, j) - clean(i, j);
            mse += e * e;
        }
        mse /= static_cast<double>(p);
        out.psnr[j] = mse > 0.0 ? 10.0 * std::log10(1.0 / mse) : 99.0;
    }
    return out;
}

inline void write_stack_pgms(const ImageStack& st, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t im = 0; im < st.count(); ++im) {
        PgmImage img;
        img.width = st.width;
        img.height = st.height;
        img.pixels.assign(st.images.row(im), st.images.row(im) + st.pixels());
        char name[32];
        std::snprintf(name, sizeof name, "/img%03zu.pgm", im);
        write_pgm(img, dir + name);
    }
}

inline std::string ExperimentConfig::describe() const {
    std::ostringstream os;
    os << "  kind: ";
    switch (kind) {
    case ExperimentKind::rho_sweep: os << "rho-sweep"; break;
    case ExperimentKind::pc_recovery: os << "pc-recovery"; break;
    case ExperimentKind::bias_rmse: os << "bias-rmse"; break;
    case ExperimentKind::denoise: os << "denoise"; break;
    }
    os << "\n  subordinator: ";
    switch (sub.kind) {
    case Subordinator::Kind::stable: os << "stable alpha=" << sub.alpha; break;
    case Subordinator::Kind::student: os << "student nu=" << sub.nu; break;
    case Subordinator::Kind::degenerate: os << "degenerate a=" << sub.value; break;
    }
    os << "\n  n: " << n << "\n  n_runs: " << n_runs << "\n  mode: " << to_string(mode)
       << "\n  threads: " << threads << "\n  methods:";
    for (ShapeMethod m : methods) os << ' ' << to_string(m);
    os << '\n';
    return os.str();
}

} // namespace htpca
