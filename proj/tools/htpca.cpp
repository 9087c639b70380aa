// htpca command line: sampling, shape estimation, heavy-tailed PCA and the
// experiment harness. Exit codes: 0 success, 2 configuration error,
// 3 numerical failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "htpca/experiments.hpp"
#include "htpca/io.hpp"
#include "htpca/pca.hpp"
#include "htpca/version.hpp"

using namespace htpca;

namespace {

struct ModelFlags {
    std::string model = "stable";
    double alpha = 1.0;
    double nu = 3.0;
    double constant = 1.0;

    Subordinator subordinator() const {
        if (model == "stable") return Subordinator::make_stable(alpha);
        if (model == "student") return Subordinator::make_student(nu);
        if (model == "gauss") return Subordinator::make_degenerate(constant);
        throw config_error("unknown model '" + model + "' (expected stable|student|gauss)");
    }
};

void add_model_flags(CLI::App* cmd, ModelFlags& mf) {
    cmd->add_option("--model", mf.model, "subordinator model: stable|student|gauss")
        ->default_val("stable");
    cmd->add_option("--alpha", mf.alpha, "stability index for --model stable");
    cmd->add_option("--nu", mf.nu, "degrees of freedom for --model student");
}

EstMode parse_mode(const std::string& s) {
    if (s == "quantile") return EstMode::quantile;
    if (s == "ml") return EstMode::ml;
    throw config_error("unknown mode '" + s + "' (expected quantile|ml)");
}

std::vector<ShapeMethod> parse_methods(const std::string& csv) {
    std::vector<ShapeMethod> out;
    std::string tok;
    std::istringstream is(csv);
    while (std::getline(is, tok, ','))
        if (!tok.empty()) out.push_back(shape_method_from_string(tok));
    if (out.empty()) throw config_error("no methods given");
    return out;
}

Mat read_matrix_any(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    char magic[8] = {};
    probe.read(magic, 8);
    if (probe.gcount() == 8 && std::memcmp(magic, kMatrixMagic, 8) == 0)
        return read_matrix_binary(path);
    return read_matrix_csv(path);
}

void write_matrix_any(const Mat& m, const std::string& path) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".bin")
        write_matrix_binary(m, path);
    else
        write_matrix_csv(m, path);
}

ImageStack load_stack(const std::string& csv_path, const std::string& pgm_dir, bool synthetic,
                      std::size_t height, std::size_t width) {
    if (synthetic) return synthetic_blob_stack();
    if (!pgm_dir.empty()) {
        std::vector<std::string> files;
        for (const auto& e : std::filesystem::directory_iterator(pgm_dir))
            if (e.path().extension() == ".pgm") files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw config_error("no .pgm files in '" + pgm_dir + "'");
        ImageStack st;
        for (std::size_t i = 0; i < files.size(); ++i) {
            const PgmImage img = read_pgm(files[i]);
            if (i == 0) {
                st.height = img.height;
                st.width = img.width;
                st.images = Mat(files.size(), img.pixels.size());
            } else if (img.height != st.height || img.width != st.width) {
                throw config_error("mismatched image size in '" + files[i] + "'");
            }
            for (std::size_t k = 0; k < img.pixels.size(); ++k) st.images(i, k) = img.pixels[k];
        }
        return st;
    }
    if (csv_path.empty())
        throw config_error("denoise: give --synthetic, --stack-dir or --stack-csv");
    ImageStack st;
    st.images = read_matrix_any(csv_path); // k x (h*w)
    if (height * width != st.images.cols())
        throw config_error("denoise: --height * --width must match the stack row length");
    st.height = height;
    st.width = width;
    return st;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"heavy-tailed PCA toolkit"};
    app.set_version_flag("--version", HTPCA_VERSION);
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    std::string mode_str = "ml";
    int threads = 1;
    app.add_option("--seed", seed, "master seed")->capture_default_str();
    app.add_option("--mode", mode_str, "estimator mode: quantile|ml")->capture_default_str();
    app.add_option("--threads", threads, "worker threads (never changes results)")
        ->capture_default_str();

    // ---- generate ----
    auto* c_gen = app.add_subcommand("generate", "sample the superstatistical model X = sqrt(A) G");
    ModelFlags g_mf;
    add_model_flags(c_gen, g_mf);
    std::string g_sigma, g_out;
    std::size_t g_n = 1000, g_dim = 0;
    c_gen->add_option("--sigma", g_sigma, "Sigma file (CSV or binary)");
    c_gen->add_option("--identity-dim", g_dim, "use Sigma = I_d instead of --sigma");
    c_gen->add_option("--n", g_n, "number of sample columns")->capture_default_str();
    c_gen->add_option("--out", g_out, "output matrix (.bin for binary, else CSV)")->required();

    // ---- estimate ----
    auto* c_est = app.add_subcommand("estimate", "location/scale vectors or a shape matrix");
    std::string e_what, e_method, e_in, e_out, e_lut, e_logmoments;
    c_est->add_option("--what", e_what, "location|scale (vector estimates)");
    c_est->add_option("--method", e_method, "m1a|m1b|m1c|m2|m3|tyler|empirical (shape matrix)");
    c_est->add_option("--in", e_in, "input data matrix")->required();
    c_est->add_option("--out", e_out, "output file")->required();
    c_est->add_option("--lut", e_lut, "log-correlation lookup table (method m2)");
    c_est->add_option("--logmoments", e_logmoments, "subordinator log-moments file (method m2)");

    // ---- pca ----
    auto* c_pca = app.add_subcommand("pca", "fit a heavy-tailed PCA model");
    std::string p_method = "m1c", p_in, p_out, p_lut, p_logmoments;
    std::size_t p_m = 1;
    c_pca->add_option("--method", p_method, "shape estimator")->capture_default_str();
    c_pca->add_option("--m", p_m, "number of components")->capture_default_str();
    c_pca->add_option("--in", p_in, "input data matrix")->required();
    c_pca->add_option("--out", p_out, "output model directory")->required();
    c_pca->add_option("--lut", p_lut, "lookup table (method m2)");
    c_pca->add_option("--logmoments", p_logmoments, "log-moments file (method m2)");

    // ---- rho-sweep ----
    auto* c_sweep = app.add_subcommand("rho-sweep", "relative-error sweep over the Eq. family");
    ModelFlags s_mf;
    add_model_flags(c_sweep, s_mf);
    std::string s_methods = "m1a,m1c,m2,tyler,empirical", s_out;
    std::size_t s_n = 800, s_runs = 200;
    std::vector<double> s_grid;
    c_sweep->add_option("--n", s_n, "samples per replicate")->capture_default_str();
    c_sweep->add_option("--runs", s_runs, "replicates per grid point")->capture_default_str();
    c_sweep->add_option("--methods", s_methods, "comma list of methods")->capture_default_str();
    c_sweep->add_option("--rho-grid", s_grid, "explicit rho grid values");
    c_sweep->add_option("--out", s_out, "output directory")->required();

    // ---- pc-recovery ----
    auto* c_pc = app.add_subcommand("pc-recovery", "principal-direction recovery study");
    ModelFlags pc_mf;
    pc_mf.alpha = 0.7;
    add_model_flags(c_pc, pc_mf);
    std::string pc_methods = "m1c,empirical", pc_out, pc_sigma;
    std::size_t pc_n = 800, pc_runs = 100;
    c_pc->add_option("--n", pc_n, "samples per replicate")->capture_default_str();
    c_pc->add_option("--runs", pc_runs, "seeds")->capture_default_str();
    c_pc->add_option("--methods", pc_methods, "comma list of methods")->capture_default_str();
    c_pc->add_option("--sigma", pc_sigma, "override the built-in Sigma (file)");
    c_pc->add_option("--out", pc_out, "output directory")->required();

    // ---- bias-rmse ----
    auto* c_br = app.add_subcommand("bias-rmse", "entrywise bias/RMSE of the shape estimate");
    ModelFlags br_mf;
    add_model_flags(c_br, br_mf);
    std::string br_method = "m1c", br_out;
    std::size_t br_n = 1000, br_runs = 400;
    c_br->add_option("--n", br_n, "samples per replicate")->capture_default_str();
    c_br->add_option("--runs", br_runs, "replicates")->capture_default_str();
    c_br->add_option("--method", br_method, "estimator")->capture_default_str();
    c_br->add_option("--out", br_out, "output directory")->required();

    // ---- denoise ----
    auto* c_dn = app.add_subcommand("denoise", "background denoising of an image stack");
    ModelFlags dn_mf;
    add_model_flags(c_dn, dn_mf);
    std::string dn_method = "m1c", dn_out, dn_csv, dn_dir, dn_preset = "image", dn_methods;
    std::size_t dn_k = 10, dn_h = 0, dn_w = 0, dn_runs = 1;
    double dn_scale = -1.0;
    bool dn_synth = false;
    c_dn->add_flag("--synthetic", dn_synth, "use the built-in 40x784 blob stack");
    c_dn->add_option("--stack-csv", dn_csv, "stack as k x (h*w) matrix file");
    c_dn->add_option("--stack-dir", dn_dir, "directory of PGM images");
    c_dn->add_option("--height", dn_h, "image height for --stack-csv");
    c_dn->add_option("--width", dn_w, "image width for --stack-csv");
    c_dn->add_option("--preset", dn_preset, "noise preset: image (10 I) | frame (0.02 I)")
        ->capture_default_str();
    c_dn->add_option("--noise-scale", dn_scale, "explicit noise Sigma scale c in c*I");
    c_dn->add_option("--method", dn_method, "shape estimator")->capture_default_str();
    c_dn->add_option("--methods", dn_methods, "comma list for multi-method comparison");
    c_dn->add_option("--k", dn_k, "reconstruction rank")->capture_default_str();
    c_dn->add_option("--runs", dn_runs, "seeded noise replicates")->capture_default_str();
    c_dn->add_option("--out", dn_out, "output directory")->required();

    // ---- build-lut ----
    auto* c_lut = app.add_subcommand("build-lut", "build the log-correlation lookup table");
    double lut_step = 1e-3;
    int lut_order = 96;
    std::string lut_out;
    c_lut->add_option("--step", lut_step, "rho grid spacing")->capture_default_str();
    c_lut->add_option("--order", lut_order, "quadrature order")->capture_default_str();
    c_lut->add_option("--out", lut_out, "output CSV")->required();

    // ---- log-moments ----
    auto* c_lm = app.add_subcommand("log-moments", "subordinator log-moments (Monte Carlo)");
    ModelFlags lm_mf;
    add_model_flags(c_lm, lm_mf);
    std::size_t lm_nmc = 1u << 21;
    std::string lm_out;
    c_lm->add_option("--nmc", lm_nmc, "Monte-Carlo draws (>= 1e6)")->capture_default_str();
    c_lm->add_option("--out", lm_out, "output file")->required();

    CLI11_PARSE(app, argc, argv);

    const auto t0 = std::chrono::steady_clock::now();
    auto wall = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    try {
        const EstMode mode = parse_mode(mode_str);
        const RngSeed rs{seed, 0};

        if (*c_gen) {
            Mat sigma;
            if (g_dim > 0)
                sigma = Mat::identity(g_dim);
            else if (!g_sigma.empty())
                sigma = read_matrix_any(g_sigma);
            else
                throw config_error("generate: give --sigma or --identity-dim");
            const auto spec = GaussianSpec::from_sigma(sigma);
            const Mat x = sample_superstatistical(spec, g_mf.subordinator(), g_n, rs);
            write_matrix_any(x, g_out);
        } else if (*c_est) {
            const Mat x = read_matrix_any(e_in);
            if (!e_what.empty()) {
                if (e_what == "location") {
                    const auto loc = location_vector(x, mode);
                    Mat m(1, loc.size());
                    for (std::size_t i = 0; i < loc.size(); ++i) m(0, i) = loc[i];
                    write_matrix_csv(m, e_out);
                } else if (e_what == "scale") {
                    Mat m(1, x.rows());
                    for (std::size_t i = 0; i < x.rows(); ++i)
                        m(0, i) = marginal_scale({x.row(i), x.cols()}, mode);
                    write_matrix_csv(m, e_out);
                } else {
                    throw config_error("estimate: --what must be location or scale");
                }
            } else if (!e_method.empty()) {
                const ShapeMethod m = shape_method_from_string(e_method);
                Mat sigma;
                switch (m) {
                case ShapeMethod::m1a:
                    sigma = estimate_shape_method1(x, 'A', mode).sigma;
                    break;
                case ShapeMethod::m1b:
                    sigma = estimate_shape_method1(x, 'B', mode).sigma;
                    break;
                case ShapeMethod::m1c:
                    sigma = estimate_shape_method1(x, 'C', mode).sigma;
                    break;
                case ShapeMethod::m2: {
                    if (e_lut.empty() || e_logmoments.empty())
                        throw config_error("estimate m2: needs --lut and --logmoments");
                    const LogLut lut = read_log_lut(e_lut);
                    const SubordinatorLogMoments lm = read_log_moments(e_logmoments);
                    sigma = estimate_shape_method2(x, lut, lm, mode).sigma;
                    break;
                }
                case ShapeMethod::m3:
                    sigma = estimate_shape_method3(x, mode).sigma;
                    break;
                case ShapeMethod::tyler:
                    sigma = tyler_scatter(x).sigma;
                    break;
                case ShapeMethod::empirical:
                    sigma = empirical_covariance(x, Centering::none);
                    break;
                }
                write_matrix_csv(sigma, e_out);
            } else {
                throw config_error("estimate: give --what or --method");
            }
        } else if (*c_pca) {
            const Mat x = read_matrix_any(p_in);
            FitOptions opt;
            opt.mode = mode;
            LogLut lut;
            SubordinatorLogMoments lm;
            if (!p_lut.empty()) {
                lut = read_log_lut(p_lut);
                opt.lut = &lut;
            }
            if (!p_logmoments.empty()) {
                lm = read_log_moments(p_logmoments);
                opt.lm = &lm;
            }
            const PcaModel model = fit_heavy_pca(x, shape_method_from_string(p_method), p_m, opt);
            write_pca_model(model, p_out);
        } else if (*c_sweep) {
            ExperimentConfig cfg;
            cfg.kind = ExperimentKind::rho_sweep;
            cfg.sub = s_mf.subordinator();
            cfg.n = s_n;
            cfg.n_runs = s_runs;
            cfg.methods = parse_methods(s_methods);
            cfg.mode = mode;
            cfg.seed = rs;
            cfg.threads = threads;
            cfg.rho_grid = s_grid;
            cfg.out_dir = s_out;
            run_rho_sweep(cfg);
            write_manifest(s_out, cfg.describe(), seed, wall());
        } else if (*c_pc) {
            ExperimentConfig cfg;
            cfg.kind = ExperimentKind::pc_recovery;
            cfg.sub = pc_mf.subordinator();
            cfg.n = pc_n;
            cfg.n_runs = pc_runs;
            cfg.methods = parse_methods(pc_methods);
            cfg.mode = mode;
            cfg.seed = rs;
            cfg.threads = threads;
            cfg.out_dir = pc_out;
            if (!pc_sigma.empty()) cfg.sigma = read_matrix_any(pc_sigma);
            run_pc_recovery(cfg);
            write_manifest(pc_out, cfg.describe(), seed, wall());
        } else if (*c_br) {
            ExperimentConfig cfg;
            cfg.kind = ExperimentKind::bias_rmse;
            cfg.sub = br_mf.subordinator();
            cfg.n = br_n;
            cfg.n_runs = br_runs;
            cfg.methods = {shape_method_from_string(br_method)};
            cfg.mode = mode;
            cfg.seed = rs;
            cfg.threads = threads;
            cfg.out_dir = br_out;
            run_bias_rmse(cfg);
            write_manifest(br_out, cfg.describe(), seed, wall());
        } else if (*c_dn) {
            const ImageStack stack = load_stack(dn_csv, dn_dir, dn_synth, dn_h, dn_w);
            DenoiseOptions opt;
            opt.noise = dn_mf.subordinator();
            opt.noise_sigma_scale = dn_scale >= 0.0 ? dn_scale : noise_preset(dn_preset);
            opt.rank = dn_k;
            opt.mode = mode;
            std::vector<ShapeMethod> methods =
                dn_methods.empty() ? std::vector<ShapeMethod>{shape_method_from_string(dn_method)}
                                   : parse_methods(dn_methods);
            std::filesystem::create_directories(dn_out);
            std::ofstream metrics(dn_out + "/metrics.csv");
            metrics << "run,method,rel_frobenius,rel_frobenius_noisy,min_psnr,mean_psnr\n";
            for (std::size_t run = 0; run < dn_runs; ++run) {
                for (const ShapeMethod m : methods) {
                    opt.method = m;
                    opt.seed = RngSeed{mix64(seed, 0xde401aULL, run), 0};
                    const DenoiseResult res = denoise(stack, opt);
                    double psnr_min = res.psnr.empty() ? 0.0 : res.psnr[0], psnr_sum = 0.0;
                    for (double v : res.psnr) {
                        psnr_min = std::min(psnr_min, v);
                        psnr_sum += v;
                    }
                    metrics << run << ',' << to_string(m) << ','
                            << htpca::detail::fmt17(res.rel_frobenius) << ','
                            << htpca::detail::fmt17(res.rel_frobenius_noisy) << ','
                            << htpca::detail::fmt17(psnr_min) << ','
                            << htpca::detail::fmt17(psnr_sum / res.psnr.size()) << '\n';
                    if (run == 0) {
                        const std::string tag = std::string("/") + to_string(m);
                        write_stack_pgms(res.reconstructed, dn_out + tag + "_reconstructed");
                        if (m == methods.front()) {
                            write_stack_pgms(stack, dn_out + "/clean");
                            write_stack_pgms(res.noisy, dn_out + "/noisy");
                        }
                    }
                }
            }
            std::ostringstream cfgtext;
            cfgtext << "  kind: denoise\n  rank: " << dn_k << "\n  noise_scale: "
                    << (dn_scale >= 0.0 ? dn_scale : noise_preset(dn_preset)) << "\n  runs: "
                    << dn_runs << '\n';
            write_manifest(dn_out, cfgtext.str(), seed, wall());
        } else if (*c_lut) {
            write_log_lut(build_log_lut(lut_step, lut_order), lut_out);
        } else if (*c_lm) {
            const SubordinatorLogMoments lm =
                subordinator_log_moments(lm_mf.subordinator(), lm_nmc, rs);
            write_log_moments(lm, lm_out);
        }
    } catch (const domain_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
