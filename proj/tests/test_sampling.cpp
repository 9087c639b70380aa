#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <thread>

#include "htpca/sampling.hpp"
#include "htpca/shape.hpp"
#include "htpca/stable.hpp"
#include "support.hpp"

using namespace htpca;

TEST_CASE("stable sampler parameter validation", "[sampling]") {
    CHECK_THROWS_AS(sample_standard_stable({0.0, 0, 1, 0}, 10, {}), domain_error);
    CHECK_THROWS_AS(sample_standard_stable({2.5, 0, 1, 0}, 10, {}), domain_error);
    CHECK_THROWS_AS(sample_standard_stable({1.0, 2.0, 1, 0}, 10, {}), domain_error);
    CHECK_THROWS_AS(sample_standard_stable({1.0, 0, -1.0, 0}, 10, {}), domain_error);
    CHECK_THROWS_AS(sample_standard_stable({1.0, 0, 1, 0}, 0, {}), domain_error);
}

TEST_CASE("alpha=2 stable with unit scale is N(0,2)", "[sampling]") {
    const auto v = sample_standard_stable({2.0, 0.0, 1.0, 0.0}, 100000, RngSeed{41, 0});
    double m = 0.0, s2 = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s2 += (x - m) * (x - m);
    s2 /= v.size();
    CHECK(s2 == Catch::Approx(2.0).epsilon(0.05));
    CHECK(std::abs(m) < 0.05);
}

TEST_CASE("Levy closed-form identity: S(1/2,1,1/2,0) matches 1/(2Z^2)", "[sampling]") {
    const std::size_t n = 100000;
    const auto draws = sample_standard_stable({0.5, 1.0, 0.5, 0.0}, n, RngSeed{7, 0});
    const auto ref = testsup::levy_half_reference(n, 1234);
    const double d = testsup::ks_statistic(draws, ref);
    CHECK(d < 0.01);
}

TEST_CASE("alpha=1 beta=0 stable is standard Cauchy", "[sampling]") {
    const auto v = sample_standard_stable({1.0, 0.0, 1.0, 0.0}, 100000, RngSeed{11, 0});
    std::vector<double> s(v);
    std::sort(s.begin(), s.end());
    const double med = quantile_sorted(s, 0.5);
    const double half_iqr = 0.5 * (quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25));
    CHECK(std::abs(med) < 0.03);
    CHECK(half_iqr == Catch::Approx(1.0).epsilon(0.03));
}

TEST_CASE("subordinator: degenerate returns the constant", "[sampling]") {
    const auto v = sample_subordinator(Subordinator::make_degenerate(1.0), 5, RngSeed{1, 2});
    REQUIRE(v.size() == 5);
    for (double x : v) CHECK(x == 1.0);
}

TEST_CASE("subordinator: stable(alpha=1) is S(1/2,1,1/2,0)", "[sampling]") {
    const auto sub = Subordinator::make_stable(1.0);
    const auto p = sub.stable_params();
    CHECK(p.alpha == Catch::Approx(0.5));
    CHECK(p.beta == 1.0);
    CHECK(p.gamma == Catch::Approx(0.5));
    const auto draws = sample_subordinator(sub, 100000, RngSeed{7, 1});
    const auto ref = testsup::levy_half_reference(100000, 4321);
    CHECK(testsup::ks_statistic(draws, ref) < 0.01);
}

TEST_CASE("subordinator: student(nu=4) has E[1/A] = 1", "[sampling]") {
    const auto v = sample_subordinator(Subordinator::make_student(4.0), 100000, RngSeed{9, 0});
    double m = 0.0;
    for (double x : v) m += 1.0 / x;
    m /= v.size();
    CHECK(m == Catch::Approx(1.0).epsilon(0.03));
}

TEST_CASE("subordinator positivity across kinds", "[sampling]") {
    for (const auto& sub :
         {Subordinator::make_stable(0.7), Subordinator::make_stable(1.0),
          Subordinator::make_stable(1.7), Subordinator::make_student(1.2),
          Subordinator::make_degenerate(4.0)}) {
        const auto v = sample_subordinator(sub, 200000, RngSeed{13, 5});
        for (double x : v) {
            if (!(x > 0.0)) {
                FAIL("nonpositive subordinator draw");
            }
        }
        SUCCEED();
    }
}

TEST_CASE("cholesky identity and hand-checked 2x2", "[sampling]") {
    const Mat i3 = Mat::identity(3);
    CHECK(max_abs_diff(cholesky(i3), i3) == 0.0);

    // [[16, 8 rho], [8 rho, 4]] with rho = 0.5 -> L = [[4,0],[1,sqrt(3)]]
    const Mat s{{16.0, 4.0}, {4.0, 4.0}};
    const Mat l = cholesky(s);
    CHECK(l(0, 0) == Catch::Approx(4.0));
    CHECK(l(0, 1) == 0.0);
    CHECK(l(1, 0) == Catch::Approx(1.0));
    CHECK(l(1, 1) == Catch::Approx(std::sqrt(3.0)));
}

TEST_CASE("cholesky rank-1 and reconstruction quality", "[sampling]") {
    const Mat s{{1.0, 1.0}, {1.0, 1.0}};
    const Mat l = cholesky(s);
    CHECK(l(0, 0) == Catch::Approx(1.0));
    CHECK(l(1, 0) == Catch::Approx(1.0));
    CHECK(l(0, 1) == 0.0);
    CHECK(l(1, 1) == 0.0);

    const Mat r = testsup::random_symmetric(12, 99);
    Mat psd = mul_at_b(r, r); // r^T r is PSD
    const Mat lf = cholesky(psd);
    const Mat back = lf * lf.transposed();
    CHECK(frobenius_norm(back - psd) <= 1e-10 * frobenius_norm(psd));
}

TEST_CASE("cholesky rejects indefinite matrices", "[sampling]") {
    const Mat s{{1.0, 2.0}, {2.0, 1.0}}; // eigenvalues 3, -1
    CHECK_THROWS_AS(cholesky(s), numerical_error);
}

TEST_CASE("superstatistical sampling: Gaussian reduction", "[sampling]") {
    const Mat sigma{{2.0, 0.6}, {0.6, 1.0}};
    const auto spec = GaussianSpec::from_sigma(sigma);
    const std::size_t n = 100000;
    const Mat x = sample_superstatistical(spec, Subordinator::make_degenerate(1.0), n, RngSeed{3, 0});
    const Mat cov = empirical_covariance(x, Centering::none);
    const double lmax = 2.3; // top eigenvalue of sigma is ~2.26
    const double bound = 5.0 * std::sqrt(lmax * lmax / static_cast<double>(n));
    CHECK(max_abs_diff(cov, sigma) <= bound);
}

TEST_CASE("superstatistical sampling: identity covariance within 0.02", "[sampling]") {
    const auto spec = GaussianSpec::from_sigma(Mat::identity(2));
    const Mat x =
        sample_superstatistical(spec, Subordinator::make_degenerate(1.0), 100000, RngSeed{5, 0});
    const Mat cov = empirical_covariance(x, Centering::none);
    CHECK(max_abs_diff(cov, Mat::identity(2)) <= 0.02);
}

TEST_CASE("sub-Gaussian Cauchy marginals have half-IQR 1/sqrt(2)", "[sampling]") {
    // X = sqrt(A) G with the paper's subordinator has S-alpha-S marginals of
    // stable scale sigma/sqrt(2); at alpha = 1 that is a Cauchy with
    // half-IQR = 1/sqrt(2), not 1.
    const auto spec = GaussianSpec::from_sigma(Mat::identity(2));
    const Mat x =
        sample_superstatistical(spec, Subordinator::make_stable(1.0), 100000, RngSeed{17, 0});
    for (std::size_t i = 0; i < 2; ++i) {
        std::vector<double> row(x.row(i), x.row(i) + x.cols());
        std::sort(row.begin(), row.end());
        const double half_iqr = 0.5 * (quantile_sorted(row, 0.75) - quantile_sorted(row, 0.25));
        CHECK(half_iqr == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(0.05));
    }
}

TEST_CASE("student(nu=3) anisotropic scale ratio", "[sampling]") {
    const Mat sigma{{4.0, 0.0}, {0.0, 1.0}};
    const auto spec = GaussianSpec::from_sigma(sigma);
    const Mat x =
        sample_superstatistical(spec, Subordinator::make_student(3.0), 100000, RngSeed{19, 0});
    std::vector<double> r0(x.row(0), x.row(0) + x.cols());
    std::vector<double> r1(x.row(1), x.row(1) + x.cols());
    std::sort(r0.begin(), r0.end());
    std::sort(r1.begin(), r1.end());
    const double h0 = 0.5 * (quantile_sorted(r0, 0.75) - quantile_sorted(r0, 0.25));
    const double h1 = 0.5 * (quantile_sorted(r1, 0.75) - quantile_sorted(r1, 0.25));
    CHECK(h0 / h1 == Catch::Approx(2.0).epsilon(0.05));
}

TEST_CASE("determinism: identical seeds reproduce bitwise, any thread count", "[sampling]") {
    const Mat sigma{{3.0, 1.0}, {1.0, 2.0}};
    const auto spec = GaussianSpec::from_sigma(sigma);
    const auto sub = Subordinator::make_stable(1.3);
    const Mat a = sample_superstatistical(spec, sub, 512, RngSeed{77, 3});
    const Mat b = sample_superstatistical(spec, sub, 512, RngSeed{77, 3});
    CHECK(a == b);

    // column content must not depend on how many columns are drawn
    const Mat c = sample_superstatistical(spec, sub, 256, RngSeed{77, 3});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 256; ++j) CHECK(c(i, j) == a(i, j));

    const Mat d = sample_superstatistical(spec, sub, 512, RngSeed{77, 4});
    CHECK(max_abs_diff(a, d) > 0.0);
}

TEST_CASE("scaling covariance: c * sample(Sigma) ~ sample(c^2 Sigma)", "[sampling]") {
    const Mat sigma{{2.0, 0.5}, {0.5, 1.0}};
    const double c = 3.0;
    Mat c2s = sigma;
    c2s *= c * c;
    const auto sub = Subordinator::make_stable(1.5);
    const std::size_t n = 100000;
    const Mat a = sample_superstatistical(GaussianSpec::from_sigma(sigma), sub, n, RngSeed{23, 0});
    const Mat b = sample_superstatistical(GaussianSpec::from_sigma(c2s), sub, n, RngSeed{23, 0});
    std::vector<double> na(n), nb(n);
    for (std::size_t j = 0; j < n; ++j) {
        na[j] = c * std::hypot(a(0, j), a(1, j));
        nb[j] = std::hypot(b(0, j), b(1, j));
    }
    const double d = testsup::ks_statistic(na, nb);
    CHECK(testsup::ks_pvalue(d, n, n) >= 0.01);
}
