#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "rwg/medium.hpp"
#include "rwg/quadrature.hpp"

using namespace rwg;

namespace {

constexpr double pi = 3.14159265358979323846;

CovarianceModel custom_gaussian(double ell) {
    CovarianceModel m;
    m.kind = CovarianceKind::custom_separable;
    m.ell = ell;
    m.k1 = [ell](double d) { return std::exp(-d * d / (2 * ell * ell)); };
    m.k2 = m.k1;
    m.g_custom = [ell](double z, int d) {
        const double l2 = ell * ell, e = std::exp(-z * z / (2 * l2));
        return d == 0 ? e : d == 1 ? -z / l2 * e : (z * z / (l2 * l2) - 1 / l2) * e;
    };
    m.z_support = 12 * ell;
    m.tag = "gauss-copy";
    return m;
}

// brute-force full-line transform of g^{(d)}
std::complex<double> fourier_oracle(const CovarianceModel& m, double beta, int d) {
    const double L = m.z_cut();
    auto re = [&](double z) { return m.g(z, d) * std::cos(beta * z); };
    auto im = [&](double z) { return m.g(z, d) * std::sin(beta * z); };
    return {integrate_adaptive(re, -L, L, 1e-12, 1e-13).value, integrate_adaptive(im, -L, L, 1e-12, 1e-13).value};
}

}  // namespace

TEST_CASE("Gaussian transform pairs") {
    for (double ell : {0.5, 1.0, 2.0}) {
        ZSpectrum zs(CovarianceModel::gaussian(ell));
        CHECK(zs.ghat(0) == doctest::Approx(std::sqrt(2 * pi) * ell).epsilon(1e-14));
        for (double b : {0.3, 1.7, 4.0})
            CHECK(zs.ghat(b) == doctest::Approx(std::sqrt(2 * pi) * ell * std::exp(-b * b * ell * ell / 2)).epsilon(1e-14));
        CHECK(zs.z_half_transform(TrigKind::cos, 0, 0, 0) == doctest::Approx(std::sqrt(pi / 2) * ell).epsilon(1e-10));
        CHECK(std::abs(zs.z_half_transform(TrigKind::sin, 0, 0, 0)) < 1e-15);
    }
}

TEST_CASE("derivative transforms against brute-force integration") {
    const CovarianceModel m = CovarianceModel::gaussian(1.0);
    ZSpectrum zs(m);
    for (double b : {0.0, 0.4, 1.3, 2.5}) {
        for (int d = 0; d <= 2; ++d) {
            const std::complex<double> v = zs.z_fourier(b, d), o = fourier_oracle(m, b, d);
            CHECK(std::abs(v - o) <= 1e-10 * (1 + std::abs(o)));
        }
        CHECK(std::abs(zs.z_fourier(b, 2) + b * b * zs.ghat(b)) <= 1e-14 * (1 + b * b));
    }
}

TEST_CASE("ghat is nonnegative and decreasing, and equals twice H_c") {
    ZSpectrum zs(CovarianceModel::gaussian(1.0));
    const double k = 2 * pi;
    double prev = zs.ghat(0);
    for (int i = 1; i <= 400; ++i) {
        const double b = 4 * k * i / 400.0, v = zs.ghat(b);
        CHECK(v >= 0.0);
        if (v > 1e-300) CHECK(v < prev);
        prev = v;
    }
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 8);
    for (int t = 0; t < 20; ++t) {
        const double b = u(rng);
        CHECK(std::abs(2 * zs.z_half_transform(TrigKind::cos, b, 0, 0) - zs.ghat(b)) <= 1e-9);
        CHECK(std::abs(zs.ghat(b) - zs.ghat(-b)) == 0.0);
    }
}

TEST_CASE("closed-form half-line transform matches adaptive quadrature") {
    ZSpectrum zs(CovarianceModel::gaussian(0.8));
    for (double b : {0.0, 0.2, 1.0, 3.0, 7.5}) {
        const std::complex<double> h = zs.half_line(b);
        CHECK(h.real() == doctest::Approx(zs.z_half_transform(TrigKind::cos, b, 0, 0)).epsilon(1e-9));
        CHECK(std::abs(h.imag() - zs.z_half_transform(TrigKind::sin, b, 0, 0)) <= 1e-9);
        std::complex<double> all[3];
        zs.half_line_all(b, all);
        for (int d = 0; d < 3; ++d) {
            CHECK(std::abs(all[d].real() - zs.z_half_transform(TrigKind::cos, b, 0, d)) <= 1e-9);
            CHECK(std::abs(all[d].imag() - zs.z_half_transform(TrigKind::sin, b, 0, d)) <= 1e-9);
        }
    }
}

TEST_CASE("damped transforms: matrix form against the scalar evaluator") {
    ZSpectrum zs(CovarianceModel::gaussian(1.0));
    const std::vector<double> a = {0.0, 0.5, 3.0, 12.0};
    const std::vector<double> beta = {0.0, 0.9, 2.2, 6.0};
    for (int d = 0; d <= 2; ++d) {
        const Eigen::MatrixXcd M = zs.damped_matrix(a, beta, d);
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < beta.size(); ++j) {
                const std::complex<double> s = zs.damped(beta[j], a[i], d);
                CHECK(std::abs(M(i, j) - s) <= 1e-9 * (1 + std::abs(s)));
                CHECK(std::abs(s.real() - zs.z_half_transform(TrigKind::cos, beta[j], a[i], d)) <= 1e-10);
            }
    }
    // a = 0 reduces to the half-line transform
    CHECK(std::abs(zs.damped(1.1, 0.0, 0) - zs.half_line(1.1)) <= 1e-10);
}

TEST_CASE("custom separable kernels go through the numerical route") {
    ZSpectrum g(CovarianceModel::gaussian(1.0));
    ZSpectrum c(custom_gaussian(1.0));
    for (double b : {0.0, 0.7, 2.0}) {
        CHECK(c.ghat(b) == doctest::Approx(g.ghat(b)).epsilon(1e-9));
        CHECK(std::abs(c.half_line(b) - g.half_line(b)) <= 1e-9);
    }
    CovarianceModel bad = custom_gaussian(1.0);
    bad.k1 = [](double d) { return 2 * std::exp(-d * d); };
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK(custom_gaussian(1.0).hash() != CovarianceModel::gaussian(1.0).hash());
}

TEST_CASE("invalid parameters") {
    CHECK_THROWS_AS(CovarianceModel::gaussian(0.0), std::invalid_argument);
    CHECK_THROWS_AS(CovarianceModel::gaussian(1.0, -1.0), std::invalid_argument);
    ZSpectrum zs(CovarianceModel::gaussian(1.0));
    CHECK_THROWS_AS(zs.z_half_transform(TrigKind::cos, 1.0, -0.1, 0), std::invalid_argument);
    CHECK_THROWS_AS(zs.z_half_transform(TrigKind::cos, 1.0, 0.0, 3), std::invalid_argument);
}

TEST_CASE("separable covariance evaluation") {
    const CovarianceModel m = CovarianceModel::gaussian(1.5, 0.3);
    CHECK(m.transverse_kernel(0.2, 0.3, 0.2, 0.3) == 1.0);
    CHECK(m.transverse_kernel(0, 0, 1, 2) == doctest::Approx(std::exp(-5 / (2 * 2.25))).epsilon(1e-15));
    CHECK(m.g(0) == 1.0);
    CHECK(m.g(m.z_cut()) < 1e-16);
    // g' and g'' against central differences
    const double h = 1e-5;
    for (double z : {0.3, 1.0, 2.4}) {
        CHECK(m.g(z, 1) == doctest::Approx((m.g(z + h) - m.g(z - h)) / (2 * h)).epsilon(1e-8));
        CHECK(m.g(z, 2) == doctest::Approx((m.g(z + h, 1) - m.g(z - h, 1)) / (2 * h)).epsilon(1e-8));
    }
}
