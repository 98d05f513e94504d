#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wfo/zernike.hpp"

using namespace wfo;

namespace {
constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt6 = 2.449489742783178;
}  // namespace

TEST_CASE("basis values match the tabulated forms") {
    CHECK(zernike_eval(0, {0.3, -0.7}) == 1.0);
    CHECK(zernike_eval(4, {0.0, 0.0}) == doctest::Approx(-kSqrt3).epsilon(1e-14));
    CHECK(zernike_eval(3, {0.5, 0.5}) == doctest::Approx(2.0 * kSqrt6 * 0.25).epsilon(1e-14));
    // 2*sqrt(6)*0.25 = 1.2247448...
    CHECK(zernike_eval(3, {0.5, 0.5}) == doctest::Approx(1.2247448713915889).epsilon(1e-14));
}

TEST_CASE("cartesian and polar forms agree everywhere") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const DiskPoint p = oracle::random_disk_point(rng);
        const double rho = p.rho();
        const double phi = p.phi();
        for (int n = 0; n <= kZernikeMaxIndex; ++n) {
            CHECK(zernike_eval(n, p) ==
                  doctest::Approx(oracle::zernike_polar(n, rho, phi)).epsilon(1e-12));
        }
    }
}

TEST_CASE("eval rejects unsupported indices and out-of-disk points") {
    CHECK_THROWS_AS(zernike_eval(10, {0.0, 0.0}), UnsupportedOrderError);
    CHECK_THROWS_AS(zernike_eval(-1, {0.0, 0.0}), UnsupportedOrderError);
    CHECK_THROWS_AS(zernike_eval(2, {0.8, 0.8}), DomainError);
    CHECK_THROWS_AS(zernike_gradient(2, {1.2, 0.0}), DomainError);
}

TEST_CASE("gradients: fixed values and finite-difference oracle") {
    const Vec2 g0 = zernike_gradient(0, {0.4, 0.1});
    CHECK(g0.x == 0.0);
    CHECK(g0.y == 0.0);

    const Vec2 g4 = zernike_gradient(4, {0.5, 0.0});
    CHECK(g4.x == doctest::Approx(2.0 * kSqrt3).epsilon(1e-14));
    CHECK(g4.y == doctest::Approx(0.0));

    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const DiskPoint p = oracle::random_disk_point(rng, 0.95);
        for (int n = 0; n <= kZernikeMaxIndex; ++n) {
            auto f = [n](double x, double y) { return zernike_eval(n, {x, y}); };
            const Vec2 fd = oracle::fd_gradient(f, p.x, p.y);
            const Vec2 an = zernike_gradient(n, p);
            CHECK(std::abs(fd.x - an.x) < 1e-6);
            CHECK(std::abs(fd.y - an.y) < 1e-6);
        }
    }
}

TEST_CASE("orthogonality: <Z_i, Z_j> = pi * delta_ij") {
    for (int i = 0; i <= kZernikeMaxIndex; ++i) {
        for (int j = 0; j <= kZernikeMaxIndex; ++j) {
            const double ip = inner_product(zernike_function(i), zernike_function(j));
            const double expected = i == j ? M_PI : 0.0;
            CHECK(std::abs(ip - expected) < 1e-6);
        }
    }
}

TEST_CASE("inner products confirmed by a refined quadrature oracle") {
    const DiskQuadrature fine{128, 256};
    CHECK(inner_product(zernike_function(4), zernike_function(4), fine) ==
          doctest::Approx(M_PI).epsilon(1e-12));
    CHECK(std::abs(inner_product(zernike_function(3), zernike_function(5), fine)) < 1e-12);
    // Same azimuthal symmetry, still orthogonal across radial orders.
    CHECK(std::abs(inner_product(zernike_function(1), zernike_function(7), fine)) < 1e-12);
    CHECK(std::abs(inner_product(zernike_function(1), zernike_function(7))) < 1e-12);
}

TEST_CASE("checked inner product flags non-converging integrands") {
    // A discontinuous integrand the polynomial-exact rule cannot settle.
    DiskFunction step = [](double x, double) { return x > 0.131 ? 1.0 : 0.0; };
    CHECK_THROWS_AS(inner_product_checked(step, step, DiskQuadrature{8, 16}, 1e-12),
                    AccuracyError);
    // Smooth polynomial integrands pass the check.
    CHECK(inner_product_checked(zernike_function(4), zernike_function(4)) ==
          doctest::Approx(M_PI).epsilon(1e-12));
}

TEST_CASE("gauss-legendre nodes integrate polynomials exactly") {
    std::vector<double> xs, ws;
    gauss_legendre(8, xs, ws);
    double sum = 0.0, x6 = 0.0;
    for (int i = 0; i < 8; ++i) {
        sum += ws[i];
        x6 += ws[i] * std::pow(xs[i], 6);
    }
    CHECK(sum == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(x6 == doctest::Approx(2.0 / 7.0).epsilon(1e-13));
}

TEST_CASE("decompose: zero map, single mode, two-mode crosstalk") {
    const double um = 1e-6;

    const WavefrontMap zero = synthesize(ZernikeCoefficients{}, 129, 0.05);
    const DecomposeResult rz = decompose(zero, 9);
    for (int n = 0; n <= 9; ++n) CHECK(std::abs(rz.coefficients[n]) < 1e-18);

    const WavefrontMap single = synthesize(ZernikeCoefficients::single(4, 0.5 * um), 129, 0.05);
    const DecomposeResult rs = decompose(single, 9);
    CHECK(rs.coefficients[4] == doctest::Approx(0.5 * um).epsilon(1e-9));
    for (int n = 0; n <= 9; ++n) {
        if (n != 4) CHECK(std::abs(rs.coefficients[n]) < 1e-4 * um);
    }

    ZernikeCoefficients two;
    two.set(3, 1.0 * um);
    two.set(5, 2.0 * um);
    const DecomposeResult rt = decompose(synthesize(two, 129, 0.05), 9);
    CHECK(rt.coefficients[3] == doctest::Approx(1.0 * um).epsilon(1e-6));
    CHECK(rt.coefficients[5] == doctest::Approx(2.0 * um).epsilon(1e-6));
    for (int n : {0, 1, 2, 4, 6, 7, 8, 9}) CHECK(std::abs(rt.coefficients[n]) < 1e-3 * um);
    // Doubled-resolution oracle agrees.
    const DecomposeResult rt2 = decompose(synthesize(two, 257, 0.05), 9);
    CHECK(std::abs(rt2.coefficients[3] - rt.coefficients[3]) < 1e-3 * um);
    CHECK(std::abs(rt2.coefficients[5] - rt.coefficients[5]) < 1e-3 * um);
}

TEST_CASE("synthesize: zero and defocus center value") {
    const WavefrontMap zero = synthesize(ZernikeCoefficients{}, 65, 1.0);
    for (int iy = 0; iy < zero.ny; ++iy) {
        for (int ix = 0; ix < zero.nx; ++ix) {
            if (zero.valid(ix, iy)) CHECK(zero.at(ix, iy) == 0.0);
        }
    }

    const WavefrontMap defocus = synthesize(ZernikeCoefficients::single(4, 1e-6), 129, 1.0);
    CHECK(defocus.at(64, 64) == doctest::Approx(-kSqrt3 * 1e-6).epsilon(1e-12));
}

TEST_CASE("decompose(synthesize(c)) is the identity within 1e-3 um") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> uni(-1e-6, 1e-6);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> vals(10);
        for (double& v : vals) v = uni(rng);
        const ZernikeCoefficients c{std::vector<double>(vals)};
        const DecomposeResult r = decompose(synthesize(c, 129, 0.05), 9);
        for (int n = 0; n <= 9; ++n) {
            CHECK(std::abs(r.coefficients[n] - c[n]) < 1e-3 * 1e-6);
        }
        CHECK(r.residual_rms_m < 1e-12);
    }
}

TEST_CASE("decompose rejects undersampled maps") {
    const WavefrontMap coarse = synthesize(ZernikeCoefficients::single(4, 1e-6), 32, 0.05);
    CHECK_THROWS_AS(decompose(coarse, 9), ResolutionError);
}

TEST_CASE("harmonic flags match the basis Laplacians") {
    for (int n : {0, 1, 2, 3, 5, 6, 9}) CHECK(zernike_is_harmonic(n));
    for (int n : {4, 7, 8}) CHECK_FALSE(zernike_is_harmonic(n));
    CHECK_THROWS_AS(zernike_is_harmonic(10), UnsupportedOrderError);

    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const DiskPoint p = oracle::random_disk_point(rng, 0.9);
        for (int n = 0; n <= kZernikeMaxIndex; ++n) {
            if (!zernike_is_harmonic(n)) continue;
            auto f = [n](double x, double y) { return zernike_eval(n, {x, y}); };
            CHECK(std::abs(oracle::fd_laplacian(f, p.x, p.y)) < 1e-4);
        }
    }
    // Non-harmonic modes have clearly nonzero Laplacians at rho = 0.5.
    for (int n : {4, 7, 8}) {
        auto f = [n](double x, double y) { return zernike_eval(n, {x, y}); };
        CHECK(std::abs(oracle::fd_laplacian(f, 0.3, 0.4)) > 1.0);
    }
}

TEST_CASE("coefficient container validates input") {
    auto make_bad = [] { return ZernikeCoefficients(std::vector<double>{0.0, std::nan("")}); };
    CHECK_THROWS_AS(make_bad(), InputError);
    ZernikeCoefficients c;
    CHECK_THROWS_AS(c.set(-1, 0.0), InputError);
    c.set(7, 2e-6);
    CHECK(c.max_index() == 7);
    CHECK(c[7] == 2e-6);
    CHECK(c[9] == 0.0);  // beyond stored range reads as absent
}
