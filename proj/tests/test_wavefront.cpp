#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "wfo/wavefront.hpp"

using namespace wfo;

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt6 = 2.449489742783178;

WavefrontMap map_from_fn(int n, double rho_a, const std::function<double(double, double)>& fn) {
    WavefrontMap m = WavefrontMap::disk_grid(n, rho_a);
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const double x = m.x_at(ix);
            const double y = m.y_at(iy);
            if (x * x + y * y <= 1.0) m.at(ix, iy) = fn(x, y);
        }
    }
    return m;
}

std::vector<Vec2> disk_lenslet_grid(int per_axis, double max_rho = 0.95) {
    std::vector<Vec2> pts;
    for (int iy = 0; iy < per_axis; ++iy) {
        for (int ix = 0; ix < per_axis; ++ix) {
            const double x = -max_rho + 2.0 * max_rho * ix / (per_axis - 1);
            const double y = -max_rho + 2.0 * max_rho * iy / (per_axis - 1);
            if (x * x + y * y <= max_rho * max_rho) pts.push_back({x, y});
        }
    }
    return pts;
}

}  // namespace

TEST_CASE("slope <-> displacement inversion is exact") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(-0.9, 0.9);
    for (int i = 0; i < 1000; ++i) {
        const double beta = uni(rng);
        const double d = displacement_from_beta(beta, 5e-3);
        const double back = beta_from_displacement(d, 5e-3);
        CHECK(back == doctest::Approx(beta).epsilon(1e-12));
    }
    CHECK_THROWS_AS(displacement_from_beta(1.0, 5e-3), NonphysicalGradientError);
    CHECK_THROWS_AS(displacement_from_beta(-1.4, 5e-3), NonphysicalGradientError);
}

TEST_CASE("sh_forward: null wavefront centers every spot") {
    const auto lenslets = disk_lenslet_grid(10);
    const GradientField g = sh_forward(ZernikeCoefficients{}, lenslets, 5e-3, 0.05);
    for (size_t i = 0; i < g.size(); ++i) {
        CHECK(g.dx_m[i] == 0.0);
        CHECK(g.dy_m[i] == 0.0);
    }
    CHECK_FALSE(g.low_order_ignored);
}

TEST_CASE("sh_forward: pure defocus gives a radial slope field linear in position") {
    const auto lenslets = disk_lenslet_grid(12);
    const double c4 = 2e-6, rho_a = 0.05, f_sh = 5e-3;
    const GradientField g = sh_forward(ZernikeCoefficients::single(4, c4), lenslets, f_sh, rho_a);
    const double scale = 4.0 * kSqrt3 * c4 / rho_a;
    for (size_t i = 0; i < g.size(); ++i) {
        const double bx = beta_from_displacement(g.dx_m[i], f_sh);
        const double by = beta_from_displacement(g.dy_m[i], f_sh);
        CHECK(bx == doctest::Approx(scale * g.x_norm[i]).epsilon(1e-12));
        CHECK(by == doctest::Approx(scale * g.y_norm[i]).epsilon(1e-12));
    }
}

TEST_CASE("sh_forward flags ignored piston/tilt input and rejects |beta| >= 1") {
    const auto lenslets = disk_lenslet_grid(8);
    ZernikeCoefficients with_tilt;
    with_tilt.set(1, 1e-6);
    with_tilt.set(4, 1e-6);
    CHECK(sh_forward(with_tilt, lenslets, 5e-3, 0.05).low_order_ignored);

    // A defocus so steep the slope saturates.
    CHECK_THROWS_AS(sh_forward(ZernikeCoefficients::single(4, 0.1), lenslets, 5e-3, 0.05),
                    NonphysicalGradientError);
}

TEST_CASE("reconstruct round-trips the forward model to numerical precision") {
    const auto lenslets = disk_lenslet_grid(12);  // ~100 lenslets
    REQUIRE(lenslets.size() >= 100);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uni(-2e-6, 2e-6);
    ZernikeCoefficients c;
    for (int n = 4; n <= 9; ++n) c.set(n, uni(rng));

    const GradientField g = sh_forward(c, lenslets, 5e-3, 0.05);
    const ReconstructionResult res = reconstruct(g, 9);
    for (int n = 0; n <= 9; ++n) {
        CHECK(std::abs(res.coefficients[n] - (n >= 4 ? c[n] : 0.0)) < 1e-15);
    }
    CHECK(res.residual_rms < 1e-14);
    CHECK(res.first_observable_index == 4);
    CHECK(res.gramian_condition > 1.0);
    CHECK(res.gramian_condition < 1e6);
}

TEST_CASE("round trip holds across random non-degenerate layouts (m >= 50)") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> amp(-1e-6, 1e-6);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Vec2> pts;
        const int m = 50 + static_cast<int>(rng() % 100);
        for (int i = 0; i < m; ++i) {
            const DiskPoint p = oracle::random_disk_point(rng, 0.97);
            pts.push_back({p.x, p.y});
        }
        ZernikeCoefficients c;
        for (int n = 4; n <= 9; ++n) c.set(n, amp(rng));
        const ReconstructionResult res = reconstruct(sh_forward(c, pts, 4e-3, 0.04), 9);
        for (int n = 4; n <= 9; ++n) {
            CHECK(std::abs(res.coefficients[n] - c[n]) < 1e-8 * std::abs(c[n]) + 1e-18);
        }
    }
}

TEST_CASE("zero displacements reconstruct to zero coefficients") {
    const auto lenslets = disk_lenslet_grid(10);
    GradientField g = sh_forward(ZernikeCoefficients{}, lenslets, 5e-3, 0.05);
    const ReconstructionResult res = reconstruct(g, 9);
    for (int n = 0; n <= 9; ++n) CHECK(res.coefficients[n] == 0.0);
}

TEST_CASE("axis-parallel collinear layouts are rejected as degenerate") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> uni(-0.9, 0.9);
    // On the x axis: gradient columns of Z4 and Z5 are proportional.
    std::vector<Vec2> on_axis;
    for (int i = 0; i < 30; ++i) on_axis.push_back({uni(rng), 0.0});
    GradientField g = sh_forward(ZernikeCoefficients::single(4, 1e-7), on_axis, 5e-3, 0.05);
    CHECK_THROWS_WITH_AS(reconstruct(g, 9), doctest::Contains("Z4"), DegenerateLayoutError);

    // Offset axis-parallel lines carry the same degeneracy.
    std::vector<Vec2> offset;
    for (int i = 0; i < 30; ++i) offset.push_back({0.25, uni(rng) * 0.9});
    GradientField g2 = sh_forward(ZernikeCoefficients::single(4, 1e-7), offset, 5e-3, 0.05);
    CHECK_THROWS_AS(reconstruct(g2, 9), DegenerateLayoutError);
}

TEST_CASE("oblique collinear layouts remain identifiable for c4..c9") {
    // The degeneracy is specific to axis-parallel lines; a 45 degree center
    // line spans all six modes.
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> uni(-0.65, 0.65);
    std::vector<Vec2> diag;
    for (int i = 0; i < 30; ++i) {
        const double t = uni(rng);
        diag.push_back({t, t});
    }
    ZernikeCoefficients c;
    c.set(4, 1e-6);
    c.set(7, -5e-7);
    const ReconstructionResult res = reconstruct(sh_forward(c, diag, 5e-3, 0.05), 9);
    CHECK(res.gramian_condition < 1e6);
    CHECK(res.coefficients[4] == doctest::Approx(1e-6).epsilon(1e-8));
    CHECK(res.coefficients[7] == doctest::Approx(-5e-7).epsilon(1e-8));
}

TEST_CASE("reconstruct wants at least as many lenslets as unknowns") {
    std::vector<Vec2> few = {{0.1, 0.2}, {-0.3, 0.4}, {0.5, -0.1}};
    GradientField g = sh_forward(ZernikeCoefficients::single(4, 1e-7), few, 5e-3, 0.05);
    CHECK_THROWS_AS(reconstruct(g, 9), DegenerateLayoutError);
}

TEST_CASE("detrended removes the mean slope exactly") {
    const auto lenslets = disk_lenslet_grid(9);
    ZernikeCoefficients c;
    c.set(4, 1e-6);
    c.set(8, 4e-7);  // Z8 carries a constant gradient part
    GradientField g = sh_forward(c, lenslets, 5e-3, 0.05);
    const GradientField d = detrended(g);
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < d.size(); ++i) {
        mx += beta_from_displacement(d.dx_m[i], d.f_sh_m);
        my += beta_from_displacement(d.dy_m[i], d.f_sh_m);
    }
    CHECK(std::abs(mx) / d.size() < 1e-18);
    CHECK(std::abs(my) / d.size() < 1e-18);
}

TEST_CASE("displacement noise is seeded and reproducible") {
    const auto lenslets = disk_lenslet_grid(8);
    GradientField a = sh_forward(ZernikeCoefficients::single(4, 1e-6), lenslets, 5e-3, 0.05);
    GradientField b = a;
    add_displacement_noise(a, 1e-7, 99);
    add_displacement_noise(b, 1e-7, 99);
    CHECK(a.dx_m == b.dx_m);
    CHECK(a.dy_m == b.dy_m);
    GradientField c = sh_forward(ZernikeCoefficients::single(4, 1e-6), lenslets, 5e-3, 0.05);
    add_displacement_noise(c, 1e-7, 100);
    CHECK(c.dx_m != a.dx_m);
}

TEST_CASE("refractive power of a spherical wavefront is the lens power") {
    const double d_dpt = 0.1003;  // 100.3 mdpt
    const double rho_a = 0.05;
    const WavefrontMap w = map_from_fn(129, rho_a, [&](double x, double y) {
        (void)y;
        const double xp = x * rho_a;
        return 0.5 * d_dpt * xp * xp;
    });
    const RefractivePowerMap p = refractive_power(w);
    for (int iy = 0; iy < w.ny; ++iy) {
        for (int ix = 0; ix < w.nx; ++ix) {
            if (!std::isfinite(p.at_x(ix, iy)) || !std::isfinite(p.at_y(ix, iy))) continue;
            CHECK(p.at_x(ix, iy) == doctest::Approx(d_dpt).epsilon(1e-9));
            CHECK(std::abs(p.at_y(ix, iy)) < 1e-12);
        }
    }
}

TEST_CASE("oblique astigmatism hides from D_x and D_y but not from D_xy") {
    const double c3 = 2e-6, rho_a = 0.05;
    const WavefrontMap w = synthesize(ZernikeCoefficients::single(3, c3), 129, rho_a);
    const RefractivePowerMap p = refractive_power(w);
    const double expected_dxy = 2.0 * kSqrt6 * c3 / (rho_a * rho_a);
    size_t checked = 0;
    for (int iy = 0; iy < w.ny; ++iy) {
        for (int ix = 0; ix < w.nx; ++ix) {
            if (!std::isfinite(p.at_x(ix, iy)) || !std::isfinite(p.at_y(ix, iy)) ||
                !std::isfinite(p.at_xy(ix, iy))) {
                continue;
            }
            CHECK(std::abs(p.at_x(ix, iy)) < 1e-10);
            CHECK(std::abs(p.at_y(ix, iy)) < 1e-10);
            CHECK(p.at_xy(ix, iy) == doctest::Approx(expected_dxy).epsilon(1e-9));
            ++checked;
        }
    }
    CHECK(checked > 1000);
}

TEST_CASE("defocus carries constant D_x = D_y = 4*sqrt(3)*c4/rho_a^2") {
    const double c4 = 1.5e-6, rho_a = 0.04;
    const WavefrontMap w = synthesize(ZernikeCoefficients::single(4, c4), 129, rho_a);
    const RefractivePowerMap p = refractive_power(w);
    const double expected = 4.0 * kSqrt3 * c4 / (rho_a * rho_a);
    for (int iy = 40; iy < 90; ++iy) {
        for (int ix = 40; ix < 90; ++ix) {
            CHECK(p.at_x(ix, iy) == doctest::Approx(expected).epsilon(1e-9));
            CHECK(p.at_y(ix, iy) == doctest::Approx(expected).epsilon(1e-9));
        }
    }
}

TEST_CASE("stencil never extrapolates: rim samples are invalid") {
    const WavefrontMap w = synthesize(ZernikeCoefficients::single(4, 1e-6), 65, 0.05);
    const RefractivePowerMap p = refractive_power(w);
    // Rightmost valid sample of the middle row has no right neighbor.
    const int iy = 32;
    int ix = w.nx - 1;
    while (ix >= 0 && !w.valid(ix, iy)) --ix;
    REQUIRE(ix > 0);
    CHECK_FALSE(std::isfinite(p.at_x(ix, iy)));
    CHECK_THROWS_AS(dioptric_matrix(w, ix, iy), DomainError);
    CHECK_THROWS_AS(dioptric_matrix(w, 0, 0), DomainError);
}

TEST_CASE("dioptric power matrix: structure and the trace identity") {
    const double d_dpt = 0.1003, rho_a = 0.05;
    const WavefrontMap sphere = map_from_fn(129, rho_a, [&](double x, double y) {
        return 0.5 * d_dpt * rho_a * rho_a * (x * x + y * y);
    });
    const DioptricPowerMatrix ds = dioptric_matrix(sphere, 64, 64);
    CHECK(ds.dxx == doctest::Approx(d_dpt).epsilon(1e-9));
    CHECK(ds.dyy == doctest::Approx(d_dpt).epsilon(1e-9));
    CHECK(std::abs(ds.dxy) < 1e-12);

    const WavefrontMap oblique = synthesize(ZernikeCoefficients::single(3, 2e-6), 129, rho_a);
    const DioptricPowerMatrix d3 = dioptric_matrix(oblique, 64, 64);
    CHECK(std::abs(d3.dxx) < 1e-10);
    CHECK(std::abs(d3.dyy) < 1e-10);
    CHECK(std::abs(d3.dxy) > 1e-3);

    // det D = ((tr D)^2 - tr(D^2)) / 2 at random interior points.
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> amp(-2e-6, 2e-6);
    ZernikeCoefficients c;
    for (int n = 3; n <= 9; ++n) c.set(n, amp(rng));
    const WavefrontMap w = synthesize(c, 129, rho_a);
    int found = 0;
    while (found < 100) {
        const int ix = 2 + static_cast<int>(rng() % (w.nx - 4));
        const int iy = 2 + static_cast<int>(rng() % (w.ny - 4));
        DioptricPowerMatrix d;
        try {
            d = dioptric_matrix(w, ix, iy);
        } catch (const DomainError&) {
            continue;
        }
        ++found;
        const double tr = d.trace();
        const double tr_sq = d.dxx * d.dxx + 2.0 * d.dxy * d.dxy + d.dyy * d.dyy;
        const double via_traces = 0.5 * (tr * tr - tr_sq);
        CHECK(via_traces == doctest::Approx(d.det()).epsilon(1e-10));
    }
}

TEST_CASE("blur ellipse proxy: sphere, saddle, null") {
    const double rho_a = 0.05;
    const double d_dpt = 0.1003;
    const WavefrontMap sphere = map_from_fn(129, rho_a, [&](double x, double y) {
        return 0.5 * d_dpt * rho_a * rho_a * (x * x + y * y);
    });
    const GridMap dets = blur_ellipse_proxy(sphere);
    CHECK(dets.at(64, 64) == doctest::Approx(d_dpt * d_dpt).epsilon(1e-8));

    const double c3 = 2e-6;
    const GridMap saddle =
        blur_ellipse_proxy(synthesize(ZernikeCoefficients::single(3, c3), 129, rho_a));
    const double expected = -std::pow(2.0 * kSqrt6 * c3 / (rho_a * rho_a), 2);
    CHECK(saddle.at(64, 64) == doctest::Approx(expected).epsilon(1e-8));

    const GridMap null = blur_ellipse_proxy(synthesize(ZernikeCoefficients{}, 129, rho_a));
    CHECK(null.at(64, 64) == 0.0);
}

TEST_CASE("laplace trace: harmonic combinations vanish, defocus does not") {
    const double rho_a = 0.05;
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> amp(-5e-6, 5e-6);

    ZernikeCoefficients harmonic;
    for (int n : {0, 1, 2, 3, 5, 6, 9}) harmonic.set(n, amp(rng));
    const GridMap trace = laplace_trace(synthesize(harmonic, 129, rho_a));
    for (double v : trace.v) {
        if (std::isfinite(v)) CHECK(std::abs(v) < 1e-8);
    }

    const double c4 = 1e-6;
    const GridMap t4 = laplace_trace(synthesize(ZernikeCoefficients::single(4, c4), 129, rho_a));
    const double expected = 8.0 * kSqrt3 * c4 / (rho_a * rho_a);
    CHECK(t4.at(64, 64) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("trace map is gauge invariant under added harmonic fields") {
    const double rho_a = 0.05;
    std::mt19937_64 rng(67);
    std::uniform_real_distribution<double> amp(-2e-6, 2e-6);
    for (int trial = 0; trial < 3; ++trial) {
        ZernikeCoefficients base;
        for (int n = 0; n <= 9; ++n) base.set(n, amp(rng));
        ZernikeCoefficients gauged = base;
        for (int n : {0, 1, 2, 3, 5, 6, 9}) gauged.set(n, gauged[n] + amp(rng));

        const GridMap ta = laplace_trace(synthesize(base, 129, rho_a));
        const GridMap tb = laplace_trace(synthesize(gauged, 129, rho_a));
        for (size_t i = 0; i < ta.v.size(); ++i) {
            if (std::isfinite(ta.v[i]) && std::isfinite(tb.v[i])) {
                CHECK(std::abs(ta.v[i] - tb.v[i]) < 1e-8);
            }
        }
    }
}

TEST_CASE("second differences converge at O(h^2) on a smooth analytic map") {
    const double rho_a = 0.05;
    auto fn = [&](double x, double y) { return 1e-6 * std::cos(3.0 * x) * std::cos(2.0 * y); };
    auto dxx_exact = [&](double x, double y) {
        return -9.0 * 1e-6 * std::cos(3.0 * x) * std::cos(2.0 * y) / (rho_a * rho_a);
    };
    double errs[3];
    int idx = 0;
    for (int n : {65, 129, 257}) {
        const WavefrontMap w = map_from_fn(n, rho_a, fn);
        const RefractivePowerMap p = refractive_power(w, PowerAxes::x);
        double max_err = 0.0;
        for (int iy = n / 4; iy < 3 * n / 4; ++iy) {
            for (int ix = n / 4; ix < 3 * n / 4; ++ix) {
                if (!std::isfinite(p.at_x(ix, iy))) continue;
                max_err = std::max(
                    max_err, std::abs(p.at_x(ix, iy) - dxx_exact(w.x_at(ix), w.y_at(iy))));
            }
        }
        errs[idx++] = max_err;
    }
    CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.15));
    CHECK(errs[1] / errs[2] == doctest::Approx(4.0).epsilon(0.15));
}

namespace {

// Cuts a rectangular window out of a global map, in global lattice units.
TilePlacement cut_tile(const WavefrontMap& global, int ix0, int iy0, int nx, int ny) {
    TilePlacement t;
    t.map.nx = nx;
    t.map.ny = ny;
    t.map.step = global.step;
    t.map.aperture_radius_m = global.aperture_radius_m;
    t.map.x0 = -0.5 * (nx - 1) * global.step;
    t.map.y0 = -0.5 * (ny - 1) * global.step;
    t.map.w_m.assign(static_cast<size_t>(nx) * ny, std::numeric_limits<double>::quiet_NaN());
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            t.map.at(ix, iy) = global.at(ix0 + ix, iy0 + iy);
        }
    }
    t.offset = {global.x_at(ix0) - t.map.x0, global.y_at(iy0) - t.map.y0};
    return t;
}

}  // namespace

TEST_CASE("stitch: single tile passes through unchanged") {
    const WavefrontMap global = synthesize(ZernikeCoefficients::single(4, 1e-6), 129, 0.05);
    TilePlacement tile = cut_tile(global, 30, 30, 60, 60);
    const StitchResult res = stitch({tile});
    CHECK(res.overlap_rms_m == 0.0);
    int compared = 0;
    for (int iy = 0; iy < 60; ++iy) {
        for (int ix = 0; ix < 60; ++ix) {
            if (!tile.map.valid(ix, iy)) continue;
            CHECK(res.map.at(30 + ix, 30 + iy) == doctest::Approx(tile.map.at(ix, iy)));
            ++compared;
        }
    }
    CHECK(compared > 1000);
}

TEST_CASE("stitch: per-tile pistons are solved away on the overlap") {
    const WavefrontMap global = synthesize(ZernikeCoefficients::single(4, 2e-6), 129, 0.05);
    TilePlacement left = cut_tile(global, 14, 34, 70, 60);
    TilePlacement right = cut_tile(global, 44, 34, 70, 60);
    // Synthetic per-tile piston errors, exactly the unobservable mode.
    for (double& v : left.map.w_m) v += 3.7e-7;
    for (double& v : right.map.w_m) v += -1.2e-7;

    const StitchResult res = stitch({left, right});
    CHECK(res.overlap_rms_m < 1e-15);

    // Compare to the global map after removing the free piston gauge.
    double mean_diff = 0.0;
    size_t count = 0;
    for (int iy = 0; iy < res.map.ny; ++iy) {
        for (int ix = 0; ix < res.map.nx; ++ix) {
            if (!res.map.valid(ix, iy) || !global.valid(ix, iy)) continue;
            mean_diff += res.map.at(ix, iy) - global.at(ix, iy);
            ++count;
        }
    }
    REQUIRE(count > 4000);
    mean_diff /= static_cast<double>(count);
    for (int iy = 0; iy < res.map.ny; ++iy) {
        for (int ix = 0; ix < res.map.nx; ++ix) {
            if (!res.map.valid(ix, iy) || !global.valid(ix, iy)) continue;
            CHECK(std::abs(res.map.at(ix, iy) - global.at(ix, iy) - mean_diff) < 1e-15);
        }
    }
}

TEST_CASE("stitch: disjoint tiles and off-lattice tiles are rejected") {
    const WavefrontMap global = synthesize(ZernikeCoefficients::single(4, 1e-6), 129, 0.05);
    TilePlacement a = cut_tile(global, 20, 50, 20, 20);
    TilePlacement b = cut_tile(global, 90, 50, 20, 20);
    CHECK_THROWS_AS(stitch({a, b}), StitchingError);

    TilePlacement c = cut_tile(global, 40, 40, 40, 40);
    TilePlacement d = cut_tile(global, 50, 40, 40, 40);
    d.offset.x += 0.3 * global.step;  // break lattice alignment
    CHECK_THROWS_AS(stitch({c, d}), StitchingError);
}
