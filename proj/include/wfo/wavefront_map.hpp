#pragma once

#include <cmath>
#include <vector>

namespace wfo {

// Sampled optical path difference over the pupil, on a regular grid in
// normalized coordinates (the unit disk maps to the physical aperture of
// radius aperture_radius_m). Samples outside the measured region hold NaN;
// they are never zero-filled.
struct WavefrontMap {
    int nx = 0;
    int ny = 0;
    double x0 = -1.0;   // normalized coordinate of sample column 0
    double y0 = -1.0;   // normalized coordinate of sample row 0
    double step = 0.0;  // normalized sample spacing, identical in x and y
    double aperture_radius_m = 0.0;
    std::vector<double> w_m;  // row-major [iy*nx + ix], meters; NaN = invalid

    double x_at(int ix) const { return x0 + ix * step; }
    double y_at(int iy) const { return y0 + iy * step; }
    double at(int ix, int iy) const { return w_m[static_cast<size_t>(iy) * nx + ix]; }
    double& at(int ix, int iy) { return w_m[static_cast<size_t>(iy) * nx + ix]; }
    bool valid(int ix, int iy) const { return std::isfinite(at(ix, iy)); }
    double sample_spacing_m() const { return step * aperture_radius_m; }

    size_t valid_count() const {
        size_t n = 0;
        for (double v : w_m) n += std::isfinite(v) ? 1 : 0;
        return n;
    }

    // n x n grid spanning [-1,1]^2, all samples invalid.
    static WavefrontMap disk_grid(int n, double aperture_radius_m);
};

// Scalar field on the same lattice convention as WavefrontMap.
struct GridMap {
    int nx = 0;
    int ny = 0;
    double x0 = -1.0;
    double y0 = -1.0;
    double step = 0.0;
    double aperture_radius_m = 0.0;
    std::vector<double> v;  // NaN = invalid

    double at(int ix, int iy) const { return v[static_cast<size_t>(iy) * nx + ix]; }
    double& at(int ix, int iy) { return v[static_cast<size_t>(iy) * nx + ix]; }
    bool valid(int ix, int iy) const { return std::isfinite(at(ix, iy)); }
    double x_at(int ix) const { return x0 + ix * step; }
    double y_at(int iy) const { return y0 + iy * step; }
};

}  // namespace wfo
