#pragma once

#include <cstdint>
#include <vector>

#include "wfo/util.hpp"
#include "wfo/wavefront_map.hpp"
#include "wfo/zernike.hpp"

namespace wfo {

// Shack-Hartmann spot displacements at lenslet positions. Positions are in
// normalized pupil coordinates (unit disk of the aperture the coefficients
// refer to); displacements are physical meters on the sensor.
struct GradientField {
    std::vector<double> x_norm;
    std::vector<double> y_norm;
    std::vector<double> dx_m;
    std::vector<double> dy_m;
    double f_sh_m = 0.0;             // lenslet focal length
    double aperture_radius_m = 0.0;  // rho_a of the frame the positions live in
    // Set by sh_forward when the input carried piston/tilt terms; those shift
    // the image (distortion), not the spot pattern this model describes.
    bool low_order_ignored = false;

    size_t size() const { return x_norm.size(); }
};

// Local wavefront slopes from displacements: beta = d / sqrt(f_sh^2 + d^2).
// beta_from_displacement's inverse; exact for |beta| < 1.
double beta_from_displacement(double d_m, double f_sh_m);
double displacement_from_beta(double beta, double f_sh_m);

// Forward model: slopes from coefficients with indices >= 4 (the gradient
// design matrix starts at Z4; piston/tilt displace the image, not the spots'
// blur-relevant slopes, and are reported back as unobservable). Displacements
// are the exact inversion of the slope relation, not the small-angle form.
GradientField sh_forward(const ZernikeCoefficients& c, const std::vector<Vec2>& lenslets_norm,
                         double f_sh_m, double aperture_radius_m);

// First index the gradient model can observe; c_0..c_3 are never solved for.
inline constexpr int kFirstObservableIndex = 4;

struct ReconstructionResult {
    ZernikeCoefficients coefficients;  // c_0..c_3 forced to zero
    double residual_rms = 0.0;         // RMS slope residual (dimensionless)
    double gramian_condition = 0.0;    // cond(M^T M), the paper's invertibility diagnostic
    int first_observable_index = kFirstObservableIndex;
};

// Least-squares solve of beta = (1/rho_a) M c for c_4..c_max_index. Uses an
// orthogonal factorization (the normal-equations form squares the condition
// number); the Gramian condition is reported as a diagnostic and layouts with
// cond(M^T M) > 1e12 are rejected naming the unconstrained mode directions.
ReconstructionResult reconstruct(const GradientField& g, int max_index);

// Subtracts the mean slope (per component) in beta space: the tilt gauge.
// Constant slope components belong to the unobservable c_1/c_2 modes and would
// otherwise leak into the Z7/Z8 columns, which carry constant gradient parts.
GradientField detrended(const GradientField& g);

// Additive Gaussian displacement noise (synthetic-measurement model).
void add_displacement_noise(GradientField& g, double sigma_m, std::uint64_t seed);

enum class PowerAxes { x, y, xy, all };

// Directional refractive power maps: D_xi = d^2 W / d xi^2 in physical
// coordinates (units: diopters). Central second differences; samples whose
// stencil leaves the valid region are marked invalid, never extrapolated.
struct RefractivePowerMap {
    int nx = 0;
    int ny = 0;
    double x0 = -1.0;
    double y0 = -1.0;
    double step = 0.0;
    double aperture_radius_m = 0.0;
    std::vector<double> dx_dpt;   // d2W/dx2
    std::vector<double> dy_dpt;   // d2W/dy2
    std::vector<double> dxy_dpt;  // d2W/dxdy

    double at_x(int ix, int iy) const { return dx_dpt[static_cast<size_t>(iy) * nx + ix]; }
    double at_y(int ix, int iy) const { return dy_dpt[static_cast<size_t>(iy) * nx + ix]; }
    double at_xy(int ix, int iy) const { return dxy_dpt[static_cast<size_t>(iy) * nx + ix]; }
};

RefractivePowerMap refractive_power(const WavefrontMap& w, PowerAxes axes = PowerAxes::all);

// 2x2 Hessian of W at one interior grid node, physical units (diopters).
struct DioptricPowerMatrix {
    double dxx = 0.0;
    double dyy = 0.0;
    double dxy = 0.0;  // symmetric off-diagonal

    double trace() const { return dxx + dyy; }
    double det() const { return dxx * dyy - dxy * dxy; }
};

DioptricPowerMatrix dioptric_matrix(const WavefrontMap& w, int ix, int iy);

// det(Hessian W) over the interior: the blur-ellipse area proxy (Gaussian
// curvature up to the small-slope factor; the raw determinant is reported).
GridMap blur_ellipse_proxy(const WavefrontMap& w);

// tr(D) = D_x + D_y = Laplacian of W; blind to harmonic aberration fields.
GridMap laplace_trace(const WavefrontMap& w);

// Sub-aperture map plus the normalized global position of its grid center.
struct TilePlacement {
    WavefrontMap map;
    Vec2 offset;  // global normalized coordinates of the tile's local (0,0)
};

struct StitchResult {
    WavefrontMap map;
    double overlap_rms_m = 0.0;  // pairwise disagreement after alignment
};

// Merges sub-aperture maps into one global map. Per-tile piston and tilt are
// free gauge modes (unobservable to the gradient model), solved by least
// squares on the overlap samples; the first tile pins the gauge. Tiles must
// share the sample spacing and sit on the global lattice.
StitchResult stitch(const std::vector<TilePlacement>& tiles);

}  // namespace wfo
