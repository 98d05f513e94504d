#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "wfo/errors.hpp"
#include "wfo/mtf.hpp"

namespace wfo {

// Grayscale raster with linear, real-valued intensity.
struct EdgeImage {
    int width = 0;
    int height = 0;
    double pitch_m = 0.0;
    double edge_angle_deg = 0.0;  // from vertical; set by the renderers
    std::vector<double> v;        // row-major

    double at(int x, int y) const { return v[static_cast<size_t>(y) * width + x]; }
    double& at(int x, int y) { return v[static_cast<size_t>(y) * width + x]; }
};

struct Roi {
    int x0 = 0;
    int y0 = 0;
    int w = 0;
    int h = 0;
};

struct EdgeSpec {
    int width = 256;
    int height = 256;
    double angle_deg = 5.0;  // [2, 10] degrees from vertical
    double pitch_m = 2e-6;
    double low = 0.05;   // dark plateau
    double high = 0.95;  // bright plateau
    double noise_sigma = 0.0;  // additive Gaussian, fraction of full scale
    std::uint64_t seed = 1;
    int supersample = 8;  // Gauss-Legendre nodes per pixel axis
};

// Ideal step edge through the image center, convolved with the blur kernel and
// integrated over the square pixel apertures.
EdgeImage render_edge_gaussian(double sigma_px, const EdgeSpec& spec);
EdgeImage render_edge_psf(const PsfGrid& psf, const EdgeSpec& spec);

struct SFRCurve {
    std::vector<double> nu_cyc_px;
    std::vector<double> value;

    double at(double nu) const;  // linear interpolation
};

struct SfrOptions {
    double min_cnr = 20.0;       // contrast-to-noise validity threshold
    double max_extent_px = 16.0; // half-width of the ESF window around the edge
};

// Slanted-edge SFR: per-line centroid edge location, linear edge fit, ESF
// projection binned at 4x oversampling, finite-difference LSF, Hamming window,
// discrete Fourier transform, DC-normalized. The pixel aperture stays in the
// result (raw SFR, no deconvolution).
SFRCurve estimate_sfr(const EdgeImage& img, std::optional<Roi> roi = {},
                      const SfrOptions& opt = {});

}  // namespace wfo
