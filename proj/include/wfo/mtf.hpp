#pragma once

#include <span>
#include <vector>

#include "wfo/util.hpp"
#include "wfo/zernike.hpp"

namespace wfo {

// Circular aperture stop plus the axial distance from the stop to the
// observer plane; z_ao defaults to the focal length when built from a lens.
struct PupilSpec {
    double radius_m = 0.0;
    double z_ao_m = 0.0;
};

// Discrete spectral lines (lambda, weight) with weights summing to one.
struct SpectralDensity {
    std::vector<double> lambda_m;
    std::vector<double> weight;

    static SpectralDensity from_lines(const std::vector<std::pair<double, double>>& lines);
    void validate() const;  // weights >= 0, sum == 1 within 1e-9
};

struct MTFCurve {
    std::vector<double> k_cyc_m;  // spatial frequency in the image plane
    std::vector<double> value;
    Vec2 orientation{1.0, 0.0};
    double lambda_m = 0.0;  // 0 for polychromatic curves

    double at(double k) const;  // linear interpolation
};

struct MtfOptions {
    int raster_n = 512;      // cells across the pupil diameter
    int aa_subsamples = 8;   // coverage supersampling of boundary cells
};

// Frequency where the shifted pupils stop overlapping: k_c = 2R/(lambda z).
double cutoff_frequency(const PupilSpec& pupil, double lambda_m);

std::vector<double> frequency_axis(const PupilSpec& pupil, double lambda_m, int n_samples,
                                   double max_fraction = 1.0);

// Monochromatic MTF via the shifted-pupil overlap integral: the wavefront
// phasor difference between pupil copies displaced by +-lambda*z*k/2 is summed
// over their intersection and normalized by the pupil area. Zernike arguments
// are normalized by the aperture radius so they stay on the unit disk.
MTFCurve mtf_mono(const ZernikeCoefficients& c, const PupilSpec& pupil, double lambda_m,
                  std::span<const double> k_cyc_m, Vec2 orientation, const MtfOptions& opt = {});

// PSD-weighted quadrature of mtf_mono over the spectral lines.
MTFCurve mtf_poly(const ZernikeCoefficients& c, const PupilSpec& pupil,
                  const SpectralDensity& psd, std::span<const double> k_cyc_m, Vec2 orientation,
                  const MtfOptions& opt = {});

// Image-plane point spread function: squared modulus of the discretely
// Fourier-transformed pupil phasor, normalized to unit sum.
struct PsfGrid {
    int n = 0;                    // samples per axis (pupil_samples * pad_factor)
    double sample_spacing_m = 0;  // image-plane spacing = lambda z / (n * pupil_cell)
    double lambda_m = 0.0;
    PupilSpec pupil;
    int pupil_samples = 0;
    std::vector<double> intensity;  // row-major, unit sum, peak near center

    double at(int ix, int iy) const { return intensity[static_cast<size_t>(iy) * n + ix]; }
};

struct PsfOptions {
    int pupil_samples = 256;
    int pad_factor = 4;  // embedding factor; < 4 risks wraparound and is rejected
};

PsfGrid psf_from_pupil(const ZernikeCoefficients& c, const PupilSpec& pupil, double lambda_m,
                       const PsfOptions& opt = {});

enum class GridAxis { x, y };

// |DFT| of the PSF along one frequency axis, DC-normalized: the second,
// independent route to the MTF used for cross-checking the overlap integral.
MTFCurve mtf_from_psf(const PsfGrid& psf, GridAxis axis);

}  // namespace wfo
