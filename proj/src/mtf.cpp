#include "wfo/mtf.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numeric>
#include <string>

namespace wfo {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

void validate_pupil(const PupilSpec& p) {
    if (!(p.radius_m > 0.0)) throw InputError("pupil radius must be positive");
    if (!(p.z_ao_m > 0.0)) throw InputError("aperture-to-observer distance must be positive");
}

void validate_coefficients(const ZernikeCoefficients& c) {
    if (c.max_index() > kZernikeMaxIndex) require_supported_index(c.max_index());
}

// fftw planning mutates global planner state; execution itself is thread-safe.
std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

struct OverlapRaster {
    // Rotated frame: the pupil copies sit at -+shift on the x' axis.
    double radius;
    double shift;
    double cell;
    int n;
    int aa;

    double coverage(double cx, double cy) const {
        const double half_diag = 0.7071067811865476 * cell;
        const double d_plus = radius - std::hypot(cx + shift, cy);
        const double d_minus = radius - std::hypot(cx - shift, cy);
        const double d = std::min(d_plus, d_minus);
        if (d > half_diag) return 1.0;
        if (d < -half_diag) return 0.0;
        int inside = 0;
        for (int sy = 0; sy < aa; ++sy) {
            const double y = cy + cell * ((sy + 0.5) / aa - 0.5);
            for (int sx = 0; sx < aa; ++sx) {
                const double x = cx + cell * ((sx + 0.5) / aa - 0.5);
                if (std::hypot(x + shift, y) <= radius && std::hypot(x - shift, y) <= radius) {
                    ++inside;
                }
            }
        }
        return static_cast<double>(inside) / (aa * aa);
    }
};

double overlap_modulus(const ZernikeCoefficients& c, const PupilSpec& pupil, double lambda_m,
                       double k, Vec2 u, const MtfOptions& opt, double pupil_area_cells) {
    const double radius = pupil.radius_m;
    const double shift = 0.5 * lambda_m * pupil.z_ao_m * k;
    if (shift >= radius) return 0.0;

    const int n = opt.raster_n;
    const double cell = 2.0 * radius / n;
    OverlapRaster raster{radius, shift, cell, n, opt.aa_subsamples};

    const Vec2 perp{-u.y, u.x};
    const double phase_scale = kTwoPi / lambda_m;
    bool aberrated = false;
    for (int m = 1; m <= c.max_index(); ++m) {
        if (c[m] != 0.0) aberrated = true;
    }
    const double sx = shift * u.x;
    const double sy = shift * u.y;

    double acc_re = 0.0, acc_im = 0.0;
    for (int iy = 0; iy < n; ++iy) {
        const double cy = -radius + (iy + 0.5) * cell;
        for (int ix = 0; ix < n; ++ix) {
            const double cx = -radius + (ix + 0.5) * cell;
            // The overlap lives in the slab |x'| <= radius - shift.
            if (std::abs(cx) > radius - shift + cell) continue;
            const double w = raster.coverage(cx, cy);
            if (w == 0.0) continue;
            if (!aberrated) {
                acc_re += w;
                continue;
            }
            // Back to lab coordinates; Zernike arguments on the unit disk.
            // The piston term cancels in the difference.
            const double lx = cx * u.x + cy * perp.x;
            const double ly = cx * u.y + cy * perp.y;
            const double diff = synthesize_at(c, (lx + sx) / radius, (ly + sy) / radius) -
                                synthesize_at(c, (lx - sx) / radius, (ly - sy) / radius);
            const double phase = phase_scale * diff;
            acc_re += w * std::cos(phase);
            acc_im += w * std::sin(phase);
        }
    }
    return std::hypot(acc_re, acc_im) / pupil_area_cells;
}

double pupil_area_in_cells(const PupilSpec& pupil, const MtfOptions& opt) {
    const int n = opt.raster_n;
    const double cell = 2.0 * pupil.radius_m / n;
    OverlapRaster raster{pupil.radius_m, 0.0, cell, n, opt.aa_subsamples};
    double area = 0.0;
    for (int iy = 0; iy < n; ++iy) {
        const double cy = -pupil.radius_m + (iy + 0.5) * cell;
        for (int ix = 0; ix < n; ++ix) {
            const double cx = -pupil.radius_m + (ix + 0.5) * cell;
            area += raster.coverage(cx, cy);
        }
    }
    return area;
}

}  // namespace

SpectralDensity SpectralDensity::from_lines(const std::vector<std::pair<double, double>>& lines) {
    if (lines.empty()) throw InputError("empty spectral density");
    SpectralDensity psd;
    double total = 0.0;
    for (const auto& [lambda, w] : lines) {
        if (!(lambda > 0.0)) throw InputError("spectral line wavelength must be positive");
        if (w < 0.0) throw InputError("spectral weight must be non-negative");
        psd.lambda_m.push_back(lambda);
        psd.weight.push_back(w);
        total += w;
    }
    if (!(total > 0.0)) throw InputError("spectral density has zero total weight");
    for (double& w : psd.weight) w /= total;
    return psd;
}

void SpectralDensity::validate() const {
    if (lambda_m.empty() || lambda_m.size() != weight.size()) {
        throw InputError("empty or inconsistent spectral density");
    }
    double total = 0.0;
    for (size_t i = 0; i < lambda_m.size(); ++i) {
        if (!(lambda_m[i] > 0.0)) throw InputError("spectral line wavelength must be positive");
        if (weight[i] < 0.0) throw InputError("spectral weight must be non-negative");
        total += weight[i];
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw InputError("spectral density weights must sum to 1 (got " + std::to_string(total) +
                         ")");
    }
}

double MTFCurve::at(double k) const {
    if (k_cyc_m.empty()) throw InputError("empty MTF curve");
    if (k <= k_cyc_m.front()) return value.front();
    if (k >= k_cyc_m.back()) return value.back();
    const auto it = std::upper_bound(k_cyc_m.begin(), k_cyc_m.end(), k);
    const size_t hi = static_cast<size_t>(it - k_cyc_m.begin());
    const size_t lo = hi - 1;
    const double t = (k - k_cyc_m[lo]) / (k_cyc_m[hi] - k_cyc_m[lo]);
    return value[lo] + t * (value[hi] - value[lo]);
}

double cutoff_frequency(const PupilSpec& pupil, double lambda_m) {
    validate_pupil(pupil);
    if (!(lambda_m > 0.0)) throw InputError("wavelength must be positive");
    return 2.0 * pupil.radius_m / (lambda_m * pupil.z_ao_m);
}

std::vector<double> frequency_axis(const PupilSpec& pupil, double lambda_m, int n_samples,
                                   double max_fraction) {
    if (n_samples < 2) throw InputError("frequency axis needs at least 2 samples");
    const double k_max = max_fraction * cutoff_frequency(pupil, lambda_m);
    std::vector<double> ks(n_samples);
    for (int i = 0; i < n_samples; ++i) ks[i] = k_max * i / (n_samples - 1);
    return ks;
}

MTFCurve mtf_mono(const ZernikeCoefficients& c, const PupilSpec& pupil, double lambda_m,
                  std::span<const double> k_cyc_m, Vec2 orientation, const MtfOptions& opt) {
    validate_pupil(pupil);
    validate_coefficients(c);
    if (!(lambda_m > 0.0)) throw InputError("wavelength must be positive");
    if (opt.raster_n < 64) {
        throw AccuracyError("pupil raster of " + std::to_string(opt.raster_n) +
                                " cells across the diameter is too coarse",
                            1.0 / std::max(1, opt.raster_n));
    }
    if (opt.aa_subsamples < 1) throw InputError("aa_subsamples must be >= 1");

    const Vec2 u = normalized(orientation);
    const double area = pupil_area_in_cells(pupil, opt);

    MTFCurve curve;
    curve.orientation = u;
    curve.lambda_m = lambda_m;
    curve.k_cyc_m.assign(k_cyc_m.begin(), k_cyc_m.end());
    curve.value.reserve(k_cyc_m.size());
    for (double k : k_cyc_m) {
        if (!(k >= 0.0) || !std::isfinite(k)) throw InputError("spatial frequencies must be finite and >= 0");
        curve.value.push_back(overlap_modulus(c, pupil, lambda_m, k, u, opt, area));
    }
    return curve;
}

MTFCurve mtf_poly(const ZernikeCoefficients& c, const PupilSpec& pupil,
                  const SpectralDensity& psd, std::span<const double> k_cyc_m, Vec2 orientation,
                  const MtfOptions& opt) {
    psd.validate();
    MTFCurve total;
    total.orientation = normalized(orientation);
    total.lambda_m = 0.0;
    total.k_cyc_m.assign(k_cyc_m.begin(), k_cyc_m.end());
    total.value.assign(k_cyc_m.size(), 0.0);
    for (size_t i = 0; i < psd.lambda_m.size(); ++i) {
        if (psd.weight[i] == 0.0) continue;
        const MTFCurve mono = mtf_mono(c, pupil, psd.lambda_m[i], k_cyc_m, orientation, opt);
        for (size_t j = 0; j < total.value.size(); ++j) {
            total.value[j] += psd.weight[i] * mono.value[j];
        }
    }
    return total;
}

PsfGrid psf_from_pupil(const ZernikeCoefficients& c, const PupilSpec& pupil, double lambda_m,
                       const PsfOptions& opt) {
    validate_pupil(pupil);
    validate_coefficients(c);
    if (!(lambda_m > 0.0)) throw InputError("wavelength must be positive");
    if (opt.pupil_samples < 32) throw InputError("pupil raster too coarse for a PSF");
    if (opt.pad_factor < 4) {
        throw AliasingError("pupil embedding factor " + std::to_string(opt.pad_factor) +
                            " < 4 risks wraparound in the PSF");
    }

    const int np = opt.pupil_samples;
    const int n = np * opt.pad_factor;
    const double cell = 2.0 * pupil.radius_m / np;
    const double phase_scale = kTwoPi / lambda_m;

    std::vector<std::complex<double>> field(static_cast<size_t>(n) * n, {0.0, 0.0});
    for (int iy = 0; iy < n; ++iy) {
        const double y = (iy - n / 2 + 0.5) * cell;
        if (std::abs(y) > pupil.radius_m) continue;
        for (int ix = 0; ix < n; ++ix) {
            const double x = (ix - n / 2 + 0.5) * cell;
            if (x * x + y * y > pupil.radius_m * pupil.radius_m) continue;
            const double w = synthesize_at(c, x / pupil.radius_m, y / pupil.radius_m);
            const double phase = phase_scale * w;
            field[static_cast<size_t>(iy) * n + ix] = {std::cos(phase), std::sin(phase)};
        }
    }

    std::vector<std::complex<double>> spectrum(field.size());
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_plan plan = fftw_plan_dft_2d(n, n, reinterpret_cast<fftw_complex*>(field.data()),
                                          reinterpret_cast<fftw_complex*>(spectrum.data()),
                                          FFTW_FORWARD, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }

    PsfGrid psf;
    psf.n = n;
    psf.lambda_m = lambda_m;
    psf.pupil = pupil;
    psf.pupil_samples = np;
    psf.sample_spacing_m = lambda_m * pupil.z_ao_m / (n * cell);
    psf.intensity.resize(field.size());

    // fftshift so the unaberrated peak sits near the grid center.
    double total = 0.0;
    for (int iy = 0; iy < n; ++iy) {
        const int sy = (iy + n / 2) % n;
        for (int ix = 0; ix < n; ++ix) {
            const int sx = (ix + n / 2) % n;
            const double inten = std::norm(spectrum[static_cast<size_t>(sy) * n + sx]);
            psf.intensity[static_cast<size_t>(iy) * n + ix] = inten;
            total += inten;
        }
    }
    if (!(total > 0.0)) throw InputError("empty pupil produced a null PSF");
    for (double& v : psf.intensity) v /= total;
    return psf;
}

MTFCurve mtf_from_psf(const PsfGrid& psf, GridAxis axis) {
    const int n = psf.n;
    std::vector<std::complex<double>> in(psf.intensity.size());
    for (size_t i = 0; i < in.size(); ++i) in[i] = {psf.intensity[i], 0.0};
    std::vector<std::complex<double>> otf(in.size());
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_plan plan = fftw_plan_dft_2d(n, n, reinterpret_cast<fftw_complex*>(in.data()),
                                          reinterpret_cast<fftw_complex*>(otf.data()),
                                          FFTW_FORWARD, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }

    const double dc = std::abs(otf[0]);
    const double dk = 1.0 / (n * psf.sample_spacing_m);
    // The OTF support ends at j = pupil_samples (the autocorrelation width).
    const int j_max = std::min(n / 2, psf.pupil_samples + psf.pupil_samples / 8);

    MTFCurve curve;
    curve.lambda_m = psf.lambda_m;
    curve.orientation = axis == GridAxis::x ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
    for (int j = 0; j <= j_max; ++j) {
        const size_t idx = axis == GridAxis::x ? static_cast<size_t>(j)
                                               : static_cast<size_t>(j) * n;
        curve.k_cyc_m.push_back(j * dk);
        curve.value.push_back(std::abs(otf[idx]) / dc);
    }
    return curve;
}

}  // namespace wfo
