#include "wfo/sfr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "wfo/util.hpp"

namespace wfo {

namespace {

constexpr int kOversample = 4;       // ESF bins per pixel
constexpr double kMarginPx = 20.0;   // required clearance between edge and ROI border

void validate_edge_spec(const EdgeSpec& spec) {
    if (spec.width < 64 || spec.height < 64) {
        throw InputError("edge image must be at least 64x64 pixels");
    }
    if (!(spec.pitch_m > 0.0)) throw InputError("pixel pitch must be positive");
    if (std::abs(spec.angle_deg) < 2.0 || std::abs(spec.angle_deg) > 10.0) {
        throw InputError("edge angle must lie between 2 and 10 degrees from vertical");
    }
    if (spec.supersample < 2) throw InputError("pixel supersampling must be >= 2");
    if (spec.noise_sigma < 0.0) throw InputError("noise sigma must be non-negative");
}

// Renders with an arbitrary edge-spread profile esf(s) where s is the signed
// distance (in pixels) from the edge along its normal.
EdgeImage render_profile(const std::function<double(double)>& esf, const EdgeSpec& spec) {
    validate_edge_spec(spec);

    EdgeImage img;
    img.width = spec.width;
    img.height = spec.height;
    img.pitch_m = spec.pitch_m;
    img.edge_angle_deg = spec.angle_deg;
    img.v.resize(static_cast<size_t>(spec.width) * spec.height);

    const double theta = spec.angle_deg * M_PI / 180.0;
    // Edge runs near-vertically; its normal points towards +x.
    const double nx = std::cos(theta);
    const double ny = -std::sin(theta);
    const double cx = spec.width / 2.0;
    const double cy = spec.height / 2.0;

    std::vector<double> nodes, weights;
    gauss_legendre(spec.supersample, nodes, weights);
    for (double& x : nodes) x *= 0.5;    // [-1,1] -> [-1/2, 1/2]
    for (double& w : weights) w *= 0.5;

    GaussianSampler noise(spec.seed);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            double acc = 0.0;
            for (int sy = 0; sy < spec.supersample; ++sy) {
                const double py = y + 0.5 + nodes[sy] - cy;
                for (int sx = 0; sx < spec.supersample; ++sx) {
                    const double px = x + 0.5 + nodes[sx] - cx;
                    const double s = px * nx + py * ny;
                    acc += weights[sy] * weights[sx] * esf(s);
                }
            }
            double value = spec.low + (spec.high - spec.low) * acc;
            if (spec.noise_sigma > 0.0) value += noise(0.0, spec.noise_sigma);
            img.at(x, y) = value;
        }
    }
    return img;
}

}  // namespace

EdgeImage render_edge_gaussian(double sigma_px, const EdgeSpec& spec) {
    if (sigma_px < 0.0) throw InputError("gaussian sigma must be non-negative");
    if (sigma_px == 0.0) {
        return render_profile([](double s) { return s >= 0.0 ? 1.0 : 0.0; }, spec);
    }
    const double inv = 1.0 / (sigma_px * std::sqrt(2.0));
    return render_profile([inv](double s) { return 0.5 * std::erfc(-s * inv); }, spec);
}

EdgeImage render_edge_psf(const PsfGrid& psf, const EdgeSpec& spec) {
    validate_edge_spec(spec);
    const double psf_extent_m = psf.n * psf.sample_spacing_m;
    if (psf_extent_m > spec.width * spec.pitch_m || psf_extent_m > spec.height * spec.pitch_m) {
        throw DomainError("PSF support (" + std::to_string(psf_extent_m * 1e6) +
                          " um) exceeds the image extent");
    }

    // Project the PSF onto the edge normal and accumulate its line spread at
    // the PSF's native resolution; the running sum is the edge profile.
    const double theta = spec.angle_deg * M_PI / 180.0;
    const double nx = std::cos(theta);
    const double ny = -std::sin(theta);
    const double dx = psf.sample_spacing_m;
    const int bins = 2 * psf.n;
    std::vector<double> lsf(bins, 0.0);
    for (int iy = 0; iy < psf.n; ++iy) {
        const double py = (iy - psf.n / 2) * dx;
        for (int ix = 0; ix < psf.n; ++ix) {
            const double px = (ix - psf.n / 2) * dx;
            const double s = px * nx + py * ny;
            const int bin = static_cast<int>(std::lround(s / dx)) + bins / 2;
            if (bin >= 0 && bin < bins) lsf[bin] += psf.at(ix, iy);
        }
    }
    std::vector<double> cumulative(bins, 0.0);
    std::partial_sum(lsf.begin(), lsf.end(), cumulative.begin());
    const double total = cumulative.back();
    if (!(total > 0.0)) throw InputError("PSF carries no energy");
    for (double& c : cumulative) c /= total;

    const double pitch = spec.pitch_m;
    auto esf = [&cumulative, bins, dx, pitch](double s_px) {
        // cumulative[k] is the ESF at the right edge of bin k.
        const double u = s_px * pitch / dx + bins / 2.0 - 0.5;
        if (u <= 0.0) return 0.0;
        if (u >= bins - 1.0) return 1.0;
        const int k = static_cast<int>(u);
        const double t = u - k;
        return cumulative[k] + t * (cumulative[k + 1] - cumulative[k]);
    };
    return render_profile(esf, spec);
}

double SFRCurve::at(double nu) const {
    if (nu_cyc_px.empty()) throw InputError("empty SFR curve");
    if (nu <= nu_cyc_px.front()) return value.front();
    if (nu >= nu_cyc_px.back()) return value.back();
    const auto it = std::upper_bound(nu_cyc_px.begin(), nu_cyc_px.end(), nu);
    const size_t hi = static_cast<size_t>(it - nu_cyc_px.begin());
    const size_t lo = hi - 1;
    const double t = (nu - nu_cyc_px[lo]) / (nu_cyc_px[hi] - nu_cyc_px[lo]);
    return value[lo] + t * (value[hi] - value[lo]);
}

SFRCurve estimate_sfr(const EdgeImage& img, std::optional<Roi> roi_opt, const SfrOptions& opt) {
    const Roi roi = roi_opt.value_or(Roi{0, 0, img.width, img.height});
    if (roi.x0 < 0 || roi.y0 < 0 || roi.w <= 0 || roi.h <= 0 || roi.x0 + roi.w > img.width ||
        roi.y0 + roi.h > img.height) {
        throw InputError("ROI exceeds the image bounds");
    }
    if (roi.w < 2 * kMarginPx + 4 || roi.h < 32) {
        throw MeasurementValidityError("ROI too small for a slanted-edge analysis");
    }

    // Per-line edge location by derivative centroid, then a linear fit.
    auto centroid_row = [&](int y, double x_min, double x_max) {
        double sum = 0.0, moment = 0.0;
        for (int x = 0; x + 1 < roi.w; ++x) {
            const double pos = x + 1.0;
            if (pos < x_min || pos > x_max) continue;
            const double d = img.at(roi.x0 + x + 1, roi.y0 + y) - img.at(roi.x0 + x, roi.y0 + y);
            sum += d;
            moment += pos * d;
        }
        return sum != 0.0 ? moment / sum : -1.0;
    };

    std::vector<double> xc(roi.h, -1.0);
    for (int y = 0; y < roi.h; ++y) xc[y] = centroid_row(y, 0.0, roi.w);

    auto fit_line = [&](double& slope, double& intercept) {
        double sy = 0, sx = 0, syy = 0, sxy = 0;
        int n = 0;
        for (int y = 0; y < roi.h; ++y) {
            if (xc[y] < 0.0) continue;
            const double yy = y + 0.5;
            sy += yy;
            sx += xc[y];
            syy += yy * yy;
            sxy += yy * xc[y];
            ++n;
        }
        if (n < 8) throw MeasurementValidityError("too few usable lines to locate the edge");
        const double det = n * syy - sy * sy;
        slope = (n * sxy - sy * sx) / det;
        intercept = (sx * syy - sy * sxy) / det;
    };

    double slope = 0.0, intercept = 0.0;
    fit_line(slope, intercept);
    // Refined pass: centroids restricted to a band around the fitted edge.
    for (int y = 0; y < roi.h; ++y) {
        const double predicted = slope * (y + 0.5) + intercept;
        xc[y] = centroid_row(y, predicted - 8.0, predicted + 8.0);
    }
    fit_line(slope, intercept);

    const double angle_deg = std::abs(std::atan(slope)) * 180.0 / M_PI;
    if (angle_deg < 2.0 || angle_deg > 10.0) {
        throw MeasurementValidityError("edge angle " + std::to_string(angle_deg) +
                                       " deg outside the valid 2..10 deg range");
    }
    for (int y = 0; y < roi.h; ++y) {
        const double predicted = slope * (y + 0.5) + intercept;
        if (predicted < kMarginPx || predicted > roi.w - kMarginPx) {
            throw MeasurementValidityError("edge runs closer than 20 px to the ROI border");
        }
    }

    // Contrast-to-noise validity from the two plateaus.
    const double cos_theta = 1.0 / std::sqrt(1.0 + slope * slope);
    double lo_sum = 0, lo_ss = 0, hi_sum = 0, hi_ss = 0;
    size_t lo_n = 0, hi_n = 0;
    for (int y = 0; y < roi.h; ++y) {
        const double edge_x = slope * (y + 0.5) + intercept;
        for (int x = 0; x < roi.w; ++x) {
            const double s = (x + 0.5 - edge_x) * cos_theta;
            const double val = img.at(roi.x0 + x, roi.y0 + y);
            if (s < -6.0) {
                lo_sum += val;
                lo_ss += val * val;
                ++lo_n;
            } else if (s > 6.0) {
                hi_sum += val;
                hi_ss += val * val;
                ++hi_n;
            }
        }
    }
    if (lo_n < 16 || hi_n < 16) {
        throw MeasurementValidityError("plateaus too small beside the edge");
    }
    const double mu_lo = lo_sum / lo_n;
    const double mu_hi = hi_sum / hi_n;
    const double var_lo = std::max(0.0, lo_ss / lo_n - mu_lo * mu_lo);
    const double var_hi = std::max(0.0, hi_ss / hi_n - mu_hi * mu_hi);
    const double noise = std::sqrt(0.5 * (var_lo + var_hi));
    const double contrast = std::abs(mu_hi - mu_lo);
    if (contrast <= 0.0 || (noise > 0.0 && contrast / noise < opt.min_cnr)) {
        throw MeasurementValidityError("contrast-to-noise ratio below " +
                                       std::to_string(opt.min_cnr) + ":1");
    }

    // ESF binned at 4x oversampling along the edge normal.
    const double extent = opt.max_extent_px;
    const int bins = static_cast<int>(2 * extent) * kOversample;
    std::vector<double> esf_sum(bins, 0.0);
    std::vector<int> esf_cnt(bins, 0);
    for (int y = 0; y < roi.h; ++y) {
        const double edge_x = slope * (y + 0.5) + intercept;
        for (int x = 0; x < roi.w; ++x) {
            const double s = (x + 0.5 - edge_x) * cos_theta;
            if (s < -extent || s >= extent) continue;
            const int bin = static_cast<int>((s + extent) * kOversample);
            if (bin >= 0 && bin < bins) {
                esf_sum[bin] += img.at(roi.x0 + x, roi.y0 + y);
                ++esf_cnt[bin];
            }
        }
    }
    // Averages per bin; empty bins interpolated, trailing gaps extended flat.
    std::vector<double> esf(bins, 0.0);
    int first_filled = -1, last_filled = -1;
    for (int b = 0; b < bins; ++b) {
        if (esf_cnt[b] == 0) continue;
        esf[b] = esf_sum[b] / esf_cnt[b];
        if (first_filled < 0) first_filled = b;
        if (last_filled >= 0 && last_filled + 1 < b) {
            for (int k = last_filled + 1; k < b; ++k) {
                const double t = static_cast<double>(k - last_filled) / (b - last_filled);
                esf[k] = esf[last_filled] + t * (esf[b] - esf[last_filled]);
            }
        }
        last_filled = b;
    }
    if (first_filled < 0) throw MeasurementValidityError("no samples fell into the ESF window");
    for (int b = 0; b < first_filled; ++b) esf[b] = esf[first_filled];
    for (int b = last_filled + 1; b < bins; ++b) esf[b] = esf[last_filled];

    // LSF by adjacent differences, Hamming window about the centroid.
    std::vector<double> lsf(bins - 1, 0.0);
    for (int b = 0; b + 1 < bins; ++b) lsf[b] = esf[b + 1] - esf[b];
    double lsum = 0.0, lmom = 0.0;
    for (int b = 0; b < bins - 1; ++b) {
        lsum += lsf[b];
        lmom += b * lsf[b];
    }
    const double center = lsum != 0.0 ? lmom / lsum : (bins - 1) / 2.0;
    const double half_width = (bins - 1) / 2.0;
    for (int b = 0; b < bins - 1; ++b) {
        const double r = (b - center) / half_width;
        lsf[b] *= std::abs(r) <= 1.0 ? 0.54 + 0.46 * std::cos(M_PI * r) : 0.0;
    }

    // DFT of the windowed LSF; the 2-tap derivative response is divided out.
    const double bin_px = 1.0 / kOversample;
    SFRCurve curve;
    const double nu_step = 1.0 / 64.0;
    const int nu_count = static_cast<int>(std::lround(1.25 / nu_step)) + 1;
    double dc = 0.0;
    for (int b = 0; b < bins - 1; ++b) dc += lsf[b];
    if (dc == 0.0) throw MeasurementValidityError("degenerate line spread function");
    for (int j = 0; j < nu_count; ++j) {
        const double nu = j * nu_step;
        double re = 0.0, im = 0.0;
        for (int b = 0; b < bins - 1; ++b) {
            const double x_px = (b + 0.5) * bin_px;
            const double arg = -2.0 * M_PI * nu * x_px;
            re += lsf[b] * std::cos(arg);
            im += lsf[b] * std::sin(arg);
        }
        double v = std::hypot(re, im) / std::abs(dc);
        if (nu > 0.0) {
            const double w = M_PI * nu * bin_px;
            v *= w / std::sin(w);  // finite-difference derivative correction
        }
        curve.nu_cyc_px.push_back(nu);
        curve.value.push_back(v);
    }
    return curve;
}

}  // namespace wfo
