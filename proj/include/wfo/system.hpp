#pragma once

#include <vector>

#include "wfo/mtf.hpp"

namespace wfo {

enum class Orientation { horizontal, vertical };

struct FieldCurvePoint {
    double field_deg = 0.0;
    double dz_m = 0.0;
};

struct LensModel {
    double f_m = 6e-3;
    double f_number = 2.0;
    // Best-focus offset over field; empty list means a flat field.
    std::vector<FieldCurvePoint> field_curvature;

    double aperture_radius_m() const { return f_m / (2.0 * f_number); }
    PupilSpec pupil() const { return {aperture_radius_m(), f_m}; }
    double dz_fc(double field_deg) const;  // linear interpolation over the table
    void validate() const;
};

struct WindscreenPatch {
    double field_deg = 0.0;
    double dh_dpt = 0.0;  // horizontal refractive power
    double dv_dpt = 0.0;  // vertical refractive power
};

struct WindscreenModel {
    std::vector<WindscreenPatch> patches;
    // Mounting inclination; recorded as metadata (the inclination-dependent
    // power amplification enters through the patch values themselves).
    double inclination_deg = 0.0;

    double power_dpt(double field_deg, Orientation o) const;
    void validate() const;
};

struct SystemOffset {
    double dz_ws_m = 0.0;
    double dz_fc_m = 0.0;
    double dz_m() const { return dz_ws_m + dz_fc_m; }
};

// First-order focus shift of a weak plano element in front of the lens:
// dz_ws = -f^2 * D. Positive (converging) power shortens the focus, pulling
// the best-focus plane towards the lens. Rejected when |D*f| > 0.1.
double windscreen_defocus(double d_ws_dpt, const LensModel& lens);

// dz = dz_ws + dz_fc; a null windscreen contributes zero.
SystemOffset combined_offset(const LensModel& lens, const WindscreenModel* ws, double field_deg,
                             Orientation o);

// Paraxial defocus <-> ANSI defocus coefficient: c4 = dz / (16*sqrt(3)*N^2).
double defocus_to_c4(double dz_m, const LensModel& lens);
double c4_to_defocus(double c4_m, const LensModel& lens);

// Joint c4+c5 representation of an astigmatic focus offset pair (horizontal,
// vertical); the per-azimuth route below is what the slanted-edge style
// two-orientation analysis uses.
ZernikeCoefficients system_coefficients(const LensModel& lens, const WindscreenModel* ws,
                                        double field_deg);

// Per-orientation system MTF: combined offset -> c4 -> shifted-pupil integral.
MTFCurve system_mtf(const LensModel& lens, const WindscreenModel* ws, double field_deg,
                    Orientation o, double lambda_m, std::span<const double> k_cyc_m,
                    const MtfOptions& opt = {});

struct SeparabilityReport {
    MTFCurve joint;      // lens + windscreen
    MTFCurve lens_only;  // windscreen absent
    MTFCurve ws_only;    // windscreen defocus alone on the same pupil geometry
    std::vector<double> ratio;  // joint / (lens * ws); NaN where the product vanishes
    double max_ratio_deviation = 0.0;  // max |ratio - 1| for k < 0.8 k_c
    bool separable = true;             // deviation stays within 0.05
    double k_ref = 0.0;                // reference frequency
    double joint_at_ref = 0.0;
    double lens_at_ref = 0.0;
    double ws_at_ref = 0.0;
    SystemOffset offset;
};

// Tests the linear-system-theory factorization MTF_joint = MTF_lens * MTF_ws
// pointwise. A joint value above the lens-only value at the reference
// frequency can never arise from multiplication by a ws curve <= 1.
// The reference frequency defaults to 0.02 k_c: low enough that the default
// lens's through-focus MTF stays on its first, monotone lobe over the whole
// |dz| <= 100 um range (the first null crosses the reference point at
// roughly 0.027 k_c for 100 um).
SeparabilityReport separability_report(const LensModel& lens, const WindscreenModel& ws,
                                       double field_deg, Orientation o, double lambda_m,
                                       const MtfOptions& opt = {}, double ref_frequency_frac = 0.02);

}  // namespace wfo
