#include "wfo/system.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace wfo {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt6 = 2.449489742783178;

double interp_table(const std::vector<double>& xs, const std::vector<double>& ys, double x,
                    const char* what) {
    if (xs.empty()) return 0.0;
    if (x < xs.front() - 1e-12 || x > xs.back() + 1e-12) {
        throw DomainError("field angle " + std::to_string(x) + " deg outside the " + what +
                          " table [" + std::to_string(xs.front()) + ", " +
                          std::to_string(xs.back()) + "]");
    }
    if (xs.size() == 1) return ys.front();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    size_t hi = std::min(static_cast<size_t>(it - xs.begin()), xs.size() - 1);
    if (hi == 0) hi = 1;
    const size_t lo = hi - 1;
    const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + t * (ys[hi] - ys[lo]);
}

}  // namespace

void LensModel::validate() const {
    if (!(f_m > 0.0)) throw InputError("focal length must be positive");
    if (!(f_number > 0.0)) throw InputError("f-number must be positive");
    for (size_t i = 0; i < field_curvature.size(); ++i) {
        if (!std::isfinite(field_curvature[i].dz_m)) {
            throw InputError("non-finite field curvature offset");
        }
        if (i > 0 && field_curvature[i].field_deg <= field_curvature[i - 1].field_deg) {
            throw InputError("field curvature table must be sorted by field angle");
        }
    }
}

double LensModel::dz_fc(double field_deg) const {
    std::vector<double> xs, ys;
    xs.reserve(field_curvature.size());
    for (const auto& p : field_curvature) {
        xs.push_back(p.field_deg);
        ys.push_back(p.dz_m);
    }
    return interp_table(xs, ys, field_deg, "field curvature");
}

void WindscreenModel::validate() const {
    if (patches.empty()) throw InputError("windscreen model carries no patches");
    for (size_t i = 0; i < patches.size(); ++i) {
        if (!std::isfinite(patches[i].dh_dpt) || !std::isfinite(patches[i].dv_dpt)) {
            throw InputError("non-finite windscreen refractive power");
        }
        if (i > 0 && patches[i].field_deg <= patches[i - 1].field_deg) {
            throw InputError("windscreen patches must be sorted by field angle");
        }
    }
}

double WindscreenModel::power_dpt(double field_deg, Orientation o) const {
    validate();
    std::vector<double> xs, ys;
    xs.reserve(patches.size());
    for (const auto& p : patches) {
        xs.push_back(p.field_deg);
        ys.push_back(o == Orientation::horizontal ? p.dh_dpt : p.dv_dpt);
    }
    return interp_table(xs, ys, field_deg, "windscreen cutout");
}

double windscreen_defocus(double d_ws_dpt, const LensModel& lens) {
    lens.validate();
    if (!std::isfinite(d_ws_dpt)) throw InputError("non-finite windscreen power");
    const double df = std::abs(d_ws_dpt * lens.f_m);
    if (df > 0.1) {
        throw ApproximationValidityError(
            "|D_ws * f| = " + std::to_string(df) +
            " exceeds 0.1; the first-order thin-element shift no longer applies");
    }
    return -lens.f_m * lens.f_m * d_ws_dpt;
}

SystemOffset combined_offset(const LensModel& lens, const WindscreenModel* ws, double field_deg,
                             Orientation o) {
    lens.validate();
    SystemOffset off;
    off.dz_fc_m = lens.dz_fc(field_deg);
    off.dz_ws_m = ws != nullptr ? windscreen_defocus(ws->power_dpt(field_deg, o), lens) : 0.0;
    return off;
}

double defocus_to_c4(double dz_m, const LensModel& lens) {
    lens.validate();
    return dz_m / (16.0 * kSqrt3 * lens.f_number * lens.f_number);
}

double c4_to_defocus(double c4_m, const LensModel& lens) {
    lens.validate();
    return c4_m * 16.0 * kSqrt3 * lens.f_number * lens.f_number;
}

ZernikeCoefficients system_coefficients(const LensModel& lens, const WindscreenModel* ws,
                                        double field_deg) {
    const double dz_h = combined_offset(lens, ws, field_deg, Orientation::horizontal).dz_m();
    const double dz_v = combined_offset(lens, ws, field_deg, Orientation::vertical).dz_m();
    const double n2 = lens.f_number * lens.f_number;
    ZernikeCoefficients c;
    c.set(4, (dz_h + dz_v) / (32.0 * kSqrt3 * n2));
    c.set(5, (dz_h - dz_v) / (16.0 * kSqrt6 * n2));
    return c;
}

MTFCurve system_mtf(const LensModel& lens, const WindscreenModel* ws, double field_deg,
                    Orientation o, double lambda_m, std::span<const double> k_cyc_m,
                    const MtfOptions& opt) {
    const SystemOffset off = combined_offset(lens, ws, field_deg, o);
    const double c4 = defocus_to_c4(off.dz_m(), lens);
    const Vec2 dir = o == Orientation::horizontal ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
    return mtf_mono(ZernikeCoefficients::single(4, c4), lens.pupil(), lambda_m, k_cyc_m, dir, opt);
}

SeparabilityReport separability_report(const LensModel& lens, const WindscreenModel& ws,
                                       double field_deg, Orientation o, double lambda_m,
                                       const MtfOptions& opt, double ref_frequency_frac) {
    const PupilSpec pupil = lens.pupil();
    const double k_c = cutoff_frequency(pupil, lambda_m);
    const std::vector<double> ks = frequency_axis(pupil, lambda_m, 65, 1.0);
    const Vec2 dir = o == Orientation::horizontal ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};

    SeparabilityReport rep;
    rep.offset = combined_offset(lens, &ws, field_deg, o);
    rep.joint = system_mtf(lens, &ws, field_deg, o, lambda_m, ks, opt);
    rep.lens_only = system_mtf(lens, nullptr, field_deg, o, lambda_m, ks, opt);
    const double c4_ws = defocus_to_c4(rep.offset.dz_ws_m, lens);
    rep.ws_only =
        mtf_mono(ZernikeCoefficients::single(4, c4_ws), pupil, lambda_m, ks, dir, opt);

    rep.ratio.assign(ks.size(), std::numeric_limits<double>::quiet_NaN());
    rep.max_ratio_deviation = 0.0;
    for (size_t i = 0; i < ks.size(); ++i) {
        const double product = rep.lens_only.value[i] * rep.ws_only.value[i];
        if (product > 1e-9) {
            rep.ratio[i] = rep.joint.value[i] / product;
            if (ks[i] < 0.8 * k_c) {
                rep.max_ratio_deviation =
                    std::max(rep.max_ratio_deviation, std::abs(rep.ratio[i] - 1.0));
            }
        }
    }
    rep.separable = rep.max_ratio_deviation <= 0.05;
    if (!(ref_frequency_frac > 0.0) || ref_frequency_frac >= 1.0) {
        throw InputError("reference frequency fraction must lie in (0, 1)");
    }
    rep.k_ref = ref_frequency_frac * k_c;
    rep.joint_at_ref = rep.joint.at(rep.k_ref);
    rep.lens_at_ref = rep.lens_only.at(rep.k_ref);
    rep.ws_at_ref = rep.ws_only.at(rep.k_ref);
    return rep;
}

}  // namespace wfo
