// wfo: wavefront-optics metrology pipelines with file-based CSV/JSON I/O.
//
// Exit codes: 0 ok, 2 input/parse, 3 numerical/degenerate, 4 measurement
// validity. Failures emit one machine-readable JSON line on stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "wfo/io.hpp"
#include "wfo/mtf.hpp"
#include "wfo/sfr.hpp"
#include "wfo/system.hpp"
#include "wfo/wavefront.hpp"
#include "wfo/zernike.hpp"

namespace {

using nlohmann::json;

void emit_error(const std::string& kind, const std::string& message) {
    json err = {{"error", {{"kind", kind}, {"message", message}}}};
    std::cerr << err.dump() << "\n";
}

void emit_info(const json& info) { std::cout << info.dump() << "\n"; }

wfo::Orientation parse_orientation(const std::string& s) {
    if (s == "h" || s == "horizontal") return wfo::Orientation::horizontal;
    if (s == "v" || s == "vertical") return wfo::Orientation::vertical;
    throw wfo::InputError("orientation must be 'h' or 'v', got '" + s + "'");
}

struct MtfArgs {
    std::string input;
    std::string system_path;
    std::string psd_path;
    std::string output;
    double f_mm = 0.0;
    double f_number = 2.0;
    double aperture_radius_mm = 0.0;
    double z_mm = 0.0;
    double lambda_nm = 550.0;
    double field_deg = 0.0;
    std::string orientation = "h";
    int samples = 65;
    double max_freq_frac = 1.0;
    int raster = 512;
};

wfo::PupilSpec pupil_from_args(const MtfArgs& a) {
    wfo::PupilSpec pupil;
    if (a.f_mm > 0.0) {
        pupil.radius_m = a.f_mm * 1e-3 / (2.0 * a.f_number);
        pupil.z_ao_m = a.f_mm * 1e-3;
    }
    if (a.aperture_radius_mm > 0.0) pupil.radius_m = a.aperture_radius_mm * 1e-3;
    if (a.z_mm > 0.0) pupil.z_ao_m = a.z_mm * 1e-3;
    if (!(pupil.radius_m > 0.0) || !(pupil.z_ao_m > 0.0)) {
        throw wfo::InputError("pupil geometry required: pass --f-mm (with --f-number) or "
                              "--aperture-radius-mm plus --z-mm");
    }
    return pupil;
}

void run_mtf(const MtfArgs& a) {
    const double lambda = a.lambda_nm * 1e-9;
    wfo::MtfOptions opt;
    opt.raster_n = a.raster;

    if (!a.system_path.empty()) {
        const wfo::SystemModel model = wfo::read_system_json(a.system_path);
        const std::vector<double> ks =
            wfo::frequency_axis(model.lens.pupil(), lambda, a.samples, a.max_freq_frac);
        const wfo::MTFCurve curve =
            wfo::system_mtf(model.lens, model.has_windscreen ? &model.windscreen : nullptr,
                            a.field_deg, parse_orientation(a.orientation), lambda, ks, opt);
        wfo::write_mtf_csv(a.output, curve);
        const wfo::SystemOffset off =
            wfo::combined_offset(model.lens, model.has_windscreen ? &model.windscreen : nullptr,
                                 a.field_deg, parse_orientation(a.orientation));
        emit_info({{"dz_ws_m", off.dz_ws_m},
                   {"dz_fc_m", off.dz_fc_m},
                   {"dz_m", off.dz_m()},
                   {"cutoff_cyc_per_mm",
                    wfo::cutoff_frequency(model.lens.pupil(), lambda) * 1e-3}});
        return;
    }

    if (a.input.empty()) {
        throw wfo::InputError("mtf needs --input coefficients or --system model");
    }
    const wfo::ZernikeCoefficients c = wfo::read_coefficients_json(a.input);
    const wfo::PupilSpec pupil = pupil_from_args(a);
    const std::vector<double> ks = wfo::frequency_axis(pupil, lambda, a.samples, a.max_freq_frac);
    const wfo::Vec2 dir = parse_orientation(a.orientation) == wfo::Orientation::horizontal
                              ? wfo::Vec2{1.0, 0.0}
                              : wfo::Vec2{0.0, 1.0};
    wfo::MTFCurve curve;
    if (!a.psd_path.empty()) {
        const wfo::SpectralDensity psd = wfo::read_psd_csv(a.psd_path);
        curve = wfo::mtf_poly(c, pupil, psd, ks, dir, opt);
    } else {
        curve = wfo::mtf_mono(c, pupil, lambda, ks, dir, opt);
    }
    wfo::write_mtf_csv(a.output, curve);
    emit_info({{"cutoff_cyc_per_mm", wfo::cutoff_frequency(pupil, lambda) * 1e-3}});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wavefront-optics metrology: Zernike decomposition, Shack-Hartmann "
                 "reconstruction, refractive power, MTF and slanted-edge SFR"};
    app.require_subcommand(1);

    // --- decompose ---
    auto* cmd_dec = app.add_subcommand("decompose", "wavefront CSV -> Zernike coefficients JSON");
    std::string dec_in, dec_out;
    int dec_max_index = 9;
    cmd_dec->add_option("--input", dec_in, "wavefront map CSV")->required();
    cmd_dec->add_option("--output", dec_out, "coefficients JSON")->required();
    cmd_dec->add_option("--max-index", dec_max_index, "highest ANSI index to project onto");

    // --- reconstruct ---
    auto* cmd_rec = app.add_subcommand("reconstruct",
                                       "Shack-Hartmann gradients CSV -> coefficients JSON");
    std::string rec_in, rec_out;
    int rec_max_index = 9;
    cmd_rec->add_option("--input", rec_in, "gradient field CSV")->required();
    cmd_rec->add_option("--output", rec_out, "coefficients JSON")->required();
    cmd_rec->add_option("--max-index", rec_max_index, "highest ANSI index to solve for");

    // --- refpower ---
    auto* cmd_pow = app.add_subcommand("refpower", "wavefront CSV -> refractive power map CSV");
    std::string pow_in, pow_out;
    cmd_pow->add_option("--input", pow_in, "wavefront map CSV")->required();
    cmd_pow->add_option("--output", pow_out, "power map CSV")->required();

    // --- mtf ---
    auto* cmd_mtf = app.add_subcommand("mtf", "coefficients JSON or system JSON -> MTF CSV");
    MtfArgs mtf_args;
    cmd_mtf->add_option("--input", mtf_args.input, "coefficients JSON");
    cmd_mtf->add_option("--system", mtf_args.system_path, "system model JSON");
    cmd_mtf->add_option("--psd", mtf_args.psd_path, "spectral density CSV (polychromatic)");
    cmd_mtf->add_option("--output", mtf_args.output, "MTF CSV")->required();
    cmd_mtf->add_option("--f-mm", mtf_args.f_mm, "focal length in mm (sets radius and z)");
    cmd_mtf->add_option("--f-number", mtf_args.f_number, "f-number used with --f-mm");
    cmd_mtf->add_option("--aperture-radius-mm", mtf_args.aperture_radius_mm, "pupil radius");
    cmd_mtf->add_option("--z-mm", mtf_args.z_mm, "aperture-to-observer distance");
    cmd_mtf->add_option("--lambda-nm", mtf_args.lambda_nm, "wavelength (default 550)");
    cmd_mtf->add_option("--field-deg", mtf_args.field_deg, "field angle for --system runs");
    cmd_mtf->add_option("--orientation", mtf_args.orientation, "h or v");
    cmd_mtf->add_option("--samples", mtf_args.samples, "frequency samples");
    cmd_mtf->add_option("--max-freq-frac", mtf_args.max_freq_frac, "axis end as fraction of k_c");
    cmd_mtf->add_option("--raster", mtf_args.raster, "pupil raster cells across the diameter");

    // --- system-mtf ---
    auto* cmd_sys = app.add_subcommand("system-mtf",
                                       "system JSON -> joint MTF CSV and separability report");
    MtfArgs sys_args;
    std::string sys_report;
    cmd_sys->add_option("--system", sys_args.system_path, "system model JSON")->required();
    cmd_sys->add_option("--output", sys_args.output, "joint MTF CSV")->required();
    cmd_sys->add_option("--report", sys_report, "separability report CSV");
    cmd_sys->add_option("--field-deg", sys_args.field_deg, "field angle");
    cmd_sys->add_option("--orientation", sys_args.orientation, "h or v");
    cmd_sys->add_option("--lambda-nm", sys_args.lambda_nm, "wavelength (default 550)");
    cmd_sys->add_option("--samples", sys_args.samples, "frequency samples");
    cmd_sys->add_option("--raster", sys_args.raster, "pupil raster cells across the diameter");

    // --- sfr ---
    auto* cmd_sfr = app.add_subcommand("sfr", "slanted-edge image -> SFR CSV + summary");
    std::string sfr_in, sfr_out, sfr_roi;
    double sfr_ref = 0.25;
    cmd_sfr->add_option("--input", sfr_in, "edge image (.pgm or .csv raster)")->required();
    cmd_sfr->add_option("--output", sfr_out, "SFR CSV")->required();
    cmd_sfr->add_option("--roi", sfr_roi, "x0,y0,w,h (default: whole image)");
    cmd_sfr->add_option("--ref-freq", sfr_ref, "summary frequency in cyc/px (default 0.25)");

    // --- render-edge ---
    auto* cmd_edge = app.add_subcommand("render-edge", "synthesize a slanted-edge image");
    std::string edge_out, edge_coeffs;
    double edge_sigma = -1.0;
    wfo::EdgeSpec edge_spec;
    double edge_pitch_um = 2.0;
    double edge_lambda_nm = 550.0;
    double edge_f_mm = 6.0;
    double edge_f_number = 2.0;
    bool edge_ascii = false;
    bool edge_seed_given = false;
    cmd_edge->add_option("--output", edge_out, "PGM (or .csv raster) path")->required();
    cmd_edge->add_option("--sigma-px", edge_sigma, "gaussian blur sigma in pixels");
    cmd_edge->add_option("--coeffs", edge_coeffs, "coefficients JSON for a pupil-model PSF");
    cmd_edge->add_option("--angle-deg", edge_spec.angle_deg, "edge angle from vertical [2,10]");
    cmd_edge->add_option("--width", edge_spec.width, "image width px");
    cmd_edge->add_option("--height", edge_spec.height, "image height px");
    cmd_edge->add_option("--pitch-um", edge_pitch_um, "pixel pitch in micrometers");
    cmd_edge->add_option("--low", edge_spec.low, "dark plateau level");
    cmd_edge->add_option("--high", edge_spec.high, "bright plateau level");
    cmd_edge->add_option("--noise", edge_spec.noise_sigma, "gaussian noise sigma (full scale)");
    cmd_edge->add_option("--seed", edge_spec.seed, "RNG seed (required when --noise > 0)")
        ->each([&edge_seed_given](const std::string&) { edge_seed_given = true; });
    cmd_edge->add_option("--lambda-nm", edge_lambda_nm, "wavelength for the PSF route");
    cmd_edge->add_option("--f-mm", edge_f_mm, "focal length for the PSF route");
    cmd_edge->add_option("--f-number", edge_f_number, "f-number for the PSF route");
    cmd_edge->add_flag("--ascii", edge_ascii, "write ASCII P2 instead of binary P5");

    // --- demo-blindspot ---
    auto* cmd_demo = app.add_subcommand(
        "demo-blindspot", "trace vs blur-ellipse proxy per Zernike mode -> report CSV");
    std::string demo_out;
    double demo_coeff_um = 0.5;
    double demo_radius_mm = 50.0;
    int demo_grid = 129;
    cmd_demo->add_option("--output", demo_out, "report CSV")->required();
    cmd_demo->add_option("--coeff-um", demo_coeff_um, "mode amplitude in micrometers");
    cmd_demo->add_option("--aperture-radius-mm", demo_radius_mm, "aperture radius");
    cmd_demo->add_option("--grid", demo_grid, "samples across the aperture");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("parse", e.what());
        return 2;
    }

    try {
        if (cmd_dec->parsed()) {
            const wfo::WavefrontMap w = wfo::read_wavefront_csv(dec_in);
            const wfo::DecomposeResult res = wfo::decompose(w, dec_max_index);
            wfo::write_coefficients_json(dec_out, res.coefficients);
            emit_info({{"residual_rms_m", res.residual_rms_m}});
        } else if (cmd_rec->parsed()) {
            const wfo::GradientField g = wfo::read_gradients_csv(rec_in);
            const wfo::ReconstructionResult res = wfo::reconstruct(g, rec_max_index);
            wfo::write_coefficients_json(rec_out, res.coefficients);
            emit_info({{"residual_rms", res.residual_rms},
                       {"gramian_condition", res.gramian_condition},
                       {"unobservable_indices", {0, 1, 2, 3}}});
        } else if (cmd_pow->parsed()) {
            const wfo::WavefrontMap w = wfo::read_wavefront_csv(pow_in);
            wfo::write_power_csv(pow_out, wfo::refractive_power(w));
        } else if (cmd_mtf->parsed()) {
            run_mtf(mtf_args);
        } else if (cmd_sys->parsed()) {
            const wfo::SystemModel model = wfo::read_system_json(sys_args.system_path);
            const double lambda = sys_args.lambda_nm * 1e-9;
            wfo::MtfOptions opt;
            opt.raster_n = sys_args.raster;
            const wfo::Orientation o = parse_orientation(sys_args.orientation);
            const std::vector<double> ks =
                wfo::frequency_axis(model.lens.pupil(), lambda, sys_args.samples, 1.0);
            const wfo::MTFCurve joint =
                wfo::system_mtf(model.lens, model.has_windscreen ? &model.windscreen : nullptr,
                                sys_args.field_deg, o, lambda, ks, opt);
            wfo::write_mtf_csv(sys_args.output, joint);
            json info = {{"cutoff_cyc_per_mm",
                          wfo::cutoff_frequency(model.lens.pupil(), lambda) * 1e-3}};
            if (!sys_report.empty()) {
                if (!model.has_windscreen) {
                    throw wfo::InputError("separability report needs a windscreen in the model");
                }
                const wfo::SeparabilityReport rep = wfo::separability_report(
                    model.lens, model.windscreen, sys_args.field_deg, o, lambda, opt);
                std::ofstream out(sys_report, std::ios::binary);
                if (!out) throw wfo::InputError("cannot open '" + sys_report + "' for writing");
                out << "freq_cyc_per_mm,joint,lens_only,ws_only,ratio\n";
                char buf[160];
                for (size_t i = 0; i < rep.joint.k_cyc_m.size(); ++i) {
                    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g,%.12g\n",
                                  rep.joint.k_cyc_m[i] * 1e-3, rep.joint.value[i],
                                  rep.lens_only.value[i], rep.ws_only.value[i], rep.ratio[i]);
                    out << buf;
                }
                info["separable"] = rep.separable;
                info["max_ratio_deviation"] = rep.max_ratio_deviation;
                info["k_ref_cyc_per_mm"] = rep.k_ref * 1e-3;
                info["joint_at_ref"] = rep.joint_at_ref;
                info["lens_at_ref"] = rep.lens_at_ref;
                info["ws_at_ref"] = rep.ws_at_ref;
                info["dz_ws_m"] = rep.offset.dz_ws_m;
                info["dz_fc_m"] = rep.offset.dz_fc_m;
            }
            emit_info(info);
        } else if (cmd_sfr->parsed()) {
            const wfo::EdgeImage img = wfo::read_image(sfr_in);
            std::optional<wfo::Roi> roi;
            if (!sfr_roi.empty()) {
                wfo::Roi r;
                if (std::sscanf(sfr_roi.c_str(), "%d,%d,%d,%d", &r.x0, &r.y0, &r.w, &r.h) != 4) {
                    throw wfo::InputError("--roi expects x0,y0,w,h");
                }
                roi = r;
            }
            const wfo::SFRCurve curve = wfo::estimate_sfr(img, roi);
            wfo::write_sfr_csv(sfr_out, curve);
            emit_info({{"ref_freq_cyc_px", sfr_ref}, {"sfr_at_ref", curve.at(sfr_ref)}});
        } else if (cmd_edge->parsed()) {
            if (edge_spec.noise_sigma > 0.0 && !edge_seed_given) {
                throw wfo::InputError("--seed is required when --noise > 0 (reproducibility)");
            }
            edge_spec.pitch_m = edge_pitch_um * 1e-6;
            wfo::EdgeImage img;
            if (!edge_coeffs.empty()) {
                const wfo::ZernikeCoefficients c = wfo::read_coefficients_json(edge_coeffs);
                wfo::PupilSpec pupil{edge_f_mm * 1e-3 / (2.0 * edge_f_number), edge_f_mm * 1e-3};
                const wfo::PsfGrid psf = wfo::psf_from_pupil(c, pupil, edge_lambda_nm * 1e-9);
                img = wfo::render_edge_psf(psf, edge_spec);
            } else if (edge_sigma >= 0.0) {
                img = wfo::render_edge_gaussian(edge_sigma, edge_spec);
            } else {
                throw wfo::InputError("render-edge needs --sigma-px or --coeffs");
            }
            if (edge_out.size() > 4 && edge_out.substr(edge_out.size() - 4) == ".csv") {
                wfo::write_image_csv(edge_out, img);
            } else {
                wfo::write_pgm(edge_out, img, edge_ascii);
            }
        } else if (cmd_demo->parsed()) {
            const double rho_a = demo_radius_mm * 1e-3;
            const double amp = demo_coeff_um * 1e-6;
            std::ofstream out(demo_out, std::ios::binary);
            if (!out) throw wfo::InputError("cannot open '" + demo_out + "' for writing");
            out << "index,harmonic,max_abs_trace_dpt,median_det_dpt2,max_abs_det_dpt2\n";
            for (int n = 0; n <= wfo::kZernikeMaxIndex; ++n) {
                const wfo::WavefrontMap w =
                    wfo::synthesize(wfo::ZernikeCoefficients::single(n, amp), demo_grid, rho_a);
                const wfo::GridMap trace = wfo::laplace_trace(w);
                const wfo::GridMap det = wfo::blur_ellipse_proxy(w);
                double max_trace = 0.0, max_det = 0.0;
                std::vector<double> dets;
                for (size_t i = 0; i < trace.v.size(); ++i) {
                    if (std::isfinite(trace.v[i])) {
                        max_trace = std::max(max_trace, std::abs(trace.v[i]));
                    }
                    if (std::isfinite(det.v[i])) {
                        max_det = std::max(max_det, std::abs(det.v[i]));
                        dets.push_back(det.v[i]);
                    }
                }
                double median_det = 0.0;
                if (!dets.empty()) {
                    std::nth_element(dets.begin(), dets.begin() + dets.size() / 2, dets.end());
                    median_det = dets[dets.size() / 2];
                }
                char buf[160];
                std::snprintf(buf, sizeof(buf), "%d,%d,%.12g,%.12g,%.12g\n", n,
                              wfo::zernike_is_harmonic(n) ? 1 : 0, max_trace, median_det,
                              max_det);
                out << buf;
            }
        }
    } catch (const wfo::Error& e) {
        emit_error(e.kind(), e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return 1;
    }
    return 0;
}
