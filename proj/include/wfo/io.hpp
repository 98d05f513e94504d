#pragma once

#include <string>

#include "wfo/mtf.hpp"
#include "wfo/sfr.hpp"
#include "wfo/system.hpp"
#include "wfo/wavefront.hpp"
#include "wfo/zernike.hpp"

namespace wfo {

// All writers emit deterministic text (fixed %.12g formatting, '\n' endings):
// identical data produces byte-identical files. Readers throw ParseError with
// the offending file and line on malformed input.

// JSON array of {"index": n, "value_m": c_n}.
void write_coefficients_json(const std::string& path, const ZernikeCoefficients& c);
ZernikeCoefficients read_coefficients_json(const std::string& path);

// CSV "x,y,w_m" with "# aperture_radius_m=" metadata; invalid samples omitted.
void write_wavefront_csv(const std::string& path, const WavefrontMap& w);
WavefrontMap read_wavefront_csv(const std::string& path);

// CSV "x_norm,y_norm,dx_m,dy_m" with "# f_sh_m=" and "# aperture_radius_m=".
void write_gradients_csv(const std::string& path, const GradientField& g);
GradientField read_gradients_csv(const std::string& path);

// CSV "x,y,Dx_dpt,Dy_dpt,Dxy_dpt"; rows with no finite component omitted.
void write_power_csv(const std::string& path, const RefractivePowerMap& p);

// CSV "freq_cyc_per_mm,mtf" with "# lambda_m=" and "# orientation=".
void write_mtf_csv(const std::string& path, const MTFCurve& curve);

// CSV "lambda_m,weight"; weights are normalized to unit sum on read.
SpectralDensity read_psd_csv(const std::string& path);

// CSV "freq_cyc_per_px,sfr".
void write_sfr_csv(const std::string& path, const SFRCurve& curve);

// 16-bit grayscale PGM (binary P5 by default, ASCII P2 on request); intensity
// is clamped to [0,1] and scaled to the 0..65535 range.
void write_pgm(const std::string& path, const EdgeImage& img, bool ascii = false);
EdgeImage read_pgm(const std::string& path);

// CSV raster fallback: "# pitch_m=" metadata, one image row per line.
void write_image_csv(const std::string& path, const EdgeImage& img);
EdgeImage read_image_csv(const std::string& path);

// Reads an image by extension: .pgm or .csv.
EdgeImage read_image(const std::string& path);

struct SystemModel {
    LensModel lens;
    WindscreenModel windscreen;
    bool has_windscreen = false;
};

// JSON {lens:{f_m,f_number,field_curvature:[{field_deg,dz_m}]},
//       windscreen:{patches:[{field_deg,Dh_dpt,Dv_dpt}]}}.
SystemModel read_system_json(const std::string& path);
void write_system_json(const std::string& path, const SystemModel& model);

}  // namespace wfo
