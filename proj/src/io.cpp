#include "wfo/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace wfo {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "' for reading");
    return in;
}

[[noreturn]] void parse_fail(const std::string& path, size_t line, const std::string& what) {
    throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

bool parse_double(const std::string& s, double& out) {
    try {
        size_t pos = 0;
        out = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

// Shared scaffolding for the "# key=value" metadata + header + rows layout.
struct CsvReader {
    std::string path;
    std::map<std::string, double> metadata;
    std::vector<std::vector<double>> rows;
    std::vector<size_t> row_lines;

    CsvReader(const std::string& p, const std::string& expected_header, size_t n_fields)
        : path(p) {
        std::ifstream in = open_in(p);
        std::string line;
        size_t line_no = 0;
        bool saw_header = false;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (line[0] == '#') {
                const auto eq = line.find('=');
                if (eq != std::string::npos) {
                    std::string key = line.substr(1, eq - 1);
                    key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
                    double v = 0.0;
                    if (parse_double(line.substr(eq + 1), v)) metadata[key] = v;
                }
                continue;
            }
            if (!saw_header) {
                if (line != expected_header) {
                    parse_fail(path, line_no,
                               "expected header '" + expected_header + "', got '" + line + "'");
                }
                saw_header = true;
                continue;
            }
            const auto fields = split_csv(line);
            if (fields.size() != n_fields) {
                parse_fail(path, line_no,
                           "expected " + std::to_string(n_fields) + " fields, got " +
                               std::to_string(fields.size()));
            }
            std::vector<double> row(n_fields);
            for (size_t i = 0; i < n_fields; ++i) {
                if (!parse_double(fields[i], row[i])) {
                    parse_fail(path, line_no, "cannot parse number '" + fields[i] + "'");
                }
            }
            rows.push_back(std::move(row));
            row_lines.push_back(line_no);
        }
        if (!saw_header) parse_fail(path, line_no ? line_no : 1, "missing CSV header");
    }

    double require_meta(const std::string& key) const {
        const auto it = metadata.find(key);
        if (it == metadata.end()) {
            throw ParseError(path + ": missing metadata line '# " + key + "='");
        }
        return it->second;
    }
};

}  // namespace

void write_coefficients_json(const std::string& path, const ZernikeCoefficients& c) {
    json arr = json::array();
    for (int n = 0; n <= c.max_index(); ++n) {
        arr.push_back({{"index", n}, {"value_m", c[n]}});
    }
    std::ofstream out = open_out(path);
    out << arr.dump(2) << "\n";
}

ZernikeCoefficients read_coefficients_json(const std::string& path) {
    std::ifstream in = open_in(path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (!doc.is_array()) throw ParseError(path + ": expected a JSON array of {index, value_m}");
    ZernikeCoefficients c;
    for (const auto& entry : doc) {
        if (!entry.is_object() || !entry.contains("index") || !entry.contains("value_m")) {
            throw ParseError(path + ": each entry needs 'index' and 'value_m'");
        }
        const int idx = entry["index"].get<int>();
        const double v = entry["value_m"].get<double>();
        if (idx < 0) throw ParseError(path + ": negative Zernike index");
        if (!std::isfinite(v)) throw ParseError(path + ": non-finite coefficient value");
        c.set(idx, v);
    }
    return c;
}

void write_wavefront_csv(const std::string& path, const WavefrontMap& w) {
    std::ofstream out = open_out(path);
    out << "# aperture_radius_m=" << fmt(w.aperture_radius_m) << "\n";
    out << "x,y,w_m\n";
    for (int iy = 0; iy < w.ny; ++iy) {
        for (int ix = 0; ix < w.nx; ++ix) {
            if (!w.valid(ix, iy)) continue;
            out << fmt(w.x_at(ix)) << "," << fmt(w.y_at(iy)) << "," << fmt(w.at(ix, iy)) << "\n";
        }
    }
}

namespace {

// Recovers the lattice pitch from scattered sorted coordinates.
double lattice_step(const std::vector<double>& sorted_unique) {
    double step = std::numeric_limits<double>::infinity();
    for (size_t i = 1; i < sorted_unique.size(); ++i) {
        const double d = sorted_unique[i] - sorted_unique[i - 1];
        if (d > 1e-12) step = std::min(step, d);
    }
    return step;
}

}  // namespace

WavefrontMap read_wavefront_csv(const std::string& path) {
    CsvReader csv(path, "x,y,w_m", 3);
    const double rho_a = csv.require_meta("aperture_radius_m");
    if (!(rho_a > 0.0)) throw ParseError(path + ": aperture_radius_m must be positive");
    if (csv.rows.empty()) throw ParseError(path + ": no samples");

    std::vector<double> xs, ys;
    for (const auto& r : csv.rows) {
        xs.push_back(r[0]);
        ys.push_back(r[1]);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    if (xs.size() < 2 || ys.size() < 2) throw ParseError(path + ": degenerate sample lattice");

    const double step = std::min(lattice_step(xs), lattice_step(ys));
    if (!std::isfinite(step)) throw ParseError(path + ": cannot infer the sample spacing");

    WavefrontMap w;
    w.x0 = xs.front();
    w.y0 = ys.front();
    w.step = step;
    w.nx = static_cast<int>(std::lround((xs.back() - xs.front()) / step)) + 1;
    w.ny = static_cast<int>(std::lround((ys.back() - ys.front()) / step)) + 1;
    w.aperture_radius_m = rho_a;
    if (w.nx <= 0 || w.ny <= 0 || static_cast<long long>(w.nx) * w.ny > 64LL * 1024 * 1024) {
        throw ParseError(path + ": implausible lattice dimensions");
    }
    w.w_m.assign(static_cast<size_t>(w.nx) * w.ny, std::numeric_limits<double>::quiet_NaN());
    for (size_t i = 0; i < csv.rows.size(); ++i) {
        const auto& r = csv.rows[i];
        const double fx = (r[0] - w.x0) / step;
        const double fy = (r[1] - w.y0) / step;
        const long ix = std::lround(fx);
        const long iy = std::lround(fy);
        if (std::abs(fx - ix) > 1e-4 || std::abs(fy - iy) > 1e-4 || ix < 0 || ix >= w.nx ||
            iy < 0 || iy >= w.ny) {
            parse_fail(path, csv.row_lines[i], "sample does not sit on the inferred lattice");
        }
        w.at(static_cast<int>(ix), static_cast<int>(iy)) = r[2];
    }
    return w;
}

void write_gradients_csv(const std::string& path, const GradientField& g) {
    std::ofstream out = open_out(path);
    out << "# f_sh_m=" << fmt(g.f_sh_m) << "\n";
    out << "# aperture_radius_m=" << fmt(g.aperture_radius_m) << "\n";
    out << "x_norm,y_norm,dx_m,dy_m\n";
    for (size_t i = 0; i < g.size(); ++i) {
        out << fmt(g.x_norm[i]) << "," << fmt(g.y_norm[i]) << "," << fmt(g.dx_m[i]) << ","
            << fmt(g.dy_m[i]) << "\n";
    }
}

GradientField read_gradients_csv(const std::string& path) {
    CsvReader csv(path, "x_norm,y_norm,dx_m,dy_m", 4);
    GradientField g;
    g.f_sh_m = csv.require_meta("f_sh_m");
    g.aperture_radius_m = csv.require_meta("aperture_radius_m");
    if (csv.rows.empty()) throw ParseError(path + ": gradient file holds no lenslets");
    for (const auto& r : csv.rows) {
        g.x_norm.push_back(r[0]);
        g.y_norm.push_back(r[1]);
        g.dx_m.push_back(r[2]);
        g.dy_m.push_back(r[3]);
    }
    return g;
}

void write_power_csv(const std::string& path, const RefractivePowerMap& p) {
    std::ofstream out = open_out(path);
    out << "# aperture_radius_m=" << fmt(p.aperture_radius_m) << "\n";
    out << "x,y,Dx_dpt,Dy_dpt,Dxy_dpt\n";
    auto field = [](const std::vector<double>& v, size_t idx) {
        return v.empty() ? std::numeric_limits<double>::quiet_NaN() : v[idx];
    };
    for (int iy = 0; iy < p.ny; ++iy) {
        for (int ix = 0; ix < p.nx; ++ix) {
            const size_t idx = static_cast<size_t>(iy) * p.nx + ix;
            const double dx = field(p.dx_dpt, idx);
            const double dy = field(p.dy_dpt, idx);
            const double dxy = field(p.dxy_dpt, idx);
            if (!std::isfinite(dx) && !std::isfinite(dy) && !std::isfinite(dxy)) continue;
            out << fmt(p.x0 + ix * p.step) << "," << fmt(p.y0 + iy * p.step) << "," << fmt(dx)
                << "," << fmt(dy) << "," << fmt(dxy) << "\n";
        }
    }
}

void write_mtf_csv(const std::string& path, const MTFCurve& curve) {
    std::ofstream out = open_out(path);
    out << "# lambda_m=" << fmt(curve.lambda_m) << "\n";
    out << "# orientation=" << fmt(curve.orientation.x) << ";" << fmt(curve.orientation.y)
        << "\n";
    out << "freq_cyc_per_mm,mtf\n";
    for (size_t i = 0; i < curve.k_cyc_m.size(); ++i) {
        out << fmt(curve.k_cyc_m[i] * 1e-3) << "," << fmt(curve.value[i]) << "\n";
    }
}

SpectralDensity read_psd_csv(const std::string& path) {
    CsvReader csv(path, "lambda_m,weight", 2);
    if (csv.rows.empty()) throw ParseError(path + ": spectral density holds no lines");
    std::vector<std::pair<double, double>> lines;
    for (const auto& r : csv.rows) lines.emplace_back(r[0], r[1]);
    return SpectralDensity::from_lines(lines);
}

void write_sfr_csv(const std::string& path, const SFRCurve& curve) {
    std::ofstream out = open_out(path);
    out << "freq_cyc_per_px,sfr\n";
    for (size_t i = 0; i < curve.nu_cyc_px.size(); ++i) {
        out << fmt(curve.nu_cyc_px[i]) << "," << fmt(curve.value[i]) << "\n";
    }
}

void write_pgm(const std::string& path, const EdgeImage& img, bool ascii) {
    if (img.width <= 0 || img.height <= 0) throw InputError("empty image");
    std::ofstream out = open_out(path);
    out << (ascii ? "P2" : "P5") << "\n";
    out << "# pitch_m=" << fmt(img.pitch_m) << "\n";
    out << img.width << " " << img.height << "\n65535\n";
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double clamped = std::clamp(img.at(x, y), 0.0, 1.0);
            const unsigned v = static_cast<unsigned>(std::lround(clamped * 65535.0));
            if (ascii) {
                out << v << (x + 1 == img.width ? "\n" : " ");
            } else {
                const unsigned char hi = static_cast<unsigned char>(v >> 8);
                const unsigned char lo = static_cast<unsigned char>(v & 0xff);
                out.put(static_cast<char>(hi));
                out.put(static_cast<char>(lo));
            }
        }
    }
}

namespace {

// Token scanner for PGM headers: skips whitespace and '#' comments, but
// harvests a pitch_m metadata comment when present.
struct PgmScanner {
    std::istream& in;
    const std::string& path;
    double pitch_m = 0.0;

    std::string next_token() {
        std::string tok;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string comment;
                std::getline(in, comment);
                const auto eq = comment.find("pitch_m=");
                if (eq != std::string::npos) {
                    double v = 0.0;
                    if (parse_double(comment.substr(eq + 8), v)) pitch_m = v;
                }
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok += c;
        }
        return tok;
    }
};

}  // namespace

EdgeImage read_pgm(const std::string& path) {
    std::ifstream in = open_in(path);
    PgmScanner scan{in, path};
    const std::string magic = scan.next_token();
    if (magic != "P2" && magic != "P5") {
        throw ParseError(path + ": not a PGM file (magic '" + magic + "')");
    }
    auto next_int = [&](const char* what) {
        const std::string tok = scan.next_token();
        double v = 0.0;
        if (tok.empty() || !parse_double(tok, v) || v != std::floor(v)) {
            throw ParseError(path + ": bad " + std::string(what) + " '" + tok + "'");
        }
        return static_cast<long>(v);
    };
    const long width = next_int("width");
    const long height = next_int("height");
    const long maxval = next_int("maxval");
    if (width <= 0 || height <= 0 || width * height > 64L * 1024 * 1024) {
        throw ParseError(path + ": implausible image dimensions");
    }
    if (maxval <= 0 || maxval > 65535) throw ParseError(path + ": unsupported maxval");

    EdgeImage img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.pitch_m = scan.pitch_m;
    img.v.resize(static_cast<size_t>(width) * height);

    if (magic == "P2") {
        for (size_t i = 0; i < img.v.size(); ++i) {
            const long v = next_int("pixel");
            if (v < 0 || v > maxval) throw ParseError(path + ": pixel value out of range");
            img.v[i] = static_cast<double>(v) / maxval;
        }
    } else {
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<char> raw(img.v.size() * bytes);
        in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
        if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
            throw ParseError(path + ": truncated P5 payload");
        }
        for (size_t i = 0; i < img.v.size(); ++i) {
            unsigned v;
            if (bytes == 2) {
                v = (static_cast<unsigned char>(raw[2 * i]) << 8) |
                    static_cast<unsigned char>(raw[2 * i + 1]);
            } else {
                v = static_cast<unsigned char>(raw[i]);
            }
            if (v > static_cast<unsigned>(maxval)) {
                throw ParseError(path + ": pixel value out of range");
            }
            img.v[i] = static_cast<double>(v) / maxval;
        }
    }
    return img;
}

void write_image_csv(const std::string& path, const EdgeImage& img) {
    std::ofstream out = open_out(path);
    out << "# pitch_m=" << fmt(img.pitch_m) << "\n";
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            out << fmt(img.at(x, y)) << (x + 1 == img.width ? "\n" : ",");
        }
    }
}

EdgeImage read_image_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    size_t line_no = 0;
    double pitch = 0.0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find("pitch_m=");
            if (eq != std::string::npos) {
                double v = 0.0;
                if (parse_double(line.substr(eq + 8), v)) pitch = v;
            }
            continue;
        }
        const auto fields = split_csv(line);
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) {
            double v = 0.0;
            if (!parse_double(f, v)) parse_fail(path, line_no, "cannot parse number '" + f + "'");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            parse_fail(path, line_no, "ragged raster row");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path + ": empty raster");
    EdgeImage img;
    img.width = static_cast<int>(rows.front().size());
    img.height = static_cast<int>(rows.size());
    img.pitch_m = pitch;
    img.v.reserve(static_cast<size_t>(img.width) * img.height);
    for (const auto& row : rows) img.v.insert(img.v.end(), row.begin(), row.end());
    return img;
}

EdgeImage read_image(const std::string& path) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".pgm" || ext == ".PGM") return read_pgm(path);
    if (ext == ".csv" || ext == ".CSV") return read_image_csv(path);
    throw InputError("unsupported image extension '" + ext + "' (use .pgm or .csv)");
}

SystemModel read_system_json(const std::string& path) {
    std::ifstream in = open_in(path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    SystemModel model;
    try {
        if (!doc.contains("lens")) throw ParseError(path + ": missing 'lens' object");
        const auto& lens = doc["lens"];
        model.lens.f_m = lens.at("f_m").get<double>();
        model.lens.f_number = lens.at("f_number").get<double>();
        if (lens.contains("field_curvature")) {
            for (const auto& p : lens["field_curvature"]) {
                model.lens.field_curvature.push_back(
                    {p.at("field_deg").get<double>(), p.at("dz_m").get<double>()});
            }
        }
        if (doc.contains("windscreen")) {
            model.has_windscreen = true;
            const auto& ws = doc["windscreen"];
            if (ws.contains("inclination_deg")) {
                model.windscreen.inclination_deg = ws["inclination_deg"].get<double>();
            }
            for (const auto& p : ws.at("patches")) {
                model.windscreen.patches.push_back({p.at("field_deg").get<double>(),
                                                    p.at("Dh_dpt").get<double>(),
                                                    p.at("Dv_dpt").get<double>()});
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    model.lens.validate();
    if (model.has_windscreen) model.windscreen.validate();
    return model;
}

void write_system_json(const std::string& path, const SystemModel& model) {
    json doc;
    doc["lens"] = {{"f_m", model.lens.f_m}, {"f_number", model.lens.f_number}};
    json fc = json::array();
    for (const auto& p : model.lens.field_curvature) {
        fc.push_back({{"field_deg", p.field_deg}, {"dz_m", p.dz_m}});
    }
    doc["lens"]["field_curvature"] = fc;
    if (model.has_windscreen) {
        json patches = json::array();
        for (const auto& p : model.windscreen.patches) {
            patches.push_back(
                {{"field_deg", p.field_deg}, {"Dh_dpt", p.dh_dpt}, {"Dv_dpt", p.dv_dpt}});
        }
        doc["windscreen"] = {{"patches", patches},
                             {"inclination_deg", model.windscreen.inclination_deg}};
    }
    std::ofstream out = open_out(path);
    out << doc.dump(2) << "\n";
}

}  // namespace wfo
