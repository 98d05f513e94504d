#include "wfo/wavefront.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

namespace wfo {

namespace {

constexpr double kDiskTol = 1e-12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGramianConditionLimit = 1e12;

}  // namespace

double beta_from_displacement(double d_m, double f_sh_m) {
    return d_m / std::sqrt(f_sh_m * f_sh_m + d_m * d_m);
}

double displacement_from_beta(double beta, double f_sh_m) {
    if (std::abs(beta) >= 1.0) {
        throw NonphysicalGradientError("wavefront slope |beta| = " + std::to_string(std::abs(beta)) +
                                       " >= 1 cannot be produced by a lenslet");
    }
    return f_sh_m * beta / std::sqrt(1.0 - beta * beta);
}

GradientField sh_forward(const ZernikeCoefficients& c, const std::vector<Vec2>& lenslets_norm,
                         double f_sh_m, double aperture_radius_m) {
    if (lenslets_norm.empty()) throw InputError("no lenslet positions");
    if (!(f_sh_m > 0.0)) throw InputError("lenslet focal length must be positive");
    if (!(aperture_radius_m > 0.0)) throw InputError("aperture radius must be positive");
    if (c.max_index() > kZernikeMaxIndex) require_supported_index(c.max_index());

    GradientField g;
    g.f_sh_m = f_sh_m;
    g.aperture_radius_m = aperture_radius_m;
    g.x_norm.reserve(lenslets_norm.size());

    for (const Vec2& p : lenslets_norm) {
        require_in_disk(DiskPoint{p.x, p.y});
        double bx = 0.0, by = 0.0;
        for (int n = kFirstObservableIndex; n <= c.max_index(); ++n) {
            const double cn = c[n];
            if (cn == 0.0) continue;
            const Vec2 dz = zernike_gradient(n, DiskPoint{p.x, p.y});
            bx += cn * dz.x;
            by += cn * dz.y;
        }
        bx /= aperture_radius_m;
        by /= aperture_radius_m;
        g.x_norm.push_back(p.x);
        g.y_norm.push_back(p.y);
        g.dx_m.push_back(displacement_from_beta(bx, f_sh_m));
        g.dy_m.push_back(displacement_from_beta(by, f_sh_m));
    }

    for (int n = 0; n < kFirstObservableIndex && n <= c.max_index(); ++n) {
        if (c[n] != 0.0) g.low_order_ignored = true;
    }
    return g;
}

namespace {

Eigen::MatrixXd design_matrix(const GradientField& g, int max_index) {
    const int m = static_cast<int>(g.size());
    const int cols = max_index - kFirstObservableIndex + 1;
    Eigen::MatrixXd mat(2 * m, cols);
    for (int i = 0; i < m; ++i) {
        const DiskPoint p{g.x_norm[i], g.y_norm[i]};
        require_in_disk(p);
        for (int j = 0; j < cols; ++j) {
            const Vec2 dz = zernike_gradient(kFirstObservableIndex + j, p);
            mat(i, j) = dz.x;
            mat(m + i, j) = dz.y;
        }
    }
    return mat;
}

}  // namespace

ReconstructionResult reconstruct(const GradientField& g, int max_index) {
    require_supported_index(max_index);
    if (max_index < kFirstObservableIndex) {
        throw InputError("max_index must be at least " + std::to_string(kFirstObservableIndex));
    }
    if (!(g.f_sh_m > 0.0)) throw InputError("lenslet focal length must be positive");
    if (!(g.aperture_radius_m > 0.0)) throw InputError("aperture radius must be positive");

    const int m = static_cast<int>(g.size());
    const int unknowns = max_index - kFirstObservableIndex + 1;
    if (m < unknowns) {
        throw DegenerateLayoutError("only " + std::to_string(m) + " lenslets for " +
                                    std::to_string(unknowns) + " unknown coefficients");
    }

    Eigen::VectorXd beta(2 * m);
    for (int i = 0; i < m; ++i) {
        beta(i) = beta_from_displacement(g.dx_m[i], g.f_sh_m);
        beta(m + i) = beta_from_displacement(g.dy_m[i], g.f_sh_m);
    }

    const Eigen::MatrixXd mat = design_matrix(g, max_index);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    const double cond_m = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    const double gram_cond = cond_m * cond_m;  // cond(M^T M) = cond(M)^2

    if (!(gram_cond < kGramianConditionLimit)) {
        std::string dirs;
        const Eigen::VectorXd null_dir = svd.matrixV().col(sv.size() - 1);
        for (int j = 0; j < null_dir.size(); ++j) {
            if (std::abs(null_dir(j)) > 0.3) {
                if (!dirs.empty()) dirs += ", ";
                dirs += "Z" + std::to_string(kFirstObservableIndex + j);
            }
        }
        throw DegenerateLayoutError("degenerate lenslet layout: Gramian condition " +
                                    std::to_string(gram_cond) +
                                    "; unconstrained mode direction involves " + dirs);
    }

    const Eigen::VectorXd x = svd.solve(beta);

    ReconstructionResult out;
    std::vector<double> coeffs(max_index + 1, 0.0);
    for (int j = 0; j < unknowns; ++j) coeffs[kFirstObservableIndex + j] = g.aperture_radius_m * x(j);
    out.coefficients = ZernikeCoefficients(std::move(coeffs));
    out.residual_rms = std::sqrt((mat * x - beta).squaredNorm() / (2.0 * m));
    out.gramian_condition = gram_cond;
    return out;
}

GradientField detrended(const GradientField& g) {
    if (g.size() == 0) return g;
    double mean_bx = 0.0, mean_by = 0.0;
    std::vector<double> bx(g.size()), by(g.size());
    for (size_t i = 0; i < g.size(); ++i) {
        bx[i] = beta_from_displacement(g.dx_m[i], g.f_sh_m);
        by[i] = beta_from_displacement(g.dy_m[i], g.f_sh_m);
        mean_bx += bx[i];
        mean_by += by[i];
    }
    mean_bx /= static_cast<double>(g.size());
    mean_by /= static_cast<double>(g.size());

    GradientField out = g;
    for (size_t i = 0; i < g.size(); ++i) {
        out.dx_m[i] = displacement_from_beta(bx[i] - mean_bx, g.f_sh_m);
        out.dy_m[i] = displacement_from_beta(by[i] - mean_by, g.f_sh_m);
    }
    return out;
}

void add_displacement_noise(GradientField& g, double sigma_m, std::uint64_t seed) {
    if (sigma_m < 0.0) throw InputError("noise sigma must be non-negative");
    if (sigma_m == 0.0) return;
    GaussianSampler gauss(seed);
    for (size_t i = 0; i < g.size(); ++i) {
        g.dx_m[i] += gauss(0.0, sigma_m);
        g.dy_m[i] += gauss(0.0, sigma_m);
    }
}

RefractivePowerMap refractive_power(const WavefrontMap& w, PowerAxes axes) {
    if (w.nx < 3 || w.ny < 3) throw ResolutionError("refractive power needs at least 3x3 samples");
    const double h = w.sample_spacing_m();
    if (!(h > 0.0)) throw InputError("wavefront map has no physical sample spacing");

    RefractivePowerMap out;
    out.nx = w.nx;
    out.ny = w.ny;
    out.x0 = w.x0;
    out.y0 = w.y0;
    out.step = w.step;
    out.aperture_radius_m = w.aperture_radius_m;
    const size_t total = static_cast<size_t>(w.nx) * w.ny;
    const bool want_x = axes == PowerAxes::x || axes == PowerAxes::all;
    const bool want_y = axes == PowerAxes::y || axes == PowerAxes::all;
    const bool want_xy = axes == PowerAxes::xy || axes == PowerAxes::all;
    if (want_x) out.dx_dpt.assign(total, kNaN);
    if (want_y) out.dy_dpt.assign(total, kNaN);
    if (want_xy) out.dxy_dpt.assign(total, kNaN);

    const double h2 = h * h;
    for (int iy = 0; iy < w.ny; ++iy) {
        for (int ix = 0; ix < w.nx; ++ix) {
            if (!w.valid(ix, iy)) continue;
            const size_t idx = static_cast<size_t>(iy) * w.nx + ix;
            if (want_x && ix > 0 && ix + 1 < w.nx && w.valid(ix - 1, iy) && w.valid(ix + 1, iy)) {
                out.dx_dpt[idx] =
                    (w.at(ix + 1, iy) - 2.0 * w.at(ix, iy) + w.at(ix - 1, iy)) / h2;
            }
            if (want_y && iy > 0 && iy + 1 < w.ny && w.valid(ix, iy - 1) && w.valid(ix, iy + 1)) {
                out.dy_dpt[idx] =
                    (w.at(ix, iy + 1) - 2.0 * w.at(ix, iy) + w.at(ix, iy - 1)) / h2;
            }
            if (want_xy && ix > 0 && ix + 1 < w.nx && iy > 0 && iy + 1 < w.ny &&
                w.valid(ix + 1, iy + 1) && w.valid(ix + 1, iy - 1) && w.valid(ix - 1, iy + 1) &&
                w.valid(ix - 1, iy - 1)) {
                out.dxy_dpt[idx] = (w.at(ix + 1, iy + 1) - w.at(ix + 1, iy - 1) -
                                    w.at(ix - 1, iy + 1) + w.at(ix - 1, iy - 1)) /
                                   (4.0 * h2);
            }
        }
    }
    return out;
}

DioptricPowerMatrix dioptric_matrix(const WavefrontMap& w, int ix, int iy) {
    if (ix < 1 || ix + 1 >= w.nx || iy < 1 || iy + 1 >= w.ny) {
        throw DomainError("dioptric matrix needs an interior grid point");
    }
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            if (!w.valid(ix + dx, iy + dy)) {
                throw DomainError("dioptric matrix stencil touches invalid samples at (" +
                                  std::to_string(ix) + ", " + std::to_string(iy) + ")");
            }
        }
    }
    const double h2 = w.sample_spacing_m() * w.sample_spacing_m();
    DioptricPowerMatrix d;
    d.dxx = (w.at(ix + 1, iy) - 2.0 * w.at(ix, iy) + w.at(ix - 1, iy)) / h2;
    d.dyy = (w.at(ix, iy + 1) - 2.0 * w.at(ix, iy) + w.at(ix, iy - 1)) / h2;
    d.dxy = (w.at(ix + 1, iy + 1) - w.at(ix + 1, iy - 1) - w.at(ix - 1, iy + 1) +
             w.at(ix - 1, iy - 1)) /
            (4.0 * h2);
    return d;
}

namespace {

GridMap grid_like(const WavefrontMap& w) {
    GridMap m;
    m.nx = w.nx;
    m.ny = w.ny;
    m.x0 = w.x0;
    m.y0 = w.y0;
    m.step = w.step;
    m.aperture_radius_m = w.aperture_radius_m;
    m.v.assign(static_cast<size_t>(w.nx) * w.ny, kNaN);
    return m;
}

}  // namespace

GridMap blur_ellipse_proxy(const WavefrontMap& w) {
    const RefractivePowerMap p = refractive_power(w, PowerAxes::all);
    GridMap out = grid_like(w);
    for (int iy = 0; iy < w.ny; ++iy) {
        for (int ix = 0; ix < w.nx; ++ix) {
            const double a = p.at_x(ix, iy);
            const double c = p.at_y(ix, iy);
            const double b = p.at_xy(ix, iy);
            if (std::isfinite(a) && std::isfinite(b) && std::isfinite(c)) {
                out.at(ix, iy) = a * c - b * b;
            }
        }
    }
    return out;
}

GridMap laplace_trace(const WavefrontMap& w) {
    const RefractivePowerMap p = refractive_power(w, PowerAxes::all);
    GridMap out = grid_like(w);
    for (int iy = 0; iy < w.ny; ++iy) {
        for (int ix = 0; ix < w.nx; ++ix) {
            const double a = p.at_x(ix, iy);
            const double c = p.at_y(ix, iy);
            if (std::isfinite(a) && std::isfinite(c)) out.at(ix, iy) = a + c;
        }
    }
    return out;
}

namespace {

struct NodeSample {
    int tile;
    double value;
};

}  // namespace

StitchResult stitch(const std::vector<TilePlacement>& tiles) {
    if (tiles.empty()) throw InputError("no tiles to stitch");
    const int t_count = static_cast<int>(tiles.size());
    const double step = tiles[0].map.step;
    const double rho_a = tiles[0].map.aperture_radius_m;
    for (const auto& t : tiles) {
        if (std::abs(t.map.step - step) > 1e-12) {
            throw StitchingError("tiles disagree on sample spacing");
        }
        if (std::abs(t.map.aperture_radius_m - rho_a) > 1e-12 * std::max(1.0, rho_a)) {
            throw StitchingError("tiles disagree on the global aperture radius");
        }
    }

    const int ng = static_cast<int>(std::lround(2.0 / step)) + 1;
    WavefrontMap global = WavefrontMap::disk_grid(ng, rho_a);

    // Collect aligned samples per global node.
    std::vector<std::vector<NodeSample>> nodes(static_cast<size_t>(ng) * ng);
    for (int t = 0; t < t_count; ++t) {
        const WavefrontMap& m = tiles[t].map;
        const double gx0 = m.x0 + tiles[t].offset.x;
        const double gy0 = m.y0 + tiles[t].offset.y;
        const double fx = (gx0 - global.x0) / step;
        const double fy = (gy0 - global.y0) / step;
        const long ix0 = std::lround(fx);
        const long iy0 = std::lround(fy);
        if (std::abs(fx - ix0) > 1e-6 || std::abs(fy - iy0) > 1e-6) {
            throw StitchingError("tile " + std::to_string(t) +
                                 " is not aligned with the global sample lattice");
        }
        for (int iy = 0; iy < m.ny; ++iy) {
            const long gy = iy0 + iy;
            if (gy < 0 || gy >= ng) continue;
            for (int ix = 0; ix < m.nx; ++ix) {
                const long gx = ix0 + ix;
                if (gx < 0 || gx >= ng || !m.valid(ix, iy)) continue;
                const double x = global.x_at(static_cast<int>(gx));
                const double y = global.y_at(static_cast<int>(gy));
                if (x * x + y * y > 1.0 + kDiskTol) continue;
                nodes[static_cast<size_t>(gy) * ng + gx].push_back({t, m.at(ix, iy)});
            }
        }
    }

    // Overlap connectivity: a pair of tiles is linked when they share enough
    // samples to pin their relative piston and tilt.
    std::vector<std::vector<int>> pair_count(t_count, std::vector<int>(t_count, 0));
    for (const auto& ns : nodes) {
        for (size_t a = 0; a + 1 < ns.size(); ++a) {
            for (size_t b = a + 1; b < ns.size(); ++b) {
                ++pair_count[ns[a].tile][ns[b].tile];
            }
        }
    }
    std::vector<bool> reached(t_count, false);
    std::queue<int> bfs;
    bfs.push(0);
    reached[0] = true;
    while (!bfs.empty()) {
        const int a = bfs.front();
        bfs.pop();
        for (int b = 0; b < t_count; ++b) {
            const int cnt = pair_count[std::min(a, b)][std::max(a, b)];
            if (!reached[b] && cnt >= 3) {
                reached[b] = true;
                bfs.push(b);
            }
        }
    }
    for (int t = 0; t < t_count; ++t) {
        if (!reached[t]) {
            throw StitchingError("tile " + std::to_string(t) +
                                 " shares no usable overlap with the stitched set");
        }
    }

    // Solve per-tile plane corrections W_t + p_t + a_t x + b_t y on overlaps;
    // tile 0 fixes the gauge.
    Eigen::VectorXd plane = Eigen::VectorXd::Zero(3 * t_count);
    if (t_count > 1) {
        const int u = 3 * (t_count - 1);
        Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(u, u);
        Eigen::VectorXd atb = Eigen::VectorXd::Zero(u);
        std::vector<int> cols;
        std::vector<double> vals;
        for (int gy = 0; gy < ng; ++gy) {
            for (int gx = 0; gx < ng; ++gx) {
                const auto& ns = nodes[static_cast<size_t>(gy) * ng + gx];
                if (ns.size() < 2) continue;
                const double x = global.x_at(gx);
                const double y = global.y_at(gy);
                for (size_t a = 0; a + 1 < ns.size(); ++a) {
                    for (size_t b = a + 1; b < ns.size(); ++b) {
                        cols.clear();
                        vals.clear();
                        if (ns[a].tile != 0) {
                            const int c0 = 3 * (ns[a].tile - 1);
                            cols.insert(cols.end(), {c0, c0 + 1, c0 + 2});
                            vals.insert(vals.end(), {1.0, x, y});
                        }
                        if (ns[b].tile != 0) {
                            const int c0 = 3 * (ns[b].tile - 1);
                            cols.insert(cols.end(), {c0, c0 + 1, c0 + 2});
                            vals.insert(vals.end(), {-1.0, -x, -y});
                        }
                        const double rhs = ns[b].value - ns[a].value;
                        for (size_t i = 0; i < cols.size(); ++i) {
                            atb(cols[i]) += vals[i] * rhs;
                            for (size_t j = 0; j < cols.size(); ++j) {
                                ata(cols[i], cols[j]) += vals[i] * vals[j];
                            }
                        }
                    }
                }
            }
        }
        const Eigen::VectorXd sol = ata.ldlt().solve(atb);
        for (int t = 1; t < t_count; ++t) {
            plane(3 * t) = sol(3 * (t - 1));
            plane(3 * t + 1) = sol(3 * (t - 1) + 1);
            plane(3 * t + 2) = sol(3 * (t - 1) + 2);
        }
    }

    // Blend: average of corrected tile values per node.
    double dev_ss = 0.0;
    size_t dev_n = 0;
    for (int gy = 0; gy < ng; ++gy) {
        for (int gx = 0; gx < ng; ++gx) {
            const auto& ns = nodes[static_cast<size_t>(gy) * ng + gx];
            if (ns.empty()) continue;
            const double x = global.x_at(gx);
            const double y = global.y_at(gy);
            double sum = 0.0;
            for (const auto& s : ns) {
                sum += s.value + plane(3 * s.tile) + plane(3 * s.tile + 1) * x +
                       plane(3 * s.tile + 2) * y;
            }
            const double mean = sum / static_cast<double>(ns.size());
            global.at(gx, gy) = mean;
            if (ns.size() >= 2) {
                for (const auto& s : ns) {
                    const double corrected = s.value + plane(3 * s.tile) +
                                             plane(3 * s.tile + 1) * x + plane(3 * s.tile + 2) * y;
                    dev_ss += (corrected - mean) * (corrected - mean);
                    ++dev_n;
                }
            }
        }
    }

    StitchResult out;
    out.map = std::move(global);
    out.overlap_rms_m = dev_n > 0 ? std::sqrt(dev_ss / static_cast<double>(dev_n)) : 0.0;
    return out;
}

}  // namespace wfo
