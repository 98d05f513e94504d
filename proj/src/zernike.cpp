#include "wfo/zernike.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace wfo {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt6 = 2.449489742783178;
constexpr double kSqrt8 = 2.8284271247461903;
constexpr double kDiskTol = 1e-12;

double eval_unchecked(int n, double x, double y) {
    switch (n) {
        case 0: return 1.0;
        case 1: return 2.0 * y;
        case 2: return 2.0 * x;
        case 3: return 2.0 * kSqrt6 * x * y;
        case 4: return kSqrt3 * (2.0 * x * x + 2.0 * y * y - 1.0);
        case 5: return kSqrt6 * (x * x - y * y);
        case 6: return kSqrt8 * (3.0 * x * x - y * y) * y;
        case 7: return kSqrt8 * (3.0 * x * x * y + 3.0 * y * y * y - 2.0 * y);
        case 8: return kSqrt8 * (3.0 * x * x * x + 3.0 * x * y * y - 2.0 * x);
        case 9: return kSqrt8 * (x * x - 3.0 * y * y) * x;
        default: return 0.0;
    }
}

Vec2 gradient_unchecked(int n, double x, double y) {
    switch (n) {
        case 0: return {0.0, 0.0};
        case 1: return {0.0, 2.0};
        case 2: return {2.0, 0.0};
        case 3: return {2.0 * kSqrt6 * y, 2.0 * kSqrt6 * x};
        case 4: return {4.0 * kSqrt3 * x, 4.0 * kSqrt3 * y};
        case 5: return {2.0 * kSqrt6 * x, -2.0 * kSqrt6 * y};
        case 6: return {kSqrt8 * 6.0 * x * y, kSqrt8 * 3.0 * (x * x - y * y)};
        case 7: return {kSqrt8 * 6.0 * x * y, kSqrt8 * (3.0 * x * x + 9.0 * y * y - 2.0)};
        case 8: return {kSqrt8 * (9.0 * x * x + 3.0 * y * y - 2.0), kSqrt8 * 6.0 * x * y};
        case 9: return {kSqrt8 * 3.0 * (x * x - y * y), -kSqrt8 * 6.0 * x * y};
        default: return {0.0, 0.0};
    }
}

}  // namespace

void require_in_disk(const DiskPoint& p) {
    if (p.x * p.x + p.y * p.y > 1.0 + kDiskTol) {
        throw DomainError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                          ") lies outside the unit disk");
    }
}

void require_supported_index(int n) {
    if (n < 0 || n > kZernikeMaxIndex) {
        throw UnsupportedOrderError("Zernike index " + std::to_string(n) +
                                    " outside the implemented range 0.." +
                                    std::to_string(kZernikeMaxIndex));
    }
}

double zernike_eval(int n, const DiskPoint& p) {
    require_supported_index(n);
    require_in_disk(p);
    return eval_unchecked(n, p.x, p.y);
}

Vec2 zernike_gradient(int n, const DiskPoint& p) {
    require_supported_index(n);
    require_in_disk(p);
    return gradient_unchecked(n, p.x, p.y);
}

bool zernike_is_harmonic(int n) {
    require_supported_index(n);
    // Laplacians of Z4, Z7, Z8 are 8*sqrt(3), 24*sqrt(8)*y, 24*sqrt(8)*x.
    return n != 4 && n != 7 && n != 8;
}

ZernikeCoefficients::ZernikeCoefficients(std::vector<double> values_m)
    : values_(std::move(values_m)) {
    for (double v : values_) {
        if (!std::isfinite(v)) throw InputError("non-finite Zernike coefficient");
    }
}

ZernikeCoefficients ZernikeCoefficients::single(int index, double value_m) {
    ZernikeCoefficients c;
    c.set(index, value_m);
    return c;
}

void ZernikeCoefficients::set(int index, double value_m) {
    if (index < 0) throw InputError("negative Zernike index");
    if (!std::isfinite(value_m)) throw InputError("non-finite Zernike coefficient");
    if (index >= static_cast<int>(values_.size())) values_.resize(index + 1, 0.0);
    values_[index] = value_m;
}

DiskFunction zernike_function(int n) {
    require_supported_index(n);
    return [n](double x, double y) { return eval_unchecked(n, x, y); };
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Chebyshev-based initial guess, then Newton on P_n.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
}

namespace {

double disk_integral(const DiskFunction& f, const DiskFunction& g, const DiskQuadrature& q) {
    std::vector<double> xs, ws;
    gauss_legendre(q.n_radial, xs, ws);

    std::vector<double> cos_phi(q.n_azimuthal), sin_phi(q.n_azimuthal);
    for (int j = 0; j < q.n_azimuthal; ++j) {
        const double phi = 2.0 * M_PI * j / q.n_azimuthal;
        cos_phi[j] = std::cos(phi);
        sin_phi[j] = std::sin(phi);
    }
    const double w_phi = 2.0 * M_PI / q.n_azimuthal;

    double acc = 0.0;
    for (int i = 0; i < q.n_radial; ++i) {
        const double rho = 0.5 * (xs[i] + 1.0);
        const double w_rho = 0.5 * ws[i] * rho;  // Jacobian absorbed
        double ring = 0.0;
        for (int j = 0; j < q.n_azimuthal; ++j) {
            const double x = rho * cos_phi[j];
            const double y = rho * sin_phi[j];
            ring += f(x, y) * g(x, y);
        }
        acc += w_rho * ring * w_phi;
    }
    return acc;
}

}  // namespace

double inner_product(const DiskFunction& f, const DiskFunction& g, const DiskQuadrature& q) {
    if (q.n_radial < 1 || q.n_azimuthal < 1) throw InputError("empty quadrature rule");
    return disk_integral(f, g, q);
}

double inner_product_checked(const DiskFunction& f, const DiskFunction& g,
                             const DiskQuadrature& q, double tol) {
    const double coarse = inner_product(f, g, q);
    const DiskQuadrature refined{q.n_radial + q.n_radial / 2, q.n_azimuthal + q.n_azimuthal / 2};
    const double fine = inner_product(f, g, refined);
    const double residual = std::abs(fine - coarse);
    if (residual > tol) {
        throw AccuracyError("disk quadrature did not converge (estimated residual " +
                                std::to_string(residual) + ")",
                            residual);
    }
    return fine;
}

DecomposeResult decompose(const WavefrontMap& w, int max_index) {
    require_supported_index(max_index);
    if (std::min(w.nx, w.ny) < 64) {
        throw ResolutionError("wavefront map must carry at least 64 samples across the "
                              "aperture for decomposition, got " +
                              std::to_string(std::min(w.nx, w.ny)));
    }

    const int terms = max_index + 1;
    std::vector<double> zx(terms);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(terms, terms);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(terms);

    size_t used = 0;
    for (int iy = 0; iy < w.ny; ++iy) {
        const double y = w.y_at(iy);
        for (int ix = 0; ix < w.nx; ++ix) {
            const double x = w.x_at(ix);
            if (!w.valid(ix, iy) || x * x + y * y > 1.0 + kDiskTol) continue;
            ++used;
            for (int n = 0; n < terms; ++n) zx[n] = eval_unchecked(n, x, y);
            const double wv = w.at(ix, iy);
            for (int i = 0; i < terms; ++i) {
                rhs(i) += wv * zx[i];
                for (int j = i; j < terms; ++j) gram(i, j) += zx[i] * zx[j];
            }
        }
    }
    if (used < static_cast<size_t>(8 * terms)) {
        throw ResolutionError("too few valid in-disk samples (" + std::to_string(used) +
                              ") to project onto " + std::to_string(terms) + " modes");
    }
    gram = gram.selfadjointView<Eigen::Upper>();

    Eigen::VectorXd c = gram.ldlt().solve(rhs);

    double ss = 0.0;
    for (int iy = 0; iy < w.ny; ++iy) {
        const double y = w.y_at(iy);
        for (int ix = 0; ix < w.nx; ++ix) {
            const double x = w.x_at(ix);
            if (!w.valid(ix, iy) || x * x + y * y > 1.0 + kDiskTol) continue;
            double fit = 0.0;
            for (int n = 0; n < terms; ++n) fit += c(n) * eval_unchecked(n, x, y);
            const double r = w.at(ix, iy) - fit;
            ss += r * r;
        }
    }

    DecomposeResult out;
    out.coefficients = ZernikeCoefficients(std::vector<double>(c.data(), c.data() + terms));
    out.residual_rms_m = std::sqrt(ss / static_cast<double>(used));
    return out;
}

WavefrontMap WavefrontMap::disk_grid(int n, double aperture_radius_m) {
    WavefrontMap m;
    m.nx = m.ny = n;
    m.x0 = m.y0 = -1.0;
    m.step = 2.0 / (n - 1);
    m.aperture_radius_m = aperture_radius_m;
    m.w_m.assign(static_cast<size_t>(n) * n, std::numeric_limits<double>::quiet_NaN());
    return m;
}

WavefrontMap synthesize(const ZernikeCoefficients& c, int grid_n, double aperture_radius_m) {
    if (grid_n < 2) throw InputError("synthesis grid needs at least 2 samples per axis");
    if (!(aperture_radius_m > 0.0)) throw InputError("aperture radius must be positive");
    if (c.max_index() > kZernikeMaxIndex) require_supported_index(c.max_index());

    WavefrontMap m = WavefrontMap::disk_grid(grid_n, aperture_radius_m);
    for (int iy = 0; iy < grid_n; ++iy) {
        const double y = m.y_at(iy);
        for (int ix = 0; ix < grid_n; ++ix) {
            const double x = m.x_at(ix);
            if (x * x + y * y > 1.0 + kDiskTol) continue;
            m.at(ix, iy) = synthesize_at(c, x, y);
        }
    }
    return m;
}

double synthesize_at(const ZernikeCoefficients& c, double x, double y) {
    double acc = 0.0;
    for (int n = 0; n <= c.max_index(); ++n) {
        const double cn = c[n];
        if (cn != 0.0) acc += cn * eval_unchecked(n, x, y);
    }
    return acc;
}

}  // namespace wfo
