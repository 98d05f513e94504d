#pragma once

#include <functional>
#include <vector>

#include "wfo/errors.hpp"
#include "wfo/util.hpp"
#include "wfo/wavefront_map.hpp"

namespace wfo {

// Closed forms are shipped for ANSI indices 0..9 (up to third radial order).
inline constexpr int kZernikeMaxIndex = 9;

struct DiskPoint {
    double x = 0.0;
    double y = 0.0;

    static DiskPoint polar(double rho, double phi) {
        return {rho * std::cos(phi), rho * std::sin(phi)};
    }
    double rho() const { return std::hypot(x, y); }
    double phi() const { return std::atan2(y, x); }
};

void require_in_disk(const DiskPoint& p);
void require_supported_index(int n);

// Z_n at a point of the closed unit disk, ANSI linear indexing, ISO 24157
// normalization (sqrt(3), sqrt(6), sqrt(8) prefactors). Cartesian forms are
// canonical; the polar forms are equivalent.
double zernike_eval(int n, const DiskPoint& p);

// Analytic (dZ/dx, dZ/dy) with respect to normalized coordinates.
Vec2 zernike_gradient(int n, const DiskPoint& p);

// True iff Z_n satisfies the Laplace equation; {0,1,2,3,5,6,9} qualify.
bool zernike_is_harmonic(int n);

class ZernikeCoefficients {
public:
    ZernikeCoefficients() = default;
    explicit ZernikeCoefficients(std::vector<double> values_m);

    static ZernikeCoefficients single(int index, double value_m);

    int max_index() const { return static_cast<int>(values_.size()) - 1; }
    // Reads beyond the stored range return 0 (absent term).
    double operator[](int n) const {
        return (n >= 0 && n < static_cast<int>(values_.size())) ? values_[n] : 0.0;
    }
    void set(int index, double value_m);
    const std::vector<double>& values() const { return values_; }
    bool empty() const { return values_.empty(); }

private:
    std::vector<double> values_;  // meters
};

using DiskFunction = std::function<double(double x, double y)>;

DiskFunction zernike_function(int n);

// Tensor-product rule for integrals over the unit disk: Gauss-Legendre in rho
// (the rho Jacobian absorbed into the weights) x uniform nodes in phi. Exact
// for the polynomial integrands arising from products of the shipped basis.
struct DiskQuadrature {
    int n_radial = 64;
    int n_azimuthal = 128;
};

double inner_product(const DiskFunction& f, const DiskFunction& g, const DiskQuadrature& q = {});

// As inner_product, but re-evaluates on a refined rule and throws AccuracyError
// (carrying the estimated residual) if the two disagree beyond tol.
double inner_product_checked(const DiskFunction& f, const DiskFunction& g,
                             const DiskQuadrature& q = {}, double tol = 1e-9);

// Gauss-Legendre nodes/weights on [-1,1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

struct DecomposeResult {
    ZernikeCoefficients coefficients;
    double residual_rms_m = 0.0;  // RMS of the map minus its projection
};

// Projects a sampled map onto Z_0..Z_max_index. The continuum projection is
// <W,Z_n>/pi; on the sample lattice the basis Gram matrix replaces pi*I so the
// discretized basis's residual cross-talk does not leak between coefficients.
DecomposeResult decompose(const WavefrontMap& w, int max_index);

// Pointwise sum of c_n Z_n on an n x n disk grid spanning [-1,1]^2.
WavefrontMap synthesize(const ZernikeCoefficients& c, int grid_n, double aperture_radius_m);

// Sum at a single normalized point (no disk check; used for tile placement).
double synthesize_at(const ZernikeCoefficients& c, double x, double y);

}  // namespace wfo
