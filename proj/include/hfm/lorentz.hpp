#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "hfm/autodiff.hpp"
#include "hfm/errors.hpp"

namespace hfm {

// Curvature magnitude of the hyperboloid; the manifold has curvature -kappa.
struct Curvature {
    double kappa;
    explicit Curvature(double k) : kappa(k) {
        if (!std::isfinite(k) || k <= 0.0)
            throw std::invalid_argument("Curvature: kappa must be finite and > 0");
    }
};

// Point on the upper hyperboloid sheet, stored as the full ambient vector
// with the time coordinate first.
struct LorentzPoint {
    std::vector<double> ambient;

    double time() const { return ambient[0]; }
    std::span<const double> space() const {
        return std::span<const double>(ambient).subspan(1);
    }
    std::size_t space_dim() const { return ambient.size() - 1; }
};

// Tangent vector attached to a base point, in ambient coordinates.
struct TangentVector {
    LorentzPoint base;
    std::vector<double> ambient;
};

inline ad::Rev scalar_like(const ad::Rev& proto, double v) {
    return ad::make_rev(*proto.tape, v);
}
inline double scalar_like(double, double v) { return v; }

// Scalar-generic kernels. Instantiated with double for the public API and
// with ad::Rev inside the optimizers, so both paths run the exact same
// arithmetic in the exact same order.
namespace geom {

template <class S>
S lorentz_inner_g(const std::vector<S>& x, const std::vector<S>& y) {
    S acc = -(x[0] * y[0]);
    for (std::size_t i = 1; i < x.size(); ++i) acc = acc + x[i] * y[i];
    return acc;
}

template <class S>
S geodesic_distance_g(const std::vector<S>& x, const std::vector<S>& y, const S& kappa) {
    using std::acosh;
    using std::sqrt;
    using ad::clamp_min;
    using ad::value_of;
    S m = clamp_min(-(kappa * lorentz_inner_g(x, y)), 1.0);
    return acosh(m) / sqrt(kappa);
}

template <class S>
std::vector<S> exp_map_g(const std::vector<S>& base, const std::vector<S>& v,
                         const S& kappa) {
    using std::cosh;
    using std::sinh;
    using std::sqrt;
    using ad::clamp_min;
    using ad::value_of;
    S rsq = clamp_min(lorentz_inner_g(v, v), 0.0);
    S c{};
    S s{};
    // u = sqrt(kappa)*|v|; the sinh(u)/u factor needs its series form near 0
    if (value_of(kappa) * value_of(rsq) < 1e-24) {
        S u2 = kappa * rsq;
        c = 1.0 + u2 * 0.5;
        s = 1.0 + u2 * (1.0 / 6.0);
    } else {
        S u = sqrt(kappa * rsq);
        c = cosh(u);
        s = sinh(u) / u;
    }
    std::vector<S> out;
    out.reserve(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) out.push_back(c * base[i] + s * v[i]);
    return out;
}

template <class S>
std::vector<S> log_map_g(const std::vector<S>& base, const std::vector<S>& x,
                         const S& kappa) {
    using std::acosh;
    using std::sqrt;
    using ad::clamp_min;
    using ad::value_of;
    S m = clamp_min(-(kappa * lorentz_inner_g(base, x)), 1.0);
    S h{};
    // h = acosh(m)/sqrt(m^2-1); series in (m-1) where the quotient degenerates
    if (value_of(m) - 1.0 < 1e-8) {
        S e = m - 1.0;
        h = 1.0 - e * (1.0 / 3.0) + (e * e) * (2.0 / 15.0);
    } else {
        h = acosh(m) / sqrt(m * m - 1.0);
    }
    std::vector<S> out;
    out.reserve(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) out.push_back(h * (x[i] - m * base[i]));
    return out;
}

template <class S>
std::vector<S> tangent_project_g(const std::vector<S>& base, const std::vector<S>& a,
                                 const S& kappa) {
    S c = kappa * lorentz_inner_g(base, a);
    std::vector<S> out;
    out.reserve(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) out.push_back(a[i] + c * base[i]);
    return out;
}

template <class S>
std::vector<S> reproject_g(const std::vector<S>& a, const S& kappa) {
    using std::sqrt;
    S ssq = scalar_like(kappa, 0.0);
    for (std::size_t i = 1; i < a.size(); ++i) ssq = ssq + a[i] * a[i];
    std::vector<S> out = a;
    out[0] = sqrt(1.0 / kappa + ssq);
    return out;
}

template <class S>
std::vector<S> origin_g(std::size_t space_dim, const S& kappa) {
    using std::sqrt;
    std::vector<S> out;
    out.reserve(space_dim + 1);
    out.push_back(1.0 / sqrt(kappa));
    for (std::size_t i = 0; i < space_dim; ++i) out.push_back(scalar_like(kappa, 0.0));
    return out;
}

template <class S>
std::vector<S> interpolate_g(const std::vector<S>& x0, const std::vector<S>& x1,
                             double t, const S& kappa) {
    std::vector<S> v = log_map_g(x0, x1, kappa);
    for (auto& c : v) c = c * t;
    return exp_map_g(x0, v, kappa);
}

} // namespace geom

// Minkowski bilinear form on raw ambient vectors.
double lorentz_inner(std::span<const double> x, std::span<const double> y);
double lorentz_inner(const LorentzPoint& x, const LorentzPoint& y);

double geodesic_distance(const LorentzPoint& x, const LorentzPoint& y, Curvature k);

LorentzPoint lorentz_origin(std::size_t space_dim, Curvature k);

// Embeds a Euclidean feature as (0, scale*f), a tangent vector at the origin.
TangentVector lift_to_tangent_at_origin(std::span<const double> feature, double scale,
                                        Curvature k);

LorentzPoint exp_map(const TangentVector& v, Curvature k);
TangentVector log_map(const LorentzPoint& base, const LorentzPoint& x, Curvature k);
TangentVector tangent_project(const LorentzPoint& base, std::span<const double> ambient,
                              Curvature k);
LorentzPoint geodesic_interpolate(const LorentzPoint& x0, const LorentzPoint& x1,
                                  double t, Curvature k);
LorentzPoint reproject_to_manifold(std::span<const double> ambient, Curvature k);

// |<x,x>_L + 1/kappa|, zero for points exactly on the sheet.
double manifold_residual(const LorentzPoint& x, Curvature k);
// sqrt of the (clamped) Minkowski norm; positive definite on tangent spaces.
double tangent_norm(const TangentVector& v);
// |<base, v>_L|, zero for vectors exactly tangent at their base.
double tangency_residual(const TangentVector& v);

} // namespace hfm
