#include "hfm/lorentz.hpp"

#include <algorithm>
#include <cmath>

namespace hfm {

namespace {

constexpr double kOnManifoldTol = 1e-6;
constexpr double kTangencyTol = 1e-6;

void check_dims(std::span<const double> x, std::span<const double> y, const char* who) {
    if (x.size() != y.size())
        throw std::invalid_argument(std::string(who) + ": mismatched dimensions");
    if (x.size() < 2)
        throw std::invalid_argument(std::string(who) + ": ambient dimension must be >= 2");
}

void check_finite(std::span<const double> x, const char* who) {
    for (double v : x)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(who) + ": non-finite input");
}

void check_on_manifold(const LorentzPoint& x, Curvature k, const char* who) {
    if (x.ambient.size() < 2)
        throw std::invalid_argument(std::string(who) + ": ambient dimension must be >= 2");
    check_finite(x.ambient, who);
    if (x.time() <= 0.0)
        throw std::invalid_argument(std::string(who) + ": point not on the upper sheet");
    double r = manifold_residual(x, k);
    if (r * k.kappa > kOnManifoldTol)
        throw std::invalid_argument(std::string(who) + ": point off the manifold");
}

} // namespace

double lorentz_inner(std::span<const double> x, std::span<const double> y) {
    check_dims(x, y, "lorentz_inner");
    double acc = -(x[0] * y[0]);
    for (std::size_t i = 1; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

double lorentz_inner(const LorentzPoint& x, const LorentzPoint& y) {
    return lorentz_inner(std::span<const double>(x.ambient),
                         std::span<const double>(y.ambient));
}

double geodesic_distance(const LorentzPoint& x, const LorentzPoint& y, Curvature k) {
    if (x.ambient.size() != y.ambient.size())
        throw std::invalid_argument("geodesic_distance: mismatched dimensions");
    if (x.ambient.size() < 2)
        throw std::invalid_argument("geodesic_distance: ambient dimension must be >= 2");
    return geom::geodesic_distance_g(x.ambient, y.ambient, k.kappa);
}

LorentzPoint lorentz_origin(std::size_t space_dim, Curvature k) {
    if (space_dim < 1)
        throw std::invalid_argument("lorentz_origin: space dimension must be >= 1");
    return LorentzPoint{geom::origin_g(space_dim, k.kappa)};
}

TangentVector lift_to_tangent_at_origin(std::span<const double> feature, double scale,
                                        Curvature k) {
    if (feature.empty())
        throw std::invalid_argument("lift_to_tangent_at_origin: empty feature");
    check_finite(feature, "lift_to_tangent_at_origin");
    if (!std::isfinite(scale))
        throw std::invalid_argument("lift_to_tangent_at_origin: non-finite scale");
    TangentVector v;
    v.base = lorentz_origin(feature.size(), k);
    v.ambient.resize(feature.size() + 1);
    v.ambient[0] = 0.0;
    for (std::size_t i = 0; i < feature.size(); ++i) v.ambient[i + 1] = scale * feature[i];
    return v;
}

LorentzPoint exp_map(const TangentVector& v, Curvature k) {
    check_on_manifold(v.base, k, "exp_map");
    if (v.ambient.size() != v.base.ambient.size())
        throw std::invalid_argument("exp_map: mismatched dimensions");
    check_finite(v.ambient, "exp_map");
    if (tangency_residual(v) > kTangencyTol)
        throw std::invalid_argument("exp_map: vector is not tangent at its base");
    std::vector<double> y = geom::exp_map_g(v.base.ambient, v.ambient, k.kappa);
    return LorentzPoint{geom::reproject_g(y, k.kappa)};
}

TangentVector log_map(const LorentzPoint& base, const LorentzPoint& x, Curvature k) {
    check_on_manifold(base, k, "log_map");
    check_on_manifold(x, k, "log_map");
    if (base.ambient.size() != x.ambient.size())
        throw std::invalid_argument("log_map: mismatched dimensions");
    TangentVector v;
    v.base = base;
    v.ambient = geom::log_map_g(base.ambient, x.ambient, k.kappa);
    return v;
}

TangentVector tangent_project(const LorentzPoint& base, std::span<const double> ambient,
                              Curvature k) {
    check_on_manifold(base, k, "tangent_project");
    if (ambient.size() != base.ambient.size())
        throw std::invalid_argument("tangent_project: mismatched dimensions");
    check_finite(ambient, "tangent_project");
    TangentVector v;
    v.base = base;
    std::vector<double> a(ambient.begin(), ambient.end());
    v.ambient = geom::tangent_project_g(base.ambient, a, k.kappa);
    return v;
}

LorentzPoint geodesic_interpolate(const LorentzPoint& x0, const LorentzPoint& x1,
                                  double t, Curvature k) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("geodesic_interpolate: t outside [0, 1]");
    check_on_manifold(x0, k, "geodesic_interpolate");
    check_on_manifold(x1, k, "geodesic_interpolate");
    if (x0.ambient.size() != x1.ambient.size())
        throw std::invalid_argument("geodesic_interpolate: mismatched dimensions");
    std::vector<double> y = geom::interpolate_g(x0.ambient, x1.ambient, t, k.kappa);
    return LorentzPoint{geom::reproject_g(y, k.kappa)};
}

LorentzPoint reproject_to_manifold(std::span<const double> ambient, Curvature k) {
    if (ambient.size() < 2)
        throw std::invalid_argument("reproject_to_manifold: ambient dimension must be >= 2");
    check_finite(ambient, "reproject_to_manifold");
    std::vector<double> a(ambient.begin(), ambient.end());
    return LorentzPoint{geom::reproject_g(a, k.kappa)};
}

double manifold_residual(const LorentzPoint& x, Curvature k) {
    return std::abs(lorentz_inner(x, x) + 1.0 / k.kappa);
}

double tangent_norm(const TangentVector& v) {
    double q = lorentz_inner(std::span<const double>(v.ambient),
                             std::span<const double>(v.ambient));
    return std::sqrt(std::max(q, 0.0));
}

double tangency_residual(const TangentVector& v) {
    return std::abs(lorentz_inner(std::span<const double>(v.base.ambient),
                                  std::span<const double>(v.ambient)));
}

} // namespace hfm
