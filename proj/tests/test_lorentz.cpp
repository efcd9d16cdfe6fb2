#include <doctest.h>

#include <cmath>
#include <random>

#include "hfm/lorentz.hpp"
#include "test_util.hpp"

using namespace hfm;
using hfm::testutil::random_point;
using hfm::testutil::random_tangent;

namespace {
const double kSqrt2 = std::sqrt(2.0);
const double kAcoshSqrt2 = 0.8813735870195430; // arcosh(sqrt(2))
} // namespace

TEST_CASE("lorentz inner product on fixed vectors") {
    std::vector<double> o{1.0, 0.0, 0.0};
    std::vector<double> a{kSqrt2, 1.0, 0.0};
    std::vector<double> b{kSqrt2, 0.0, 1.0};
    CHECK(lorentz_inner(o, o) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(lorentz_inner(a, o) == doctest::Approx(-kSqrt2).epsilon(1e-15));
    CHECK(lorentz_inner(a, b) == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("lorentz inner rejects bad dimensions") {
    std::vector<double> a{1.0, 0.0, 0.0};
    std::vector<double> b{1.0, 0.0};
    CHECK_THROWS_AS((void)lorentz_inner(a, b), std::invalid_argument);
    std::vector<double> c{1.0};
    CHECK_THROWS_AS((void)lorentz_inner(c, c), std::invalid_argument);
}

TEST_CASE("curvature must be positive and finite") {
    CHECK_THROWS_AS(Curvature(0.0), std::invalid_argument);
    CHECK_THROWS_AS(Curvature(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(Curvature(std::nan("")), std::invalid_argument);
    CHECK(Curvature(2.0).kappa == 2.0);
}

TEST_CASE("geodesic distance on fixed points") {
    Curvature k(1.0);
    LorentzPoint o{{1.0, 0.0, 0.0}};
    LorentzPoint a{{kSqrt2, 1.0, 0.0}};
    CHECK(geodesic_distance(o, o, k) == 0.0);
    CHECK(geodesic_distance(o, a, k) == doctest::Approx(kAcoshSqrt2).epsilon(1e-14));
}

TEST_CASE("geodesic distance is symmetric") {
    std::mt19937_64 rng(7);
    for (double kap : {0.5, 1.0, 2.0}) {
        Curvature k(kap);
        for (int i = 0; i < 34; ++i) {
            auto x = random_point(rng, 4, k);
            auto y = random_point(rng, 4, k);
            CHECK(geodesic_distance(x, y, k) ==
                  doctest::Approx(geodesic_distance(y, x, k)).epsilon(1e-12));
        }
    }
}

TEST_CASE("lift to tangent at origin") {
    Curvature k(1.0);
    std::vector<double> f{1.0, 0.0};
    auto v = lift_to_tangent_at_origin(f, 1.0, k);
    CHECK(v.ambient == std::vector<double>{0.0, 1.0, 0.0});
    CHECK(v.base.ambient == std::vector<double>{1.0, 0.0, 0.0});
    CHECK(tangency_residual(v) == 0.0);

    auto z = lift_to_tangent_at_origin(std::vector<double>{0.0, 0.0}, 1.0, k);
    CHECK(tangent_norm(z) == 0.0);

    auto s = lift_to_tangent_at_origin(f, 0.5, k);
    CHECK(s.ambient[1] == 0.5);

    CHECK_THROWS_AS(
        (void)lift_to_tangent_at_origin(std::vector<double>{std::nan("")}, 1.0, k),
        std::invalid_argument);
}

TEST_CASE("exp map fixed values") {
    Curvature k(1.0);
    LorentzPoint o{{1.0, 0.0, 0.0}};
    TangentVector zero{o, {0.0, 0.0, 0.0}};
    auto back = exp_map(zero, k);
    CHECK(geodesic_distance(back, o, k) == doctest::Approx(0.0).epsilon(1e-15));

    TangentVector v{o, {0.0, 1.0, 0.0}};
    auto y = exp_map(v, k);
    CHECK(y.ambient[0] == doctest::Approx(std::cosh(1.0)).epsilon(1e-15));
    CHECK(y.ambient[1] == doctest::Approx(std::sinh(1.0)).epsilon(1e-15));
    CHECK(y.ambient[2] == 0.0);
}

TEST_CASE("exp map radius equals tangent norm") {
    std::mt19937_64 rng(11);
    for (double kap : {0.5, 1.0, 2.0}) {
        Curvature k(kap);
        double scale = 1.0 / std::sqrt(kap); // natural length unit of the sheet
        for (int i = 0; i < 34; ++i) {
            auto base = random_point(rng, 5, k, 3.0 * scale);
            auto v = random_tangent(rng, base, k, 5.0 * scale);
            auto y = exp_map(v, k);
            CHECK(manifold_residual(y, k) < 1e-9);
            CHECK(std::abs(geodesic_distance(base, y, k) - tangent_norm(v)) < 1e-8);
        }
    }
}

TEST_CASE("exp map rejects non-tangent vectors") {
    Curvature k(1.0);
    LorentzPoint o{{1.0, 0.0, 0.0}};
    TangentVector bad{o, {1.0, 0.0, 0.0}}; // <o, v>_L = -1
    CHECK_THROWS_AS((void)exp_map(bad, k), std::invalid_argument);
}

TEST_CASE("log map of the base point is the zero vector") {
    Curvature k(1.0);
    std::mt19937_64 rng(13);
    auto x = random_point(rng, 4, k);
    auto v = log_map(x, x, k);
    CHECK(tangent_norm(v) == 0.0);
}

TEST_CASE("log map norm equals distance and inverts exp") {
    std::mt19937_64 rng(17);
    for (double kap : {0.5, 1.0, 2.0}) {
        Curvature k(kap);
        double scale = 1.0 / std::sqrt(kap);
        for (int i = 0; i < 34; ++i) {
            auto base = random_point(rng, 5, k, 3.0 * scale);
            auto v = random_tangent(rng, base, k, 5.0 * scale);
            auto y = exp_map(v, k);
            auto w = log_map(base, y, k);
            CHECK(tangency_residual(w) < 1e-9);
            CHECK(std::abs(tangent_norm(w) - geodesic_distance(base, y, k)) < 1e-9);
            double err = 0.0;
            for (std::size_t j = 0; j < w.ambient.size(); ++j)
                err = std::max(err, std::abs(w.ambient[j] - v.ambient[j]));
            CHECK(err < 1e-8);
        }
    }
}

TEST_CASE("log map rejects off-manifold input") {
    Curvature k(1.0);
    LorentzPoint o{{1.0, 0.0, 0.0}};
    LorentzPoint bad{{2.0, 1.0, 0.0}};
    CHECK_THROWS_AS((void)log_map(o, bad, k), std::invalid_argument);
}

TEST_CASE("tangent projection is idempotent and tangent") {
    std::mt19937_64 rng(19);
    Curvature k(1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        auto base = random_point(rng, 4, k);
        std::vector<double> raw(base.ambient.size());
        for (auto& c : raw) c = normal(rng);
        auto v = tangent_project(base, raw, k);
        CHECK(tangency_residual(v) < 1e-9);
        auto v2 = tangent_project(base, v.ambient, k);
        for (std::size_t j = 0; j < v.ambient.size(); ++j)
            CHECK(v2.ambient[j] == doctest::Approx(v.ambient[j]).epsilon(1e-12));
    }
}

TEST_CASE("projecting the base point gives the zero vector") {
    Curvature k(1.0);
    std::mt19937_64 rng(23);
    auto base = random_point(rng, 4, k);
    auto v = tangent_project(base, base.ambient, k);
    CHECK(tangent_norm(v) < 1e-12);
}

TEST_CASE("geodesic interpolation endpoints and linearity") {
    std::mt19937_64 rng(29);
    Curvature k(1.0);
    auto x0 = random_point(rng, 4, k);
    auto x1 = random_point(rng, 4, k);
    double d = geodesic_distance(x0, x1, k);

    auto at0 = geodesic_interpolate(x0, x1, 0.0, k);
    auto at1 = geodesic_interpolate(x0, x1, 1.0, k);
    CHECK(geodesic_distance(at0, x0, k) < 1e-8);
    CHECK(geodesic_distance(at1, x1, k) < 1e-8);

    for (double t : {0.25, 0.5, 0.75}) {
        auto xt = geodesic_interpolate(x0, x1, t, k);
        CHECK(std::abs(geodesic_distance(x0, xt, k) - t * d) < 1e-7);
        CHECK(std::abs(geodesic_distance(xt, x1, k) - (1.0 - t) * d) < 1e-7);
    }

    auto mid = geodesic_interpolate(x0, x1, 0.5, k);
    CHECK(std::abs(geodesic_distance(x0, mid, k) - geodesic_distance(mid, x1, k)) < 1e-7);

    CHECK_THROWS_AS((void)geodesic_interpolate(x0, x1, -0.1, k), std::invalid_argument);
    CHECK_THROWS_AS((void)geodesic_interpolate(x0, x1, 1.1, k), std::invalid_argument);
}

TEST_CASE("reprojection fixed value and stability") {
    Curvature k(1.0);
    std::vector<double> a{0.0, 3.0, 4.0};
    auto p = reproject_to_manifold(a, k);
    CHECK(p.ambient[0] == doctest::Approx(std::sqrt(26.0)).epsilon(1e-15));
    CHECK(manifold_residual(p, k) < 1e-9);

    std::mt19937_64 rng(31);
    auto q = random_point(rng, 3, k);
    auto r = reproject_to_manifold(q.ambient, k);
    for (std::size_t j = 0; j < q.ambient.size(); ++j)
        CHECK(r.ambient[j] == doctest::Approx(q.ambient[j]).epsilon(1e-12));
}

TEST_CASE("composed map chains stay on the manifold") {
    std::mt19937_64 rng(37);
    for (double kap : {0.5, 1.0, 2.0}) {
        Curvature k(kap);
        for (int i = 0; i < 334; ++i) {
            auto x0 = random_point(rng, 4, k);
            auto x1 = random_point(rng, 4, k);
            auto xt = geodesic_interpolate(x0, x1, 0.3, k);
            auto v = log_map(xt, x1, k);
            for (auto& c : v.ambient) c *= 0.1;
            auto y = exp_map(v, k);
            CHECK(manifold_residual(y, k) < 1e-9);
            CHECK(y.time() > 0.0);
        }
    }
}
