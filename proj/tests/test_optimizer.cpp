#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hfm/optimizer.hpp"

using namespace hfm;

TEST_CASE("adamw first step matches the hand-computed update") {
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.01;
    AdamW opt(1, cfg);
    std::vector<double> p{2.0};
    std::vector<double> g{0.5};
    opt.step(p, g);
    // bias-corrected moments equal the raw gradient on step one
    double expected = 2.0 - 0.1 * (0.5 / (std::sqrt(0.25) + 1e-8) + 0.01 * 2.0);
    CHECK(p[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("adamw second step applies exponential moment averages") {
    AdamWConfig cfg;
    cfg.lr = 0.05;
    cfg.weight_decay = 0.0;
    AdamW opt(1, cfg);
    std::vector<double> p{1.0};
    std::vector<double> g{1.0};
    opt.step(p, g);
    double p1 = p[0];
    std::vector<double> g2{-0.5};
    opt.step(p, g2);
    double m = 0.9 * (0.1 * 1.0) + 0.1 * (-0.5);
    double v = 0.999 * (0.001 * 1.0) + 0.001 * 0.25;
    double mhat = m / (1.0 - 0.9 * 0.9);
    double vhat = v / (1.0 - 0.999 * 0.999);
    double expected = p1 - 0.05 * (mhat / (std::sqrt(vhat) + 1e-8));
    CHECK(p[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("adamw minimizes a quadratic") {
    AdamWConfig cfg;
    cfg.lr = 0.05;
    cfg.weight_decay = 0.0;
    AdamW opt(2, cfg);
    std::vector<double> p{3.0, -2.0};
    for (int i = 0; i < 500; ++i) {
        std::vector<double> g{2.0 * p[0], 2.0 * p[1]};
        opt.step(p, g);
    }
    CHECK(std::abs(p[0]) < 1e-3);
    CHECK(std::abs(p[1]) < 1e-3);
}

TEST_CASE("decoupled weight decay shrinks parameters with zero gradient") {
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.5;
    AdamW opt(1, cfg);
    std::vector<double> p{1.0};
    std::vector<double> g{0.0};
    opt.step(p, g);
    CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 0.5 * 1.0).epsilon(1e-15));
}

TEST_CASE("cosine schedule anneals from one to zero") {
    CHECK(cosine_lr_scale(0, 100) == 1.0);
    CHECK(cosine_lr_scale(50, 100) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(cosine_lr_scale(100, 100) == 0.0);
    CHECK(cosine_lr_scale(250, 100) == 0.0);
    double prev = 1.0;
    for (std::size_t s = 1; s <= 100; ++s) {
        double cur = cosine_lr_scale(s, 100);
        CHECK(cur <= prev);
        prev = cur;
    }
    CHECK_THROWS_AS((void)cosine_lr_scale(0, 0), std::invalid_argument);
}

TEST_CASE("adamw validates sizes and hyperparameters") {
    AdamW opt(2);
    std::vector<double> p{1.0};
    std::vector<double> g{1.0};
    CHECK_THROWS_AS(opt.step(p, g), std::invalid_argument);
    AdamWConfig bad;
    bad.lr = -1.0;
    CHECK_THROWS_AS(AdamW(1, bad), std::invalid_argument);
}
