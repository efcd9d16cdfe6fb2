#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "hfm/errors.hpp"
#include "hfm/flow_train.hpp"
#include "test_util.hpp"

using namespace hfm;
using hfm::testutil::make_clusters;
using hfm::testutil::random_point;

namespace {

// Small aligned embedding for training tests: 8 clusters in 16 dims.
AlignedEmbedding small_embedding(std::uint64_t seed = 0, std::size_t epochs = 80) {
    auto fx = make_clusters(8, 16, 4, 0.15, seed + 301);
    AlignmentConfig cfg;
    cfg.epochs = epochs;
    cfg.seed = seed;
    return run_alignment(fx.features, fx.labels, fx.prototypes, cfg).embedding;
}

std::vector<TrainBatchSample> make_batch(const AlignedEmbedding& emb, std::size_t count,
                                         double delta, std::uint64_t seed) {
    Curvature k(emb.kappa);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, emb.image_points.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<TrainBatchSample> batch;
    for (std::size_t b = 0; b < count; ++b) {
        std::size_t i = pick(rng);
        TrainBatchSample s;
        s.x0 = emb.image_points[i];
        s.label = emb.labels[i];
        s.x1 = emb.prototypes.points[static_cast<std::size_t>(s.label)];
        s.t = unit(rng);
        auto states = sample_pair_states(s.x0, s.x1, s.t, delta, k);
        s.x_t = states.first;
        s.x_next = states.second;
        batch.push_back(std::move(s));
    }
    return batch;
}

} // namespace

TEST_CASE("pair states at t=0 with delta=1 are the endpoints") {
    Curvature k(1.0);
    std::mt19937_64 rng(11);
    auto x0 = random_point(rng, 4, k, 1.5);
    auto x1 = random_point(rng, 4, k, 1.5);
    auto [a, b] = sample_pair_states(x0, x1, 0.0, 1.0, k);
    for (std::size_t j = 0; j < x0.ambient.size(); ++j) {
        CHECK(a.ambient[j] == doctest::Approx(x0.ambient[j]).epsilon(1e-12));
        CHECK(b.ambient[j] == doctest::Approx(x1.ambient[j]).epsilon(1e-12));
    }
}

TEST_CASE("coincident endpoints give a zero-length step") {
    Curvature k(0.7);
    std::mt19937_64 rng(12);
    auto x = random_point(rng, 5, k, 2.0);
    auto [a, b] = sample_pair_states(x, x, 0.4, 0.1, k);
    CHECK(geodesic_distance(a, x, k) < 1e-10);
    CHECK(geodesic_distance(b, x, k) < 1e-10);
    CHECK(geodesic_distance(a, b, k) < 1e-10);
}

TEST_CASE("unclamped pair states are delta apart in geodesic fraction") {
    Curvature k(1.3);
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 25; ++trial) {
        auto x0 = random_point(rng, 6, k, 1.5);
        auto x1 = random_point(rng, 6, k, 1.5);
        double full = geodesic_distance(x0, x1, k);
        if (full < 1e-6) continue;
        std::uniform_real_distribution<double> unif(0.0, 0.85);
        double t = unif(rng);
        auto [a, b] = sample_pair_states(x0, x1, t, 0.1, k);
        CHECK(geodesic_distance(a, b, k) / full == doctest::Approx(0.1).epsilon(1e-7));
    }
}

TEST_CASE("t past the clamp point never overshoots the prototype") {
    Curvature k(1.0);
    std::mt19937_64 rng(14);
    auto x0 = random_point(rng, 4, k, 1.0);
    auto x1 = random_point(rng, 4, k, 1.0);
    auto [a, b] = sample_pair_states(x0, x1, 0.97, 0.1, k);
    (void)a;
    CHECK(geodesic_distance(b, x1, k) < 1e-10);
}

TEST_CASE("zero-initialized field predicts a fixed point") {
    Curvature k(1.0);
    std::mt19937_64 rng(15);
    auto x = random_point(rng, 4, k, 2.0);
    VelocityNet net(VelocityNetConfig{5, 16, 2, 8}, 3);
    auto pred = predicted_next_state(net, x, 0.4, 0.1, k);
    for (std::size_t j = 1; j < x.ambient.size(); ++j)
        CHECK(pred.ambient[j] == x.ambient[j]);
    CHECK(std::abs(pred.time() - x.time()) < 1e-12);
}

TEST_CASE("predicted states stay on the manifold for random fields") {
    Curvature k(1.0);
    std::mt19937_64 rng(16);
    VelocityNet net(VelocityNetConfig{5, 16, 2, 8}, 4, /*zero_final=*/false);
    // A fresh fan-in head can emit velocities two orders beyond anything a
    // trained field produces; scale it into the working range so the check
    // probes geometry, not float headroom at astronomical coordinates.
    for (std::size_t i = net.param_count() - (5 * 16 + 5); i < net.param_count(); ++i)
        net.params()[i] *= 0.02;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        auto x = random_point(rng, 4, k, 2.0);
        auto pred = predicted_next_state(net, x, unit(rng), 0.1, k);
        CHECK(manifold_residual(pred, k) < 1e-9);
    }
}

TEST_CASE("prediction distance equals delta times the projected speed") {
    Curvature k(1.0);
    std::mt19937_64 rng(17);
    VelocityNet net(VelocityNetConfig{5, 16, 2, 8}, 5, /*zero_final=*/false);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = random_point(rng, 4, k, 1.5);
        double t = 0.05 * trial;
        auto g = net.forward(x.ambient, t);
        auto v = tangent_project(x, g, k);
        auto pred = predicted_next_state(net, x, t, 0.1, k);
        CHECK(geodesic_distance(x, pred, k) ==
              doctest::Approx(0.1 * tangent_norm(v)).epsilon(1e-8).scale(1.0));
    }
}

TEST_CASE("step loss fixed values and symmetry") {
    Curvature k(1.0);
    LorentzPoint o = lorentz_origin(2, k);
    LorentzPoint p{{std::sqrt(2.0), 1.0, 0.0}};
    CHECK(step_loss(o, o, k) == 0.0);
    // square of the arcosh(sqrt 2) distance
    CHECK(step_loss(o, p, k) == doctest::Approx(0.7768193998956960).epsilon(1e-12));
    CHECK(step_loss(o, p, k) == step_loss(p, o, k));
}

TEST_CASE("contrastive term at predicted states matches the shared kernel bit for bit") {
    Curvature k(1.0);
    std::mt19937_64 rng(18);
    std::vector<LorentzPoint> pts;
    for (int c = 0; c < 5; ++c) pts.push_back(random_point(rng, 6, k, 1.0));
    auto protos = make_prototype_set(pts, k);
    auto x = random_point(rng, 6, k, 1.5);
    for (int label = 0; label < 5; ++label)
        CHECK(icd_loss(x, protos, label, 0.1, k) ==
              hyperbolic_contrastive_loss(x, protos, label, 0.1, k));
}

TEST_CASE("contrastive term is zero for a single prototype") {
    Curvature k(1.0);
    std::mt19937_64 rng(19);
    auto protos = make_prototype_set({random_point(rng, 4, k, 1.0)}, k);
    auto x = random_point(rng, 4, k, 2.0);
    CHECK(icd_loss(x, protos, 0, 0.1, k) == 0.0);
}

TEST_CASE("contrastive term saturates when the prediction sits on its prototype") {
    Curvature k(1.0);
    std::vector<LorentzPoint> pts;
    pts.push_back(lorentz_origin(3, k));
    for (std::size_t axis = 0; axis < 3; ++axis) {
        std::vector<double> dir(3, 0.0);
        dir[axis] = 1.0;
        pts.push_back(exp_map(lift_to_tangent_at_origin(dir, 12.0, k), k));
    }
    auto protos = make_prototype_set(pts, k);
    CHECK(icd_loss(pts[0], protos, 0, 0.1, k) < 1e-8);
}

TEST_CASE("batch loss value agrees bitwise between primal and gradient paths") {
    auto emb = small_embedding(0, 40);
    Curvature k(emb.kappa);
    VelocityNetConfig ncfg{emb.dim + 1, 16, 2, 8};
    VelocityNet net(ncfg, 9, /*zero_final=*/false);
    auto batch = make_batch(emb, 6, 0.1, 55);
    double primal = composite_batch_loss(net, batch, emb.prototypes, 0.1, 0.1, 0.1, k);
    std::vector<double> grads(net.param_count(), 0.0);
    double ms = 0.0, mi = 0.0;
    double from_grad = composite_batch_grad(net, batch, emb.prototypes, 0.1, 0.1, 0.1,
                                            k, grads, &ms, &mi);
    CHECK(primal == from_grad);
    CHECK(from_grad == ms + 0.1 * mi);
}

TEST_CASE("composite gradient matches central finite differences") {
    auto emb = small_embedding(0, 40);
    Curvature k(emb.kappa);
    VelocityNetConfig ncfg{emb.dim + 1, 8, 2, 4};
    VelocityNet net(ncfg, 10, /*zero_final=*/false);
    auto batch = make_batch(emb, 4, 0.1, 66);

    std::vector<double> grads(net.param_count(), 0.0);
    composite_batch_grad(net, batch, emb.prototypes, 0.1, 0.1, 0.1, k, grads);

    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> pickp(0, net.param_count() - 1);
    const double h = 1e-4;
    int checked = 0;
    while (checked < 32) {
        std::size_t i = pickp(rng);
        double saved = net.params()[i];
        net.params()[i] = saved + h;
        double up = composite_batch_loss(net, batch, emb.prototypes, 0.1, 0.1, 0.1, k);
        net.params()[i] = saved - h;
        double dn = composite_batch_loss(net, batch, emb.prototypes, 0.1, 0.1, 0.1, k);
        net.params()[i] = saved;
        double fd = (up - dn) / (2.0 * h);
        if (std::abs(fd) < 1e-6) continue; // relative error needs a signal
        CHECK(std::abs(grads[i] - fd) / std::abs(fd) < 1e-4);
        ++checked;
    }
}

TEST_CASE("training cuts the step loss by 10x on the clustered set") {
    auto emb = small_embedding(0, 80);
    FlowTrainConfig cfg;
    auto res = train_flow(emb, cfg);
    REQUIRE(res.trace.step_loss.size() == cfg.epochs);
    CHECK(res.trace.step_loss.front() > 0.0);
    CHECK(res.trace.step_loss.back() < 0.1 * res.trace.step_loss.front());
}

TEST_CASE("lambda zero makes the recorded objective the pure step loss") {
    auto emb = small_embedding(0, 40);
    FlowTrainConfig cfg;
    cfg.lambda = 0.0;
    cfg.epochs = 8;
    cfg.batch = 8;
    cfg.width = 16;
    cfg.blocks = 2;
    cfg.time_dim = 8;
    auto res = train_flow(emb, cfg);
    for (std::size_t i = 0; i < res.trace.total.size(); ++i)
        CHECK(res.trace.total[i] == res.trace.step_loss[i]);
}

TEST_CASE("recorded total decomposes exactly at every step") {
    auto emb = small_embedding(0, 40);
    FlowTrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch = 8;
    cfg.width = 16;
    cfg.blocks = 2;
    cfg.time_dim = 8;
    auto res = train_flow(emb, cfg);
    for (std::size_t i = 0; i < res.trace.total.size(); ++i)
        CHECK(res.trace.total[i] ==
              res.trace.step_loss[i] + cfg.lambda * res.trace.icd_loss[i]);
}

TEST_CASE("same seed trains to the same loss bit for bit") {
    auto emb = small_embedding(0, 40);
    FlowTrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch = 8;
    cfg.width = 16;
    cfg.blocks = 2;
    cfg.time_dim = 8;
    auto a = train_flow(emb, cfg);
    auto b = train_flow(emb, cfg);
    CHECK(a.trace.total.back() == b.trace.total.back());
    auto pa = a.net.params(), pb = b.net.params();
    bool same = true;
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (pa[i] != pb[i]) same = false;
    CHECK(same);
}

TEST_CASE("oracle velocity drives the step loss to numerical zero") {
    auto emb = small_embedding(0, 40);
    Curvature k(emb.kappa);
    auto batch = make_batch(emb, 32, 0.1, 99);
    for (const auto& s : batch) {
        auto v = log_map(s.x_t, s.x_next, k);
        for (auto& c : v.ambient) c /= 0.1;
        auto pred = advance_with_velocity(s.x_t, v, 0.1, k);
        CHECK(step_loss(pred, s.x_next, k) < 1e-10);
    }
}

TEST_CASE("diverging training reports the failing step") {
    auto emb = small_embedding(0, 40);
    FlowTrainConfig cfg;
    cfg.lr = 1e12;
    cfg.epochs = 12;
    cfg.batch = 4;
    cfg.width = 16;
    cfg.blocks = 2;
    cfg.time_dim = 8;
    CHECK_THROWS_AS(train_flow(emb, cfg), TrainingFailure);
}

TEST_CASE("baseline straight-line interpolation hits the midpoint") {
    std::vector<double> x0{0.0, 0.0}, x1{2.0, 2.0};
    auto mid = euclidean_interpolate(x0, x1, 0.5);
    CHECK(mid[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mid[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("baseline initial step loss matches the closed form over the draws") {
    auto fx = make_clusters(4, 6, 5, 0.2, 404);
    FlowTrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch = 16;
    cfg.width = 16;
    cfg.blocks = 2;
    cfg.time_dim = 8;
    cfg.seed = 7;
    auto res = train_euclidean_baseline(fx.features, fx.labels, fx.prototypes, cfg);

    // Replay the documented draw order: per slot one index draw, one t draw.
    std::mt19937_64 rng(cfg.seed + 1);
    std::uniform_int_distribution<std::size_t> pick(0, fx.features.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double expect = 0.0;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
        std::size_t i = pick(rng);
        double t = unit(rng);
        double tc = std::min(t + cfg.delta, 1.0);
        const auto& x0 = fx.features[i];
        const auto& x1 = fx.prototypes[static_cast<std::size_t>(fx.labels[i])];
        double l = 0.0;
        for (std::size_t j = 0; j < x0.size(); ++j) {
            double r = (tc - t) * (x1[j] - x0[j]);
            l += r * r;
        }
        expect += l;
    }
    expect /= static_cast<double>(cfg.batch);
    CHECK(res.trace.step_loss.front() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("baseline without the contrastive term records a zero icd column") {
    auto fx = make_clusters(3, 5, 4, 0.2, 405);
    FlowTrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch = 6;
    cfg.width = 16;
    cfg.blocks = 2;
    cfg.time_dim = 8;
    auto res = train_euclidean_baseline(fx.features, fx.labels, fx.prototypes, cfg);
    for (std::size_t i = 0; i < res.trace.total.size(); ++i) {
        CHECK(res.trace.icd_loss[i] == 0.0);
        CHECK(res.trace.total[i] == res.trace.step_loss[i]);
    }
}

TEST_CASE("baseline training is deterministic and reduces its loss") {
    auto fx = make_clusters(4, 6, 6, 0.15, 406);
    FlowTrainConfig cfg;
    cfg.epochs = 60;
    cfg.batch = 16;
    cfg.width = 32;
    cfg.blocks = 2;
    cfg.time_dim = 8;
    auto a = train_euclidean_baseline(fx.features, fx.labels, fx.prototypes, cfg);
    auto b = train_euclidean_baseline(fx.features, fx.labels, fx.prototypes, cfg);
    CHECK(a.trace.total.back() == b.trace.total.back());
    CHECK(a.trace.step_loss.back() < a.trace.step_loss.front());
    auto pa = a.net.params(), pb = b.net.params();
    bool same = true;
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (pa[i] != pb[i]) same = false;
    CHECK(same);
}

TEST_CASE("baseline with the contrastive term still trains and decomposes") {
    auto fx = make_clusters(3, 5, 4, 0.2, 407);
    FlowTrainConfig cfg;
    cfg.baseline_icd = true;
    cfg.epochs = 5;
    cfg.batch = 6;
    cfg.width = 16;
    cfg.blocks = 2;
    cfg.time_dim = 8;
    auto res = train_euclidean_baseline(fx.features, fx.labels, fx.prototypes, cfg);
    bool icd_seen = false;
    for (std::size_t i = 0; i < res.trace.total.size(); ++i) {
        if (res.trace.icd_loss[i] != 0.0) icd_seen = true;
        CHECK(res.trace.total[i] ==
              res.trace.step_loss[i] + cfg.lambda * res.trace.icd_loss[i]);
    }
    CHECK(icd_seen);
}

TEST_CASE("loss trace csv round-trips every double exactly") {
    FlowTrace trace;
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> unif(1e-7, 3.0);
    for (int i = 0; i < 20; ++i) {
        double s = unif(rng), c = unif(rng);
        trace.step_loss.push_back(s);
        trace.icd_loss.push_back(c);
        trace.total.push_back(s + 0.1 * c);
        trace.lr.push_back(2e-4 * unif(rng));
    }
    auto path = std::filesystem::temp_directory_path() / "hfm_trace_roundtrip.csv";
    write_loss_trace_csv(path.string(), trace);
    auto back = read_loss_trace_csv(path.string());
    REQUIRE(back.total.size() == trace.total.size());
    for (std::size_t i = 0; i < trace.total.size(); ++i) {
        CHECK(back.step_loss[i] == trace.step_loss[i]);
        CHECK(back.icd_loss[i] == trace.icd_loss[i]);
        CHECK(back.total[i] == trace.total[i]);
        CHECK(back.lr[i] == trace.lr[i]);
    }
    std::filesystem::remove(path);
}
