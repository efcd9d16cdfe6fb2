#include "hfm/flow_infer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hfm/flow_train.hpp"

namespace hfm {

namespace {

std::size_t horizon_steps(double delta) {
    return static_cast<std::size_t>(std::ceil((1.0 - 1e-12) / delta));
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    double q = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        double r = a[j] - b[j];
        q += r * r;
    }
    return std::sqrt(q);
}

} // namespace

LorentzPoint euler_step(const VelocityNet& net, const LorentzPoint& x_hat, double t,
                        double delta, Curvature k) {
    return predicted_next_state(net, x_hat, t, delta, k);
}

double stopping_threshold(std::size_t n_classes, double d_txt) {
    if (n_classes < 1)
        throw std::invalid_argument("stopping_threshold: need at least one class");
    if (!(d_txt >= 0.0))
        throw std::invalid_argument("stopping_threshold: d_txt must be nonnegative");
    return 0.5 * std::log10(static_cast<double>(n_classes)) * d_txt;
}

Trajectory transport_with_stopping(const VelocityNet& net, const LorentzPoint& x0,
                                   const PrototypeSet& protos, double delta,
                                   Curvature k) {
    if (!(delta > 0.0 && delta <= 1.0))
        throw std::invalid_argument("transport_with_stopping: delta outside (0, 1]");
    if (protos.points.empty())
        throw std::invalid_argument("transport_with_stopping: empty prototype set");
    const double threshold = stopping_threshold(protos.points.size(), protos.d_txt);

    Trajectory traj;
    traj.states.push_back(x0);
    traj.times.push_back(0.0);
    const std::size_t max_steps = horizon_steps(delta);
    for (std::size_t step = 0; step < max_steps; ++step) {
        double t = std::min(static_cast<double>(step) * delta, 1.0);
        LorentzPoint next = euler_step(net, traj.states.back(), t, delta, k);
        traj.states.push_back(std::move(next));
        traj.times.push_back(static_cast<double>(step + 1) * delta);
        double nearest = geodesic_distance(traj.states.back(), protos.points[0], k);
        for (std::size_t c = 1; c < protos.points.size(); ++c)
            nearest = std::min(nearest,
                               geodesic_distance(traj.states.back(), protos.points[c], k));
        if (nearest <= threshold) {
            traj.stop_index = traj.states.size() - 1;
            traj.reason = StopReason::threshold_hit;
            return traj;
        }
    }
    traj.stop_index = traj.states.size() - 1;
    traj.reason = StopReason::horizon;
    return traj;
}

std::pair<int, std::vector<double>> classify(const Trajectory& traj,
                                             const PrototypeSet& protos, Curvature k) {
    if (traj.states.empty())
        throw std::invalid_argument("classify: empty trajectory");
    if (protos.points.empty())
        throw std::invalid_argument("classify: empty prototype set");
    std::vector<double> scores(protos.points.size(), 0.0);
    for (std::size_t i = 0; i <= traj.stop_index; ++i)
        for (std::size_t c = 0; c < protos.points.size(); ++c)
            scores[c] += geodesic_distance(traj.states[i], protos.points[c], k);
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] < scores[best]) best = c;
    return {protos.class_ids[best], scores};
}

std::vector<double> classification_softmax(std::span<const double> scores, double tau) {
    if (scores.empty())
        throw std::invalid_argument("classification_softmax: empty scores");
    if (!(tau > 0.0))
        throw std::invalid_argument("classification_softmax: tau must be positive");
    double m = -scores[0] / tau;
    for (std::size_t c = 1; c < scores.size(); ++c)
        m = std::max(m, -scores[c] / tau);
    std::vector<double> p(scores.size());
    double z = 0.0;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        p[c] = std::exp(-scores[c] / tau - m);
        z += p[c];
    }
    for (auto& v : p) v /= z;
    return p;
}

double euclidean_diameter(const std::vector<std::vector<double>>& prototypes) {
    if (prototypes.empty())
        throw std::invalid_argument("euclidean_diameter: empty prototype set");
    double d = 0.0;
    for (std::size_t i = 0; i < prototypes.size(); ++i)
        for (std::size_t j = i + 1; j < prototypes.size(); ++j)
            d = std::max(d, euclidean_distance(prototypes[i], prototypes[j]));
    return d;
}

std::vector<double> euclidean_euler_step(const VelocityNet& net,
                                         std::span<const double> x, double t,
                                         double delta) {
    std::vector<double> out = net.forward(x, t);
    std::vector<double> next(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) next[j] = x[j] + delta * out[j];
    return next;
}

EuclideanTrajectory euclidean_transport(const VelocityNet& net,
                                        std::span<const double> x0,
                                        const std::vector<std::vector<double>>& prototypes,
                                        double delta, double threshold) {
    if (!(delta > 0.0 && delta <= 1.0))
        throw std::invalid_argument("euclidean_transport: delta outside (0, 1]");
    if (prototypes.empty())
        throw std::invalid_argument("euclidean_transport: empty prototype set");

    EuclideanTrajectory traj;
    traj.states.emplace_back(x0.begin(), x0.end());
    traj.times.push_back(0.0);
    const std::size_t max_steps = horizon_steps(delta);
    for (std::size_t step = 0; step < max_steps; ++step) {
        double t = std::min(static_cast<double>(step) * delta, 1.0);
        traj.states.push_back(euclidean_euler_step(net, traj.states.back(), t, delta));
        traj.times.push_back(static_cast<double>(step + 1) * delta);
        double nearest = euclidean_distance(traj.states.back(), prototypes[0]);
        for (std::size_t c = 1; c < prototypes.size(); ++c)
            nearest = std::min(nearest,
                               euclidean_distance(traj.states.back(), prototypes[c]));
        if (nearest <= threshold) {
            traj.stop_index = traj.states.size() - 1;
            traj.reason = StopReason::threshold_hit;
            return traj;
        }
    }
    traj.stop_index = traj.states.size() - 1;
    traj.reason = StopReason::horizon;
    return traj;
}

std::pair<int, std::vector<double>> euclidean_classify(
    const EuclideanTrajectory& traj,
    const std::vector<std::vector<double>>& prototypes) {
    if (traj.states.empty())
        throw std::invalid_argument("euclidean_classify: empty trajectory");
    if (prototypes.empty())
        throw std::invalid_argument("euclidean_classify: empty prototype set");
    std::vector<double> scores(prototypes.size(), 0.0);
    for (std::size_t i = 0; i <= traj.stop_index; ++i)
        for (std::size_t c = 0; c < prototypes.size(); ++c)
            scores[c] += euclidean_distance(traj.states[i], prototypes[c]);
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] < scores[best]) best = c;
    return {static_cast<int>(best), scores};
}

} // namespace hfm
