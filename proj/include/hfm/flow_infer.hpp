#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "hfm/lorentz.hpp"
#include "hfm/prototypes.hpp"
#include "hfm/velocity_net.hpp"

namespace hfm {

enum class StopReason { threshold_hit, horizon };

// Discrete transport record: states[0] is the start point, times[i] = i*delta,
// stop_index points at the final state.
struct Trajectory {
    std::vector<LorentzPoint> states;
    std::vector<double> times;
    std::size_t stop_index = 0;
    StopReason reason = StopReason::horizon;
};

// One Euler step along the projected field; shares its implementation with
// flow training's predicted_next_state, so both produce bit-identical states.
LorentzPoint euler_step(const VelocityNet& net, const LorentzPoint& x_hat, double t,
                        double delta, Curvature k);

// 0.5 * log10(N) * d_txt; grows with class count to compensate crowding.
double stopping_threshold(std::size_t n_classes, double d_txt);

// Integrates from x0 with step delta. After every step (never at x0 itself)
// the trajectory stops early if the nearest prototype is within
// stopping_threshold; otherwise it runs out the horizon of ceil(1/delta)
// steps. Deterministic; every state lies on the manifold.
Trajectory transport_with_stopping(const VelocityNet& net, const LorentzPoint& x0,
                                   const PrototypeSet& protos, double delta,
                                   Curvature k);

// Accumulated geodesic distance to each prototype over all recorded states;
// prediction = class id of the smallest total, ties to the lowest index.
std::pair<int, std::vector<double>> classify(const Trajectory& traj,
                                             const PrototypeSet& protos, Curvature k);

// softmax(-scores / tau): a normalized read-only view of classify's scores.
std::vector<double> classification_softmax(std::span<const double> scores, double tau);

// Euclidean mirror of the transport stack for the flat-space baseline.
struct EuclideanTrajectory {
    std::vector<std::vector<double>> states;
    std::vector<double> times;
    std::size_t stop_index = 0;
    StopReason reason = StopReason::horizon;
};

// Largest pairwise Euclidean distance between baseline prototypes.
double euclidean_diameter(const std::vector<std::vector<double>>& prototypes);

// x + delta * F(x, t), same arithmetic as the baseline trainer's prediction.
std::vector<double> euclidean_euler_step(const VelocityNet& net,
                                         std::span<const double> x, double t,
                                         double delta);

// Same stepping and stopping semantics as transport_with_stopping with the
// Euclidean metric; threshold is passed in so callers control the parity rule.
EuclideanTrajectory euclidean_transport(const VelocityNet& net,
                                        std::span<const double> x0,
                                        const std::vector<std::vector<double>>& prototypes,
                                        double delta, double threshold);

std::pair<int, std::vector<double>> euclidean_classify(
    const EuclideanTrajectory& traj, const std::vector<std::vector<double>>& prototypes);

} // namespace hfm
