#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "hfm/flow_infer.hpp"
#include "hfm/lorentz.hpp"
#include "hfm/prototypes.hpp"

namespace hfm {

// Quantitative proxies for path entanglement. Transport quality is reported
// through two numbers: how often intermediate states stray out of their
// class's corridor, and how often projected trajectories of different
// classes cross each other.
struct EntanglementReport {
    double corridor_violation_rate = 0.0;
    std::size_t crossing_count = 0;
    // Violation rate restricted to trajectories of each class, indexed like
    // the prototype set (0 for classes without trajectories).
    std::vector<double> per_class_rate;
};

// Fraction of recorded states, excluding each trajectory's start point,
// whose nearest prototype is not the trajectory's true class. Ties in the
// nearest-prototype argmin go to the lowest index, mirroring classify.
// per_class, when given, receives the same rate split by class index.
double corridor_violation_rate(const std::vector<Trajectory>& trajectories,
                               const PrototypeSet& protos,
                               const std::vector<int>& true_labels, Curvature k,
                               std::vector<double>* per_class = nullptr);

// Flat-space mirror for the baseline; prototypes are indexed by label.
double euclidean_corridor_violation_rate(
    const std::vector<EuclideanTrajectory>& trajectories,
    const std::vector<std::vector<double>>& prototypes,
    const std::vector<int>& true_labels, std::vector<double>* per_class = nullptr);

using Polyline = std::vector<std::vector<double>>;
using PlanarPolyline = std::vector<std::array<double, 2>>;

// Projects every state of every polyline onto the top two principal axes of
// the pooled point cloud (power iteration with deflation, seeded start,
// sign fixed so each axis's first nonzero loading is positive). If the
// covariance has rank < 2 a warning goes to stderr and the projection uses
// the available rank, padding the missing coordinate with zero.
std::vector<PlanarPolyline> project_polylines(const std::vector<Polyline>& polylines,
                                              unsigned long long seed);

// Counts proper intersections (single interior crossing point, not touching
// or collinear overlap) between segments of polylines with different
// labels. Each unordered segment pair is counted once.
std::size_t count_proper_crossings(const std::vector<PlanarPolyline>& polylines,
                                   const std::vector<int>& labels);

// project_polylines followed by count_proper_crossings.
std::size_t projected_crossings(const std::vector<Polyline>& polylines,
                                const std::vector<int>& labels,
                                unsigned long long seed = 0);

// Spatial coordinates of each trajectory state. The time coordinate is a
// function of the spatial part, so dropping it loses nothing.
std::vector<Polyline> spatial_polylines(const std::vector<Trajectory>& trajectories);
std::vector<Polyline> ambient_polylines(
    const std::vector<EuclideanTrajectory>& trajectories);

std::size_t projected_crossings(const std::vector<Trajectory>& trajectories,
                                const std::vector<int>& labels,
                                unsigned long long seed = 0);
std::size_t projected_crossings(const std::vector<EuclideanTrajectory>& trajectories,
                                const std::vector<int>& labels,
                                unsigned long long seed = 0);

EntanglementReport entanglement_report(const std::vector<Trajectory>& trajectories,
                                       const PrototypeSet& protos,
                                       const std::vector<int>& true_labels,
                                       Curvature k, unsigned long long seed = 0);
EntanglementReport euclidean_entanglement_report(
    const std::vector<EuclideanTrajectory>& trajectories,
    const std::vector<std::vector<double>>& prototypes,
    const std::vector<int>& true_labels, unsigned long long seed = 0);

// One pane of the side-by-side trajectory figure.
struct TrajectoryPanel {
    std::string title;
    std::vector<PlanarPolyline> polylines;
    std::vector<int> labels; // colors polylines; same label, same color
};

// Hand-rolled static SVG: each panel is drawn in its own frame, polylines
// colored by label, start marked with an open dot and the stop state with a
// filled one. Byte-deterministic for identical input.
void write_trajectory_svg(const std::string& path,
                          const std::vector<TrajectoryPanel>& panels);

} // namespace hfm
