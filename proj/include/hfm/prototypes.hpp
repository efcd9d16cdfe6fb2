#pragma once

#include <vector>

#include "hfm/lorentz.hpp"

namespace hfm {

// Class anchors on the manifold plus the cached semantic diameter d_txt
// (largest pairwise geodesic distance between anchors).
struct PrototypeSet {
    std::vector<LorentzPoint> points;
    std::vector<int> class_ids;
    double d_txt = 0.0;
};

// Largest pairwise geodesic distance; 0 for a single prototype.
double semantic_diameter(const std::vector<LorentzPoint>& prototypes, Curvature k);

// Bundles prototypes with class ids 0..N-1 and caches d_txt.
PrototypeSet make_prototype_set(std::vector<LorentzPoint> points, Curvature k);

} // namespace hfm
