#include "hfm/prototypes.hpp"

#include <stdexcept>

namespace hfm {

double semantic_diameter(const std::vector<LorentzPoint>& prototypes, Curvature k) {
    if (prototypes.empty())
        throw std::invalid_argument("semantic_diameter: empty prototype set");
    double best = 0.0;
    for (std::size_t i = 0; i < prototypes.size(); ++i)
        for (std::size_t j = i + 1; j < prototypes.size(); ++j)
            best = std::max(best, geodesic_distance(prototypes[i], prototypes[j], k));
    return best;
}

PrototypeSet make_prototype_set(std::vector<LorentzPoint> points, Curvature k) {
    PrototypeSet set;
    set.d_txt = semantic_diameter(points, k);
    set.points = std::move(points);
    set.class_ids.resize(set.points.size());
    for (std::size_t i = 0; i < set.class_ids.size(); ++i)
        set.class_ids[i] = static_cast<int>(i);
    return set;
}

} // namespace hfm
