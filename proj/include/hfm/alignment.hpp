#pragma once

#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "hfm/lorentz.hpp"
#include "hfm/prototypes.hpp"

namespace hfm {

struct StratificationScales {
    double alpha_txt;
    double alpha_img;
};

struct AlignmentConfig {
    double H = 0.1;    // entailment cone boundary parameter
    double tau = 0.1;  // contrastive temperature
    double beta = 0.2; // entailment loss weight
    double lr = 0.02;
    std::size_t epochs = 200;
    double alpha_img_init = 1.0; // alpha_txt starts at half of this
    double kappa_init = 1.0;
    std::uint64_t seed = 0;
};

struct AlignmentEpoch {
    std::size_t epoch;
    double contrastive;
    double entailment;
    double total;
};

// Frozen output of the alignment stage. Carries the projection so unseen
// features can be embedded with the same parameters later.
struct AlignedEmbedding {
    std::size_t dim = 0;
    std::vector<double> projection; // row-major dim x dim
    StratificationScales scales{0.5, 1.0};
    double kappa = 1.0;
    std::vector<LorentzPoint> image_points;
    std::vector<int> labels;
    PrototypeSet prototypes;
};

struct AlignmentResult {
    AlignedEmbedding embedding;
    std::vector<AlignmentEpoch> trace;
};

namespace geom {

// Half-aperture of the entailment cone anchored at x1.
template <class S>
S cone_aperture_g(const std::vector<S>& x1, double H) {
    using std::asin;
    using std::sqrt;
    using ad::clamp;
    using ad::clamp_min;
    S ssq = scalar_like(x1[0], 0.0);
    for (std::size_t i = 1; i < x1.size(); ++i) ssq = ssq + x1[i] * x1[i];
    S r = sqrt(clamp_min(ssq, 1e-300));
    return asin(clamp((2.0 * H) / r, -1.0, 1.0));
}

// pi minus the angle at x1 of the geodesic triangle (origin, x1, x0).
template <class S>
S exterior_angle_g(const std::vector<S>& x1, const std::vector<S>& x0, const S& kappa) {
    using std::acos;
    using std::sqrt;
    using ad::clamp;
    using ad::clamp_min;
    std::vector<S> origin = origin_g<S>(x1.size() - 1, kappa);
    std::vector<S> u = log_map_g(x1, origin, kappa);
    std::vector<S> w = log_map_g(x1, x0, kappa);
    S nu = sqrt(clamp_min(lorentz_inner_g(u, u), 0.0));
    S nw = sqrt(clamp_min(lorentz_inner_g(w, w), 0.0));
    S denom = clamp_min(nu * nw, 1e-300);
    S cosang = clamp(lorentz_inner_g(u, w) / denom, -1.0, 1.0);
    return std::numbers::pi - acos(cosang);
}

template <class S>
S entailment_loss_g(const std::vector<S>& x0, const std::vector<S>& x1, double H,
                    const S& kappa) {
    using ad::clamp_min;
    return clamp_min(exterior_angle_g(x1, x0, kappa) - cone_aperture_g(x1, H), 0.0);
}

// Cross entropy of softmax(-d/tau) against the true index, with the running
// max subtracted before exponentiation. The max is treated as a constant.
template <class S>
S contrastive_from_distances(const std::vector<S>& d, std::size_t label, double tau) {
    using std::exp;
    using std::log;
    using ad::value_of;
    std::vector<S> logits;
    logits.reserve(d.size());
    for (const S& dk : d) logits.push_back(-(dk * (1.0 / tau)));
    double m = value_of(logits[0]);
    for (std::size_t k = 1; k < logits.size(); ++k)
        m = std::max(m, value_of(logits[k]));
    S acc = exp(logits[0] - m);
    for (std::size_t k = 1; k < logits.size(); ++k) acc = acc + exp(logits[k] - m);
    return (log(acc) + m) - logits[label];
}

} // namespace geom

double cone_aperture(const LorentzPoint& x1, double H);
double exterior_angle(const LorentzPoint& x1, const LorentzPoint& x0, Curvature k);
double entailment_loss(const LorentzPoint& x0, const LorentzPoint& x1, double H,
                       Curvature k);
double hyperbolic_contrastive_loss(const LorentzPoint& x0, const PrototypeSet& protos,
                                   int label, double tau, Curvature k);

// Optimizes the shared projection, the two scales, and the curvature under
// contrastive + entailment losses on the labeled support set. Features and
// prototypes are L2-normalized before projection, mirroring the usual
// treatment of encoder embeddings; the image scale is parameterized as a
// strict multiple of the text scale so their ordering cannot cross.
AlignmentResult run_alignment(const std::vector<std::vector<double>>& features,
                              const std::vector<int>& labels,
                              const std::vector<std::vector<double>>& prototypes,
                              const AlignmentConfig& cfg);

// Embedding with frozen alignment parameters.
LorentzPoint embed_image(const AlignedEmbedding& emb, std::span<const double> feature);
LorentzPoint embed_prototype(const AlignedEmbedding& emb, std::span<const double> proto);
// The Euclidean coordinates an image feature has just before manifold lifting.
std::vector<double> project_image(const AlignedEmbedding& emb,
                                  std::span<const double> feature);
std::vector<double> project_prototype(const AlignedEmbedding& emb,
                                      std::span<const double> proto);

} // namespace hfm
