#include "hfm/alignment.hpp"

#include <cmath>
#include <stdexcept>

#include "hfm/autodiff.hpp"
#include "hfm/errors.hpp"
#include "hfm/optimizer.hpp"

namespace hfm {

namespace {

constexpr double kDegenerateTol = 1e-12;

std::vector<double> l2_normalize(std::span<const double> f) {
    double nrm = 0.0;
    for (double c : f) nrm += c * c;
    nrm = std::sqrt(nrm);
    std::vector<double> out(f.begin(), f.end());
    if (nrm > kDegenerateTol)
        for (auto& c : out) c /= nrm;
    return out;
}

void check_finite_feature(std::span<const double> f, const char* who) {
    for (double c : f)
        if (!std::isfinite(c)) throw std::invalid_argument(std::string(who) + ": non-finite feature");
}

std::vector<double> apply_projection(const std::vector<double>& w, std::size_t n,
                                     std::span<const double> f) {
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += w[i * n + j] * f[j];
        out[i] = acc;
    }
    return out;
}

LorentzPoint embed_normalized(const std::vector<double>& w, std::size_t n, double alpha,
                              double kappa, std::span<const double> unit) {
    Curvature k(kappa);
    std::vector<double> u = apply_projection(w, n, unit);
    return exp_map(lift_to_tangent_at_origin(u, alpha, k), k);
}

} // namespace

double cone_aperture(const LorentzPoint& x1, double H) {
    if (!(H > 0.0) || !std::isfinite(H))
        throw std::invalid_argument("cone_aperture: H must be positive");
    double ssq = 0.0;
    for (double c : x1.space()) ssq += c * c;
    if (ssq == 0.0)
        throw DegenerateInput("cone_aperture: x1 sits exactly at the origin");
    return geom::cone_aperture_g(x1.ambient, H);
}

double exterior_angle(const LorentzPoint& x1, const LorentzPoint& x0, Curvature k) {
    double d01 = geodesic_distance(x1, x0, k);
    double d1o = geodesic_distance(x1, lorentz_origin(x1.space_dim(), k), k);
    double d0o = geodesic_distance(x0, lorentz_origin(x0.space_dim(), k), k);
    if (d01 < kDegenerateTol)
        throw DegenerateInput("exterior_angle: x0 and x1 coincide");
    if (d1o < kDegenerateTol || d0o < kDegenerateTol)
        throw DegenerateInput("exterior_angle: point at the origin");
    return geom::exterior_angle_g(x1.ambient, x0.ambient, k.kappa);
}

double entailment_loss(const LorentzPoint& x0, const LorentzPoint& x1, double H,
                       Curvature k) {
    double ext = exterior_angle(x1, x0, k);
    double ap = cone_aperture(x1, H);
    return std::max(ext - ap, 0.0);
}

double hyperbolic_contrastive_loss(const LorentzPoint& x0, const PrototypeSet& protos,
                                   int label, double tau, Curvature k) {
    if (protos.points.empty())
        throw std::invalid_argument("hyperbolic_contrastive_loss: empty prototype set");
    if (label < 0 || static_cast<std::size_t>(label) >= protos.points.size())
        throw std::invalid_argument("hyperbolic_contrastive_loss: label out of range");
    if (!(tau > 0.0))
        throw std::invalid_argument("hyperbolic_contrastive_loss: tau must be positive");
    std::vector<double> d;
    d.reserve(protos.points.size());
    for (const auto& p : protos.points) d.push_back(geodesic_distance(x0, p, k));
    return geom::contrastive_from_distances(d, static_cast<std::size_t>(label), tau);
}

AlignmentResult run_alignment(const std::vector<std::vector<double>>& features,
                              const std::vector<int>& labels,
                              const std::vector<std::vector<double>>& prototypes,
                              const AlignmentConfig& cfg) {
    if (features.empty() || prototypes.empty())
        throw std::invalid_argument("run_alignment: empty features or prototypes");
    if (features.size() != labels.size())
        throw std::invalid_argument("run_alignment: label count mismatch");
    const std::size_t n = prototypes[0].size();
    const std::size_t nclass = prototypes.size();
    for (const auto& f : features) {
        if (f.size() != n) throw std::invalid_argument("run_alignment: feature dim mismatch");
        check_finite_feature(f, "run_alignment");
    }
    for (const auto& g : prototypes) {
        if (g.size() != n) throw std::invalid_argument("run_alignment: prototype dim mismatch");
        check_finite_feature(g, "run_alignment");
    }
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= nclass)
            throw std::invalid_argument("run_alignment: label out of range");
    if (!(cfg.tau > 0.0) || !(cfg.H > 0.0) || !(cfg.beta >= 0.0) ||
        !(cfg.alpha_img_init > 0.0) || !(cfg.kappa_init > 0.0) || cfg.epochs == 0)
        throw std::invalid_argument("run_alignment: bad configuration");

    std::vector<std::vector<double>> fhat;
    fhat.reserve(features.size());
    for (const auto& f : features) fhat.push_back(l2_normalize(f));
    std::vector<std::vector<double>> ghat;
    ghat.reserve(nclass);
    for (const auto& g : prototypes) ghat.push_back(l2_normalize(g));

    // Parameters: projection (identity init), log alpha_txt, log of the
    // image/text ratio minus one, log kappa. alpha_img = alpha_txt*(1+e^g)
    // keeps the text anchor strictly deeper at every step.
    const std::size_t nparams = n * n + 3;
    std::vector<double> params(nparams, 0.0);
    for (std::size_t i = 0; i < n; ++i) params[i * n + i] = 1.0;
    params[n * n + 0] = std::log(0.5 * cfg.alpha_img_init);
    params[n * n + 1] = 0.0; // ratio 2 at init
    params[n * n + 2] = std::log(cfg.kappa_init);

    AdamWConfig ocfg;
    ocfg.lr = cfg.lr;
    AdamW opt(nparams, ocfg);
    std::vector<double> grads(nparams, 0.0);
    std::vector<AlignmentEpoch> trace;
    trace.reserve(cfg.epochs);

    ad::Tape tape;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        tape.clear();
        std::vector<ad::Rev> p(nparams);
        for (std::size_t i = 0; i < nparams; ++i) p[i] = ad::make_rev(tape, params[i]);
        ad::Rev la_txt = p[n * n + 0];
        ad::Rev gap = p[n * n + 1];
        ad::Rev lk = p[n * n + 2];
        ad::Rev alpha_txt = ad::exp(la_txt);
        ad::Rev alpha_img = alpha_txt * (1.0 + ad::exp(gap));
        ad::Rev kappa = ad::exp(lk);

        std::vector<ad::Rev> origin = geom::origin_g<ad::Rev>(n, kappa);
        auto lift_scaled = [&](const std::vector<double>& unit, ad::Rev alpha) {
            std::vector<ad::Rev> amb;
            amb.reserve(n + 1);
            amb.push_back(ad::make_rev(tape, 0.0));
            for (std::size_t i = 0; i < n; ++i) {
                ad::Rev acc = p[i * n + 0] * unit[0];
                for (std::size_t j = 1; j < n; ++j) acc = acc + p[i * n + j] * unit[j];
                amb.push_back(alpha * acc);
            }
            return geom::exp_map_g(origin, amb, kappa);
        };

        std::vector<std::vector<ad::Rev>> proto_pts;
        proto_pts.reserve(nclass);
        for (std::size_t c = 0; c < nclass; ++c)
            proto_pts.push_back(lift_scaled(ghat[c], alpha_txt));

        ad::Rev sum_con = ad::make_rev(tape, 0.0);
        ad::Rev sum_ent = ad::make_rev(tape, 0.0);
        for (std::size_t i = 0; i < features.size(); ++i) {
            std::vector<ad::Rev> x0 = lift_scaled(fhat[i], alpha_img);
            std::vector<ad::Rev> dists;
            dists.reserve(nclass);
            for (std::size_t c = 0; c < nclass; ++c)
                dists.push_back(geom::geodesic_distance_g(x0, proto_pts[c], kappa));
            sum_con = sum_con +
                      geom::contrastive_from_distances(dists, static_cast<std::size_t>(labels[i]),
                                                       cfg.tau);
            sum_ent = sum_ent + geom::entailment_loss_g(
                                    x0, proto_pts[static_cast<std::size_t>(labels[i])],
                                    cfg.H, kappa);
        }
        const double inv_m = 1.0 / static_cast<double>(features.size());
        ad::Rev mean_con = sum_con * inv_m;
        ad::Rev mean_ent = sum_ent * inv_m;
        ad::Rev total = mean_con + cfg.beta * mean_ent;

        const double total_v = ad::value_of(total);
        trace.push_back({epoch, ad::value_of(mean_con), ad::value_of(mean_ent), total_v});
        if (!std::isfinite(total_v))
            throw TrainingFailure("run_alignment: non-finite loss", epoch);

        tape.backward(total.id);
        for (std::size_t i = 0; i < nparams; ++i) grads[i] = tape.gradient(p[i].id);
        opt.step(params, grads, cosine_lr_scale(epoch, cfg.epochs));
    }

    AlignmentResult out;
    AlignedEmbedding& emb = out.embedding;
    emb.dim = n;
    emb.projection.assign(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(n * n));
    double a_txt = std::exp(params[n * n + 0]);
    emb.scales = {a_txt, a_txt * (1.0 + std::exp(params[n * n + 1]))};
    emb.kappa = std::exp(params[n * n + 2]);
    emb.labels = labels;
    Curvature kf(emb.kappa);
    std::vector<LorentzPoint> ppts;
    ppts.reserve(nclass);
    for (std::size_t c = 0; c < nclass; ++c)
        ppts.push_back(embed_normalized(emb.projection, n, emb.scales.alpha_txt, emb.kappa,
                                        ghat[c]));
    emb.prototypes = make_prototype_set(std::move(ppts), kf);
    emb.image_points.reserve(features.size());
    for (const auto& f : fhat)
        emb.image_points.push_back(
            embed_normalized(emb.projection, n, emb.scales.alpha_img, emb.kappa, f));
    out.trace = std::move(trace);
    return out;
}

LorentzPoint embed_image(const AlignedEmbedding& emb, std::span<const double> feature) {
    if (feature.size() != emb.dim)
        throw std::invalid_argument("embed_image: feature dim mismatch");
    check_finite_feature(feature, "embed_image");
    return embed_normalized(emb.projection, emb.dim, emb.scales.alpha_img, emb.kappa,
                            l2_normalize(feature));
}

LorentzPoint embed_prototype(const AlignedEmbedding& emb, std::span<const double> proto) {
    if (proto.size() != emb.dim)
        throw std::invalid_argument("embed_prototype: prototype dim mismatch");
    check_finite_feature(proto, "embed_prototype");
    return embed_normalized(emb.projection, emb.dim, emb.scales.alpha_txt, emb.kappa,
                            l2_normalize(proto));
}

std::vector<double> project_image(const AlignedEmbedding& emb,
                                  std::span<const double> feature) {
    if (feature.size() != emb.dim)
        throw std::invalid_argument("project_image: feature dim mismatch");
    check_finite_feature(feature, "project_image");
    auto u = apply_projection(emb.projection, emb.dim, l2_normalize(feature));
    for (auto& c : u) c *= emb.scales.alpha_img;
    return u;
}

std::vector<double> project_prototype(const AlignedEmbedding& emb,
                                      std::span<const double> proto) {
    if (proto.size() != emb.dim)
        throw std::invalid_argument("project_prototype: prototype dim mismatch");
    check_finite_feature(proto, "project_prototype");
    auto u = apply_projection(emb.projection, emb.dim, l2_normalize(proto));
    for (auto& c : u) c *= emb.scales.alpha_txt;
    return u;
}

} // namespace hfm
