#include "hfm/flow_train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "hfm/autodiff.hpp"
#include "hfm/errors.hpp"
#include "hfm/optimizer.hpp"

namespace hfm {

namespace {

void check_delta(double delta, const char* where) {
    if (!(delta > 0.0 && delta <= 1.0))
        throw std::invalid_argument(std::string(where) + ": delta outside (0, 1]");
}

std::vector<ad::Rev> lift_const(ad::Tape& tape, const std::vector<double>& v) {
    std::vector<ad::Rev> out;
    out.reserve(v.size());
    for (double c : v) out.push_back(ad::make_rev(tape, c));
    return out;
}

// Index of the prototype carrying class id `label`.
std::size_t proto_index(const PrototypeSet& protos, int label, const char* where) {
    for (std::size_t i = 0; i < protos.class_ids.size(); ++i)
        if (protos.class_ids[i] == label) return i;
    throw std::invalid_argument(std::string(where) + ": label has no prototype");
}

double finite_or_throw(double v, std::size_t step) {
    if (!std::isfinite(v)) throw TrainingFailure("loss became non-finite", step);
    return v;
}

} // namespace

std::vector<double> euclidean_interpolate(std::span<const double> x0,
                                          std::span<const double> x1, double t) {
    if (x0.size() != x1.size())
        throw std::invalid_argument("euclidean_interpolate: mismatched dimensions");
    std::vector<double> out(x0.size());
    for (std::size_t j = 0; j < x0.size(); ++j)
        out[j] = (1.0 - t) * x0[j] + t * x1[j];
    return out;
}

std::pair<LorentzPoint, LorentzPoint> sample_pair_states(const LorentzPoint& x0,
                                                         const LorentzPoint& x1,
                                                         double t, double delta,
                                                         Curvature k) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("sample_pair_states: t outside [0, 1]");
    check_delta(delta, "sample_pair_states");
    double tc = std::min(t + delta, 1.0);
    return {geodesic_interpolate(x0, x1, t, k), geodesic_interpolate(x0, x1, tc, k)};
}

LorentzPoint advance_with_velocity(const LorentzPoint& x, const TangentVector& v,
                                   double delta, Curvature k) {
    check_delta(delta, "advance_with_velocity");
    TangentVector w;
    w.base = x;
    w.ambient.reserve(v.ambient.size());
    for (double c : v.ambient) w.ambient.push_back(c * delta);
    return exp_map(w, k);
}

LorentzPoint predicted_next_state(const VelocityNet& net, const LorentzPoint& x_t,
                                  double t, double delta, Curvature k) {
    std::vector<double> g = net.forward(x_t.ambient, t);
    TangentVector v = tangent_project(x_t, g, k);
    return advance_with_velocity(x_t, v, delta, k);
}

double step_loss(const LorentzPoint& x_pred, const LorentzPoint& x_gt, Curvature k) {
    double d = geodesic_distance(x_pred, x_gt, k);
    return d * d;
}

double icd_loss(const LorentzPoint& x_pred, const PrototypeSet& protos, int label,
                double tau, Curvature k) {
    return hyperbolic_contrastive_loss(x_pred, protos, label, tau, k);
}

double composite_batch_loss(const VelocityNet& net,
                            const std::vector<TrainBatchSample>& batch,
                            const PrototypeSet& protos, double delta, double lambda,
                            double tau, Curvature k) {
    if (batch.empty())
        throw std::invalid_argument("composite_batch_loss: empty batch");
    double sum_step = 0.0, sum_icd = 0.0;
    for (const auto& s : batch) {
        LorentzPoint pred = predicted_next_state(net, s.x_t, s.t, delta, k);
        sum_step += step_loss(pred, s.x_next, k);
        sum_icd += icd_loss(pred, protos, s.label, tau, k);
    }
    const double b = static_cast<double>(batch.size());
    return sum_step / b + lambda * (sum_icd / b);
}

double composite_batch_grad(const VelocityNet& net,
                            const std::vector<TrainBatchSample>& batch,
                            const PrototypeSet& protos, double delta, double lambda,
                            double tau, Curvature k, std::span<double> param_grads,
                            double* mean_step, double* mean_icd) {
    if (batch.empty())
        throw std::invalid_argument("composite_batch_grad: empty batch");
    const std::size_t dim = net.config().io_dim;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double sum_step = 0.0, sum_icd = 0.0;

    ad::Tape tape;
    std::vector<double> out_grad(dim);
    for (const auto& s : batch) {
        VelocityActivations act = net.forward_cached(s.x_t.ambient, s.t);

        // The post-network loss chain runs on the tape with the raw outputs
        // as leaves; everything else is held constant. The chain repeats the
        // exact arithmetic of predicted_next_state / step_loss / icd_loss,
        // so primal values match the public API bit for bit.
        tape.clear();
        std::vector<ad::Rev> g;
        g.reserve(dim);
        for (double c : act.out) g.push_back(ad::make_rev(tape, c));
        std::vector<ad::Rev> xt = lift_const(tape, s.x_t.ambient);
        ad::Rev kap = ad::make_rev(tape, k.kappa);

        std::vector<ad::Rev> v = geom::tangent_project_g(xt, g, kap);
        for (auto& c : v) c = c * delta;
        std::vector<ad::Rev> y = geom::exp_map_g(xt, v, kap);
        std::vector<ad::Rev> pred = geom::reproject_g(y, kap);

        std::vector<ad::Rev> xn = lift_const(tape, s.x_next.ambient);
        ad::Rev dstep = geom::geodesic_distance_g(pred, xn, kap);
        ad::Rev l_step = dstep * dstep;

        std::vector<ad::Rev> dists;
        dists.reserve(protos.points.size());
        for (const auto& p : protos.points) {
            std::vector<ad::Rev> pp = lift_const(tape, p.ambient);
            dists.push_back(geom::geodesic_distance_g(pred, pp, kap));
        }
        ad::Rev l_icd = geom::contrastive_from_distances(
            dists, static_cast<std::size_t>(s.label), tau);

        ad::Rev l_total = l_step + lambda * l_icd;
        sum_step += ad::value_of(l_step);
        sum_icd += ad::value_of(l_icd);

        tape.backward(l_total.id);
        for (std::size_t j = 0; j < dim; ++j)
            out_grad[j] = tape.gradient(g[j].id) * inv_b;
        net.backward(act, out_grad, param_grads);
    }

    const double b = static_cast<double>(batch.size());
    double ms = sum_step / b, mi = sum_icd / b;
    if (mean_step) *mean_step = ms;
    if (mean_icd) *mean_icd = mi;
    return ms + lambda * mi;
}

FlowTrainResult train_flow(const AlignedEmbedding& emb, const FlowTrainConfig& cfg) {
    const std::size_t m = emb.image_points.size();
    if (m == 0) throw std::invalid_argument("train_flow: no image points");
    if (emb.labels.size() != m)
        throw std::invalid_argument("train_flow: label count mismatch");
    if (emb.prototypes.points.empty())
        throw std::invalid_argument("train_flow: need at least one prototype");
    check_delta(cfg.delta, "train_flow");
    if (!(cfg.delta < 1.0))
        throw std::invalid_argument("train_flow: delta must be < 1");
    if (cfg.epochs == 0 || cfg.batch == 0)
        throw std::invalid_argument("train_flow: epochs and batch must be positive");
    Curvature k(emb.kappa);

    // Pre-resolve each sample's prototype index once.
    std::vector<int> pidx(m);
    for (std::size_t i = 0; i < m; ++i)
        pidx[i] = static_cast<int>(proto_index(emb.prototypes, emb.labels[i], "train_flow"));

    VelocityNetConfig ncfg{emb.dim + 1, cfg.width, cfg.blocks, cfg.time_dim};
    VelocityNet net(ncfg, cfg.seed);

    AdamWConfig ocfg;
    ocfg.lr = cfg.lr;
    ocfg.weight_decay = cfg.weight_decay;
    AdamW opt(net.param_count(), ocfg);
    const std::size_t horizon = cfg.horizon ? cfg.horizon : cfg.epochs;

    std::mt19937_64 rng(cfg.seed + 1);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    FlowTrace trace;
    std::vector<double> grads(net.param_count());
    std::vector<TrainBatchSample> batch(cfg.batch);
    for (std::size_t step = 0; step < cfg.epochs; ++step) {
        for (std::size_t bi = 0; bi < cfg.batch; ++bi) {
            std::size_t i = pick(rng);
            double t = unit(rng);
            TrainBatchSample& s = batch[bi];
            s.x0 = emb.image_points[i];
            s.x1 = emb.prototypes.points[static_cast<std::size_t>(pidx[i])];
            s.t = t;
            auto states = sample_pair_states(s.x0, s.x1, t, cfg.delta, k);
            s.x_t = std::move(states.first);
            s.x_next = std::move(states.second);
            s.label = pidx[i];
        }
        std::fill(grads.begin(), grads.end(), 0.0);
        double ms = 0.0, mi = 0.0;
        composite_batch_grad(net, batch, emb.prototypes, cfg.delta, cfg.lambda,
                             cfg.tau, k, grads, &ms, &mi);
        double total = finite_or_throw(ms + cfg.lambda * mi, step);
        double scale = cosine_lr_scale(step, horizon);
        opt.step(net.params(), grads, scale);
        trace.step_loss.push_back(ms);
        trace.icd_loss.push_back(mi);
        trace.total.push_back(total);
        trace.lr.push_back(cfg.lr * scale);
    }
    return FlowTrainResult{std::move(net), std::move(trace)};
}

FlowTrainResult train_euclidean_baseline(const std::vector<std::vector<double>>& features,
                                         const std::vector<int>& labels,
                                         const std::vector<std::vector<double>>& prototypes,
                                         const FlowTrainConfig& cfg) {
    const std::size_t m = features.size();
    if (m == 0) throw std::invalid_argument("train_euclidean_baseline: no features");
    if (labels.size() != m)
        throw std::invalid_argument("train_euclidean_baseline: label count mismatch");
    if (prototypes.empty())
        throw std::invalid_argument("train_euclidean_baseline: need at least one prototype");
    const std::size_t n = features[0].size();
    for (const auto& f : features)
        if (f.size() != n)
            throw std::invalid_argument("train_euclidean_baseline: ragged features");
    for (const auto& p : prototypes)
        if (p.size() != n)
            throw std::invalid_argument("train_euclidean_baseline: prototype width mismatch");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= prototypes.size())
            throw std::invalid_argument("train_euclidean_baseline: label out of range");
    check_delta(cfg.delta, "train_euclidean_baseline");
    if (!(cfg.delta < 1.0))
        throw std::invalid_argument("train_euclidean_baseline: delta must be < 1");
    if (cfg.epochs == 0 || cfg.batch == 0)
        throw std::invalid_argument("train_euclidean_baseline: epochs and batch must be positive");

    VelocityNetConfig ncfg{n, cfg.width, cfg.blocks, cfg.time_dim};
    VelocityNet net(ncfg, cfg.seed);

    AdamWConfig ocfg;
    ocfg.lr = cfg.lr;
    ocfg.weight_decay = cfg.weight_decay;
    AdamW opt(net.param_count(), ocfg);
    const std::size_t horizon = cfg.horizon ? cfg.horizon : cfg.epochs;

    std::mt19937_64 rng(cfg.seed + 1);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    FlowTrace trace;
    std::vector<double> grads(net.param_count());
    std::vector<double> x_t(n), x_gt(n), pred(n), out_grad(n), sm(prototypes.size());
    const double inv_b = 1.0 / static_cast<double>(cfg.batch);
    for (std::size_t step = 0; step < cfg.epochs; ++step) {
        std::fill(grads.begin(), grads.end(), 0.0);
        double sum_step = 0.0, sum_icd = 0.0;
        for (std::size_t bi = 0; bi < cfg.batch; ++bi) {
            std::size_t i = pick(rng);
            double t = unit(rng);
            double tc = std::min(t + cfg.delta, 1.0);
            const auto& x0 = features[i];
            const auto& x1 = prototypes[static_cast<std::size_t>(labels[i])];
            x_t = euclidean_interpolate(x0, x1, t);
            x_gt = euclidean_interpolate(x0, x1, tc);
            VelocityActivations act = net.forward_cached(x_t, t);
            double l_step = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                pred[j] = x_t[j] + cfg.delta * act.out[j];
                double r = pred[j] - x_gt[j];
                l_step += r * r;
                out_grad[j] = 2.0 * r * cfg.delta * inv_b;
            }
            sum_step += l_step;
            if (cfg.baseline_icd) {
                // Euclidean mirror of the contrastive term: cross entropy of
                // softmax(-|pred - p_c| / tau) against the true class.
                std::size_t nc = prototypes.size();
                std::vector<double> dist(nc);
                for (std::size_t c = 0; c < nc; ++c) {
                    double q = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        double r = pred[j] - prototypes[c][j];
                        q += r * r;
                    }
                    dist[c] = std::sqrt(q);
                }
                double mx = -dist[0] / cfg.tau;
                for (std::size_t c = 1; c < nc; ++c)
                    mx = std::max(mx, -dist[c] / cfg.tau);
                double z = 0.0;
                for (std::size_t c = 0; c < nc; ++c)
                    z += std::exp(-dist[c] / cfg.tau - mx);
                std::size_t y = static_cast<std::size_t>(labels[i]);
                sum_icd += (std::log(z) + mx) - (-dist[y] / cfg.tau);
                for (std::size_t c = 0; c < nc; ++c)
                    sm[c] = std::exp(-dist[c] / cfg.tau - mx) / z;
                // d(icd)/d(pred_j), chain through d(icd)/d(dist_c)
                for (std::size_t c = 0; c < nc; ++c) {
                    double dl_dd = (((c == y) ? 1.0 : 0.0) - sm[c]) / cfg.tau;
                    double denom = std::max(dist[c], 1e-12);
                    for (std::size_t j = 0; j < n; ++j)
                        out_grad[j] += cfg.lambda * dl_dd *
                                       (pred[j] - prototypes[c][j]) / denom *
                                       cfg.delta * inv_b;
                }
            }
            net.backward(act, out_grad, grads);
        }
        const double b = static_cast<double>(cfg.batch);
        double ms = sum_step / b, mi = sum_icd / b;
        double total = finite_or_throw(ms + cfg.lambda * mi, step);
        double scale = cosine_lr_scale(step, horizon);
        opt.step(net.params(), grads, scale);
        trace.step_loss.push_back(ms);
        trace.icd_loss.push_back(mi);
        trace.total.push_back(total);
        trace.lr.push_back(cfg.lr * scale);
    }
    return FlowTrainResult{std::move(net), std::move(trace)};
}

void write_loss_trace_csv(const std::string& path, const FlowTrace& trace) {
    std::ofstream out(path);
    if (!out) throw FormatError("write_loss_trace_csv: cannot open " + path, 0);
    out << "step,L_step,L_icd,total,lr\n";
    char buf[160];
    for (std::size_t i = 0; i < trace.total.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", i,
                      trace.step_loss[i], trace.icd_loss[i], trace.total[i],
                      trace.lr[i]);
        out << buf;
    }
    if (!out) throw FormatError("write_loss_trace_csv: write failed", 0);
}

FlowTrace read_loss_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("read_loss_trace_csv: cannot open " + path, 0);
    std::string line;
    if (!std::getline(in, line) || line != "step,L_step,L_icd,total,lr")
        throw FormatError("read_loss_trace_csv: bad header", 0);
    FlowTrace trace;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(row, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != 5)
            throw FormatError("read_loss_trace_csv: bad row", 0);
        trace.step_loss.push_back(vals[1]);
        trace.icd_loss.push_back(vals[2]);
        trace.total.push_back(vals[3]);
        trace.lr.push_back(vals[4]);
    }
    return trace;
}

} // namespace hfm
