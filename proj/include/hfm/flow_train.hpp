#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hfm/alignment.hpp"
#include "hfm/lorentz.hpp"
#include "hfm/prototypes.hpp"
#include "hfm/velocity_net.hpp"

namespace hfm {

struct FlowTrainConfig {
    double delta = 0.1;  // step size of the discrete transport, also the
                         // offset between the two supervised geodesic states
    double lambda = 0.1; // weight of the contrastive term at predicted states
    double tau = 0.1;    // its temperature
    std::size_t epochs = 400; // optimizer steps; each draws one fresh batch
    std::size_t batch = 32;
    double lr = 2e-4;
    std::size_t horizon = 0; // cosine-annealing horizon in steps; 0 = epochs
    double weight_decay = 1e-4;
    std::size_t width = 256;
    std::size_t blocks = 3;
    std::size_t time_dim = 64;
    std::uint64_t seed = 0;
    bool baseline_icd = false; // add a Euclidean contrastive term to the
                               // baseline trainer for parity experiments
};

// One supervised pair of geodesic states between an image point and its
// ground-truth prototype. label indexes the prototype set.
struct TrainBatchSample {
    LorentzPoint x0;
    LorentzPoint x1;
    double t = 0.0;
    LorentzPoint x_t;
    LorentzPoint x_next;
    int label = 0;
};

// Per-step batch means. The recorded total is formed as
// step_loss + lambda * icd_loss, so the decomposition is exact row by row.
struct FlowTrace {
    std::vector<double> step_loss;
    std::vector<double> icd_loss;
    std::vector<double> total;
    std::vector<double> lr;
};

struct FlowTrainResult {
    VelocityNet net;
    FlowTrace trace;
};

// (1-t) x0 + t x1, the straight-line path used by the Euclidean baseline.
std::vector<double> euclidean_interpolate(std::span<const double> x0,
                                          std::span<const double> x1, double t);

// States at t and min(t+delta, 1) on the geodesic from x0 to x1.
std::pair<LorentzPoint, LorentzPoint> sample_pair_states(const LorentzPoint& x0,
                                                         const LorentzPoint& x1,
                                                         double t, double delta,
                                                         Curvature k);

// exp_x(delta * v) for an already-tangent velocity. Training supervision and
// Euler transport both go through here, so their states are bit-identical.
LorentzPoint advance_with_velocity(const LorentzPoint& x, const TangentVector& v,
                                   double delta, Curvature k);

// Projects the raw network output onto the tangent space at x_t and advances
// one step along it. The result lies on the manifold.
LorentzPoint predicted_next_state(const VelocityNet& net, const LorentzPoint& x_t,
                                  double t, double delta, Curvature k);

// Squared geodesic distance between prediction and ground truth.
double step_loss(const LorentzPoint& x_pred, const LorentzPoint& x_gt, Curvature k);

// Contrastive loss of the predicted intermediate state against all
// prototypes; same kernel as hyperbolic_contrastive_loss, bit for bit.
double icd_loss(const LorentzPoint& x_pred, const PrototypeSet& protos, int label,
                double tau, Curvature k);

// Mean step loss + lambda * mean contrastive loss over a prepared batch,
// exactly as optimized by train_flow.
double composite_batch_loss(const VelocityNet& net,
                            const std::vector<TrainBatchSample>& batch,
                            const PrototypeSet& protos, double delta, double lambda,
                            double tau, Curvature k);

// Same value, and accumulates its gradient w.r.t. every network parameter
// into param_grads. The two component means are reported through the
// optional out-pointers so callers can log the exact decomposition.
double composite_batch_grad(const VelocityNet& net,
                            const std::vector<TrainBatchSample>& batch,
                            const PrototypeSet& protos, double delta, double lambda,
                            double tau, Curvature k, std::span<double> param_grads,
                            double* mean_step = nullptr, double* mean_icd = nullptr);

// Trains the velocity field on the aligned support set. Each step draws
// cfg.batch (sample index, t) pairs uniformly with replacement from
// std::mt19937_64 seeded with cfg.seed + 1 (per slot: one uniform_int index
// draw, then one uniform_real t draw from [0,1)), supervises the predicted
// next state against the geodesic ground truth, and applies one AdamW update
// under cosine annealing. The network is seeded with cfg.seed. Deterministic.
// Throws TrainingFailure if the loss turns non-finite.
FlowTrainResult train_flow(const AlignedEmbedding& emb, const FlowTrainConfig& cfg);

// Euclidean control with everything matched except the geometry: straight
// lines x_t = (1-t) x0 + t x1 between projected features and prototypes,
// squared-Euclidean step loss, same architecture, seeds, draw order,
// optimizer, and schedule. The contrastive term is included only when
// cfg.baseline_icd is set; the recorded icd column is 0 otherwise.
FlowTrainResult train_euclidean_baseline(const std::vector<std::vector<double>>& features,
                                         const std::vector<int>& labels,
                                         const std::vector<std::vector<double>>& prototypes,
                                         const FlowTrainConfig& cfg);

// CSV with header step,L_step,L_icd,total,lr and one row per optimizer
// step, printed with enough digits that rereading recovers every double
// exactly.
void write_loss_trace_csv(const std::string& path, const FlowTrace& trace);
FlowTrace read_loss_trace_csv(const std::string& path);

} // namespace hfm
