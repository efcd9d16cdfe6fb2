#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hfm {

struct AdamWConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

// AdamW with bias correction and decoupled weight decay. The caller supplies
// a per-step multiplier so any schedule can be layered on top.
class AdamW {
public:
    AdamW(std::size_t n, AdamWConfig cfg = {});

    void step(std::span<double> params, std::span<const double> grads,
              double lr_scale = 1.0);

    std::size_t steps_taken() const { return t_; }

private:
    AdamWConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
};

// Cosine annealing from 1 at step 0 to 0 at step >= horizon.
double cosine_lr_scale(std::size_t step, std::size_t horizon);

} // namespace hfm
