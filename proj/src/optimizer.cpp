#include "hfm/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hfm {

AdamW::AdamW(std::size_t n, AdamWConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {
    if (cfg.lr <= 0.0 || cfg.eps <= 0.0 || cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 ||
        cfg.beta2 < 0.0 || cfg.beta2 >= 1.0 || cfg.weight_decay < 0.0)
        throw std::invalid_argument("AdamW: bad hyperparameters");
}

void AdamW::step(std::span<double> params, std::span<const double> grads,
                 double lr_scale) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw std::invalid_argument("AdamW: parameter size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double lr = cfg_.lr * lr_scale;
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                           cfg_.weight_decay * params[i]);
    }
}

double cosine_lr_scale(std::size_t step, std::size_t horizon) {
    if (horizon == 0) throw std::invalid_argument("cosine_lr_scale: zero horizon");
    if (step >= horizon) return 0.0;
    const double frac = static_cast<double>(step) / static_cast<double>(horizon);
    return 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

} // namespace hfm
