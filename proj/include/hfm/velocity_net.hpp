#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hfm {

struct VelocityNetConfig {
    std::size_t io_dim = 0; // ambient width of inputs and outputs
    std::size_t width = 256;
    std::size_t blocks = 3;
    std::size_t time_dim = 64;
};

// Sinusoidal features of t: interleaved sin/cos pairs over geometrically
// spaced frequencies. All components lie in [-1, 1].
std::vector<double> time_embedding(double t, std::size_t time_dim);

// Everything the backward pass needs from one forward evaluation.
struct VelocityActivations {
    std::vector<double> input;
    std::vector<double> embed;
    std::vector<std::vector<double>> h;   // hidden stream, blocks+1 entries
    std::vector<std::vector<double>> pre; // per-block pre-activation
    std::vector<std::vector<double>> z;   // per-block activation
    std::vector<double> out;
};

// Residual MLP with timestep conditioning:
//   h0 = Ws x + bs
//   h_{b+1} = h_b + W2 silu(W1 h_b + U e(t) + b1) + b2
//   out = Wo h_B + bo
// Parameters live in one flat buffer in that order. The output layer is
// zero-initialized by default so the untrained field is identically zero.
class VelocityNet {
public:
    VelocityNet(VelocityNetConfig cfg, std::uint64_t seed, bool zero_final = true);

    const VelocityNetConfig& config() const { return cfg_; }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }
    std::size_t param_count() const { return params_.size(); }

    std::vector<double> forward(std::span<const double> x, double t) const;
    VelocityActivations forward_cached(std::span<const double> x, double t) const;

    // Accumulates parameter gradients for one sample given d(loss)/d(out).
    void backward(const VelocityActivations& act, std::span<const double> out_grad,
                  std::span<double> param_grads) const;

    // Test hook: zeroes every residual branch so blocks pass the stream through.
    void zero_residual_branches();

    static std::size_t param_count_for(const VelocityNetConfig& cfg);

private:
    VelocityNetConfig cfg_;
    std::vector<double> params_;

    // offsets into the flat buffer
    std::size_t stem_w() const { return 0; }
    std::size_t stem_b() const { return cfg_.width * cfg_.io_dim; }
    std::size_t block_base(std::size_t b) const;
    std::size_t blk_w1(std::size_t b) const { return block_base(b); }
    std::size_t blk_b1(std::size_t b) const { return block_base(b) + cfg_.width * cfg_.width; }
    std::size_t blk_u(std::size_t b) const { return blk_b1(b) + cfg_.width; }
    std::size_t blk_w2(std::size_t b) const { return blk_u(b) + cfg_.width * cfg_.time_dim; }
    std::size_t blk_b2(std::size_t b) const { return blk_w2(b) + cfg_.width * cfg_.width; }
    std::size_t out_w() const { return block_base(cfg_.blocks); }
    std::size_t out_b() const { return out_w() + cfg_.io_dim * cfg_.width; }

    friend void save_checkpoint(const VelocityNet& net, const std::string& path);
};

void save_checkpoint(const VelocityNet& net, const std::string& path);
VelocityNet load_checkpoint(const std::string& path);

} // namespace hfm
