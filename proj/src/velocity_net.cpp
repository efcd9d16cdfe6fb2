#include "hfm/velocity_net.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "hfm/binary_io.hpp"

namespace hfm {

namespace {

// Frequency ladder for the sinusoidal time features. t lives in [0,1] and the
// integrator takes O(10) steps, so a 50 rad cap resolves every step width
// while keeping |d(out)/dt| small enough that a 1e-6 nudge in t moves the
// output by far less than 1e-3 even for fully randomized parameters.
constexpr double kOmegaMin = 1.0;
constexpr double kOmegaMax = 50.0;

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
    double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

// y = W x + b, W row-major (rows x cols)
void affine(const double* w, const double* b, const double* x, double* y,
            std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        double acc = b ? b[i] : 0.0;
        const double* row = w + i * cols;
        for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

// out += W^T g
void matvec_t_add(const double* w, const double* g, double* out, std::size_t rows,
                  std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = w + i * cols;
        const double gi = g[i];
        for (std::size_t j = 0; j < cols; ++j) out[j] += row[j] * gi;
    }
}

// W_grad += g x^T
void outer_add(double* wg, const double* g, const double* x, std::size_t rows,
               std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = wg + i * cols;
        const double gi = g[i];
        for (std::size_t j = 0; j < cols; ++j) row[j] += gi * x[j];
    }
}

void vec_add(double* dst, const double* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

} // namespace

std::vector<double> time_embedding(double t, std::size_t time_dim) {
    if (time_dim < 2 || time_dim % 2 != 0)
        throw std::invalid_argument("time_embedding: time_dim must be even and >= 2");
    const std::size_t half = time_dim / 2;
    std::vector<double> e(time_dim);
    for (std::size_t j = 0; j < half; ++j) {
        double frac = half > 1 ? static_cast<double>(j) / static_cast<double>(half - 1) : 0.0;
        double omega = kOmegaMin * std::pow(kOmegaMax / kOmegaMin, frac);
        e[2 * j] = std::sin(omega * t);
        e[2 * j + 1] = std::cos(omega * t);
    }
    return e;
}

std::size_t VelocityNet::block_base(std::size_t b) const {
    const std::size_t per_block = cfg_.width * cfg_.width + cfg_.width +
                                  cfg_.width * cfg_.time_dim + cfg_.width * cfg_.width +
                                  cfg_.width;
    return stem_b() + cfg_.width + b * per_block;
}

std::size_t VelocityNet::param_count_for(const VelocityNetConfig& cfg) {
    const std::size_t per_block = cfg.width * cfg.width + cfg.width +
                                  cfg.width * cfg.time_dim + cfg.width * cfg.width +
                                  cfg.width;
    return cfg.width * cfg.io_dim + cfg.width + cfg.blocks * per_block +
           cfg.io_dim * cfg.width + cfg.io_dim;
}

VelocityNet::VelocityNet(VelocityNetConfig cfg, std::uint64_t seed, bool zero_final)
    : cfg_(cfg) {
    if (cfg.io_dim < 1 || cfg.width < 1 || cfg.time_dim < 2 || cfg.time_dim % 2 != 0)
        throw std::invalid_argument("VelocityNet: bad architecture configuration");
    params_.assign(param_count_for(cfg), 0.0);

    std::mt19937_64 rng(seed);
    auto fill = [&](std::size_t off, std::size_t rows, std::size_t cols) {
        double a = std::sqrt(6.0 / static_cast<double>(cols));
        std::uniform_real_distribution<double> unif(-a, a);
        for (std::size_t i = 0; i < rows * cols; ++i) params_[off + i] = unif(rng);
    };
    fill(stem_w(), cfg_.width, cfg_.io_dim);
    for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        fill(blk_w1(b), cfg_.width, cfg_.width);
        fill(blk_u(b), cfg_.width, cfg_.time_dim);
        fill(blk_w2(b), cfg_.width, cfg_.width);
    }
    if (!zero_final) fill(out_w(), cfg_.io_dim, cfg_.width);
}

VelocityActivations VelocityNet::forward_cached(std::span<const double> x, double t) const {
    if (x.size() != cfg_.io_dim)
        throw std::invalid_argument("VelocityNet: input width mismatch");
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("VelocityNet: t outside [0, 1]");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("VelocityNet: non-finite input");

    const std::size_t w = cfg_.width;
    VelocityActivations act;
    act.input.assign(x.begin(), x.end());
    act.embed = time_embedding(t, cfg_.time_dim);
    act.h.resize(cfg_.blocks + 1);
    act.pre.resize(cfg_.blocks);
    act.z.resize(cfg_.blocks);

    act.h[0].resize(w);
    affine(&params_[stem_w()], &params_[stem_b()], act.input.data(), act.h[0].data(), w,
           cfg_.io_dim);

    for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        act.pre[b].resize(w);
        affine(&params_[blk_w1(b)], &params_[blk_b1(b)], act.h[b].data(),
               act.pre[b].data(), w, w);
        std::vector<double> te(w);
        affine(&params_[blk_u(b)], nullptr, act.embed.data(), te.data(), w, cfg_.time_dim);
        vec_add(act.pre[b].data(), te.data(), w);
        act.z[b].resize(w);
        for (std::size_t i = 0; i < w; ++i) act.z[b][i] = silu(act.pre[b][i]);
        act.h[b + 1].resize(w);
        affine(&params_[blk_w2(b)], &params_[blk_b2(b)], act.z[b].data(),
               act.h[b + 1].data(), w, w);
        vec_add(act.h[b + 1].data(), act.h[b].data(), w);
    }

    act.out.resize(cfg_.io_dim);
    affine(&params_[out_w()], &params_[out_b()], act.h[cfg_.blocks].data(),
           act.out.data(), cfg_.io_dim, w);
    return act;
}

std::vector<double> VelocityNet::forward(std::span<const double> x, double t) const {
    return forward_cached(x, t).out;
}

void VelocityNet::backward(const VelocityActivations& act,
                           std::span<const double> out_grad,
                           std::span<double> param_grads) const {
    if (out_grad.size() != cfg_.io_dim)
        throw std::invalid_argument("VelocityNet: output gradient width mismatch");
    if (param_grads.size() != params_.size())
        throw std::invalid_argument("VelocityNet: parameter gradient size mismatch");

    const std::size_t w = cfg_.width;
    outer_add(&param_grads[out_w()], out_grad.data(), act.h[cfg_.blocks].data(),
              cfg_.io_dim, w);
    vec_add(&param_grads[out_b()], out_grad.data(), cfg_.io_dim);

    std::vector<double> hbar(w, 0.0);
    matvec_t_add(&params_[out_w()], out_grad.data(), hbar.data(), cfg_.io_dim, w);

    std::vector<double> zbar(w), pbar(w);
    for (std::size_t b = cfg_.blocks; b-- > 0;) {
        outer_add(&param_grads[blk_w2(b)], hbar.data(), act.z[b].data(), w, w);
        vec_add(&param_grads[blk_b2(b)], hbar.data(), w);
        zbar.assign(w, 0.0);
        matvec_t_add(&params_[blk_w2(b)], hbar.data(), zbar.data(), w, w);
        for (std::size_t i = 0; i < w; ++i) pbar[i] = zbar[i] * silu_grad(act.pre[b][i]);
        outer_add(&param_grads[blk_w1(b)], pbar.data(), act.h[b].data(), w, w);
        vec_add(&param_grads[blk_b1(b)], pbar.data(), w);
        outer_add(&param_grads[blk_u(b)], pbar.data(), act.embed.data(), w, cfg_.time_dim);
        matvec_t_add(&params_[blk_w1(b)], pbar.data(), hbar.data(), w, w);
    }

    outer_add(&param_grads[stem_w()], hbar.data(), act.input.data(), w, cfg_.io_dim);
    vec_add(&param_grads[stem_b()], hbar.data(), w);
}

void VelocityNet::zero_residual_branches() {
    for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        for (std::size_t i = 0; i < cfg_.width * cfg_.width; ++i)
            params_[blk_w2(b) + i] = 0.0;
        for (std::size_t i = 0; i < cfg_.width; ++i) params_[blk_b2(b) + i] = 0.0;
    }
}

void save_checkpoint(const VelocityNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("save_checkpoint: cannot open " + path, 0);
    io::ByteWriter w(out);
    w.magic("HFMP");
    w.u32(1);
    const auto& cfg = net.config();
    w.u32(static_cast<std::uint32_t>(cfg.blocks));
    w.u32(static_cast<std::uint32_t>(cfg.width));
    w.u32(static_cast<std::uint32_t>(cfg.io_dim));
    w.u32(static_cast<std::uint32_t>(cfg.time_dim));
    for (double p : net.params()) w.f64(p);
    if (!out) throw FormatError("save_checkpoint: write failed", w.offset());
}

VelocityNet load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_checkpoint: cannot open " + path, 0);
    io::ByteReader r(in);
    r.magic("HFMP", "load_checkpoint");
    std::size_t at = r.offset();
    std::uint32_t version = r.u32("load_checkpoint");
    if (version != 1) throw FormatError("load_checkpoint: unsupported version", at);
    VelocityNetConfig cfg;
    cfg.blocks = r.u32("load_checkpoint");
    cfg.width = r.u32("load_checkpoint");
    cfg.io_dim = r.u32("load_checkpoint");
    cfg.time_dim = r.u32("load_checkpoint");
    if (cfg.io_dim < 1 || cfg.width < 1 || cfg.time_dim < 2 || cfg.time_dim % 2 != 0 ||
        cfg.width > (1u << 20) || cfg.blocks > (1u << 16))
        throw FormatError("load_checkpoint: implausible architecture header", 8);
    VelocityNet net(cfg, 0, true);
    auto params = net.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::size_t off = r.offset();
        double v = r.f64("load_checkpoint");
        if (!std::isfinite(v))
            throw FormatError("load_checkpoint: non-finite parameter", off);
        params[i] = v;
    }
    return net;
}

} // namespace hfm
