#include "hfm/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace hfm::ad {

namespace {
constexpr double kDenomGuard = 1e-24;
}

std::int32_t Tape::leaf(double value) {
    nodes_.push_back({Op::Leaf, -1, -1, 0.0});
    val_.push_back(value);
    return static_cast<std::int32_t>(nodes_.size() - 1);
}

std::int32_t Tape::unary(Op op, std::int32_t a, double value, double aux) {
    nodes_.push_back({op, a, -1, aux});
    val_.push_back(value);
    return static_cast<std::int32_t>(nodes_.size() - 1);
}

std::int32_t Tape::binary(Op op, std::int32_t a, std::int32_t b, double value) {
    nodes_.push_back({op, a, b, 0.0});
    val_.push_back(value);
    return static_cast<std::int32_t>(nodes_.size() - 1);
}

void Tape::clear() {
    nodes_.clear();
    val_.clear();
    grad_.clear();
}

void Tape::backward(std::int32_t root) {
    grad_.assign(nodes_.size(), 0.0);
    if (root < 0 || static_cast<std::size_t>(root) >= nodes_.size())
        throw std::invalid_argument("backward: root id out of range");
    grad_[static_cast<std::size_t>(root)] = 1.0;

    for (std::int32_t i = static_cast<std::int32_t>(nodes_.size()) - 1; i >= 0; --i) {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        const double g = grad_[static_cast<std::size_t>(i)];
        if (g == 0.0 || n.op == Op::Leaf) continue;
        const double va = val_[static_cast<std::size_t>(n.a)];
        switch (n.op) {
        case Op::Add:
            grad_[static_cast<std::size_t>(n.a)] += g;
            grad_[static_cast<std::size_t>(n.b)] += g;
            break;
        case Op::Sub:
            grad_[static_cast<std::size_t>(n.a)] += g;
            grad_[static_cast<std::size_t>(n.b)] -= g;
            break;
        case Op::Mul:
            grad_[static_cast<std::size_t>(n.a)] += g * val_[static_cast<std::size_t>(n.b)];
            grad_[static_cast<std::size_t>(n.b)] += g * va;
            break;
        case Op::Div: {
            const double vb = val_[static_cast<std::size_t>(n.b)];
            grad_[static_cast<std::size_t>(n.a)] += g / vb;
            grad_[static_cast<std::size_t>(n.b)] -= g * va / (vb * vb);
            break;
        }
        case Op::AddC:
            grad_[static_cast<std::size_t>(n.a)] += g;
            break;
        case Op::MulC:
            grad_[static_cast<std::size_t>(n.a)] += g * n.aux;
            break;
        case Op::RSubC:
            grad_[static_cast<std::size_t>(n.a)] -= g;
            break;
        case Op::Neg:
            grad_[static_cast<std::size_t>(n.a)] -= g;
            break;
        case Op::Sqrt: {
            const double v = val_[static_cast<std::size_t>(i)];
            if (v > 0.0) grad_[static_cast<std::size_t>(n.a)] += g * 0.5 / v;
            break;
        }
        case Op::Exp:
            grad_[static_cast<std::size_t>(n.a)] += g * val_[static_cast<std::size_t>(i)];
            break;
        case Op::Log:
            grad_[static_cast<std::size_t>(n.a)] += g / va;
            break;
        case Op::Sinh:
            grad_[static_cast<std::size_t>(n.a)] += g * std::cosh(va);
            break;
        case Op::Cosh:
            grad_[static_cast<std::size_t>(n.a)] += g * std::sinh(va);
            break;
        case Op::Asin:
            grad_[static_cast<std::size_t>(n.a)] +=
                g / std::sqrt(std::max(1.0 - va * va, kDenomGuard));
            break;
        case Op::Acos:
            grad_[static_cast<std::size_t>(n.a)] -=
                g / std::sqrt(std::max(1.0 - va * va, kDenomGuard));
            break;
        case Op::Acosh:
            grad_[static_cast<std::size_t>(n.a)] +=
                g / std::sqrt(std::max(va * va - 1.0, kDenomGuard));
            break;
        case Op::RDivC:
            grad_[static_cast<std::size_t>(n.a)] -= g * n.aux / (va * va);
            break;
        case Op::MaxC:
            if (va > n.aux) grad_[static_cast<std::size_t>(n.a)] += g;
            break;
        case Op::MinC:
            if (va < n.aux) grad_[static_cast<std::size_t>(n.a)] += g;
            break;
        case Op::Leaf:
            break;
        }
    }
}

namespace {
Tape& tape_of(const Rev& a, const Rev& b) {
    if (a.tape != b.tape) throw std::invalid_argument("Rev operands from different tapes");
    return *a.tape;
}
} // namespace

Rev operator+(const Rev& a, const Rev& b) {
    Tape& t = tape_of(a, b);
    return {&t, t.binary(Op::Add, a.id, b.id, t.value(a.id) + t.value(b.id))};
}
Rev operator-(const Rev& a, const Rev& b) {
    Tape& t = tape_of(a, b);
    return {&t, t.binary(Op::Sub, a.id, b.id, t.value(a.id) - t.value(b.id))};
}
Rev operator*(const Rev& a, const Rev& b) {
    Tape& t = tape_of(a, b);
    return {&t, t.binary(Op::Mul, a.id, b.id, t.value(a.id) * t.value(b.id))};
}
Rev operator/(const Rev& a, const Rev& b) {
    Tape& t = tape_of(a, b);
    return {&t, t.binary(Op::Div, a.id, b.id, t.value(a.id) / t.value(b.id))};
}
Rev operator+(const Rev& a, double c) {
    return {a.tape, a.tape->unary(Op::AddC, a.id, value_of(a) + c, c)};
}
Rev operator+(double c, const Rev& a) { return a + c; }
Rev operator-(const Rev& a, double c) {
    return {a.tape, a.tape->unary(Op::AddC, a.id, value_of(a) - c, -c)};
}
Rev operator-(double c, const Rev& a) {
    return {a.tape, a.tape->unary(Op::RSubC, a.id, c - value_of(a), c)};
}
Rev operator*(const Rev& a, double c) {
    return {a.tape, a.tape->unary(Op::MulC, a.id, value_of(a) * c, c)};
}
Rev operator*(double c, const Rev& a) { return a * c; }
Rev operator/(const Rev& a, double c) {
    return {a.tape, a.tape->unary(Op::MulC, a.id, value_of(a) / c, 1.0 / c)};
}
Rev operator/(double c, const Rev& a) {
    return {a.tape, a.tape->unary(Op::RDivC, a.id, c / value_of(a), c)};
}
Rev operator-(const Rev& a) {
    return {a.tape, a.tape->unary(Op::Neg, a.id, -value_of(a))};
}

Rev sqrt(const Rev& x) {
    return {x.tape, x.tape->unary(Op::Sqrt, x.id, std::sqrt(value_of(x)))};
}
Rev exp(const Rev& x) {
    return {x.tape, x.tape->unary(Op::Exp, x.id, std::exp(value_of(x)))};
}
Rev log(const Rev& x) {
    return {x.tape, x.tape->unary(Op::Log, x.id, std::log(value_of(x)))};
}
Rev sinh(const Rev& x) {
    return {x.tape, x.tape->unary(Op::Sinh, x.id, std::sinh(value_of(x)))};
}
Rev cosh(const Rev& x) {
    return {x.tape, x.tape->unary(Op::Cosh, x.id, std::cosh(value_of(x)))};
}
Rev asin(const Rev& x) {
    return {x.tape, x.tape->unary(Op::Asin, x.id, std::asin(value_of(x)))};
}
Rev acos(const Rev& x) {
    return {x.tape, x.tape->unary(Op::Acos, x.id, std::acos(value_of(x)))};
}
Rev acosh(const Rev& x) {
    return {x.tape, x.tape->unary(Op::Acosh, x.id, std::acosh(value_of(x)))};
}
Rev clamp_min(const Rev& x, double lo) {
    return {x.tape, x.tape->unary(Op::MaxC, x.id, clamp_min(value_of(x), lo), lo)};
}
Rev clamp_max(const Rev& x, double hi) {
    return {x.tape, x.tape->unary(Op::MinC, x.id, clamp_max(value_of(x), hi), hi)};
}
Rev clamp(const Rev& x, double lo, double hi) { return clamp_max(clamp_min(x, lo), hi); }
Rev relu(const Rev& x) { return clamp_min(x, 0.0); }

} // namespace hfm::ad
