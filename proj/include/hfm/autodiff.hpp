#pragma once

#include <cstdint>
#include <vector>

namespace hfm::ad {

// Minimal reverse-mode tape. Nodes are recorded in evaluation order with
// primal values computed eagerly; backward() sweeps the tape once in reverse.
// The op set is exactly what the geometric losses need.
enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    AddC,  // x + aux
    MulC,  // x * aux
    RSubC, // aux - x
    Neg,
    Sqrt,
    Exp,
    Log,
    Sinh,
    Cosh,
    Asin,
    Acos,
    Acosh,
    RDivC, // aux / x
    MaxC,  // max(x, aux), subgradient 0 when clamped
    MinC,  // min(x, aux), subgradient 0 when clamped
};

struct Node {
    Op op;
    std::int32_t a = -1;
    std::int32_t b = -1;
    double aux = 0.0;
};

class Tape {
public:
    std::int32_t leaf(double value);
    std::int32_t unary(Op op, std::int32_t a, double value, double aux = 0.0);
    std::int32_t binary(Op op, std::int32_t a, std::int32_t b, double value);

    double value(std::int32_t id) const { return val_[static_cast<std::size_t>(id)]; }
    double gradient(std::int32_t id) const { return grad_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return nodes_.size(); }

    // Seeds d(root)/d(root) = 1 and accumulates gradients into every node.
    void backward(std::int32_t root);

    void clear();

private:
    std::vector<Node> nodes_;
    std::vector<double> val_;
    std::vector<double> grad_;
};

// Scalar handle recording onto a tape. Cheap to copy; operators below build
// the graph as a side effect of ordinary-looking arithmetic.
struct Rev {
    Tape* tape = nullptr;
    std::int32_t id = -1;
};

inline Rev make_rev(Tape& t, double value) { return {&t, t.leaf(value)}; }

inline double value_of(double x) { return x; }
inline double value_of(const Rev& x) { return x.tape->value(x.id); }

Rev operator+(const Rev& a, const Rev& b);
Rev operator-(const Rev& a, const Rev& b);
Rev operator*(const Rev& a, const Rev& b);
Rev operator/(const Rev& a, const Rev& b);
Rev operator+(const Rev& a, double c);
Rev operator+(double c, const Rev& a);
Rev operator-(const Rev& a, double c);
Rev operator-(double c, const Rev& a);
Rev operator*(const Rev& a, double c);
Rev operator*(double c, const Rev& a);
Rev operator/(const Rev& a, double c);
Rev operator/(double c, const Rev& a);
Rev operator-(const Rev& a);

Rev sqrt(const Rev& x);
Rev exp(const Rev& x);
Rev log(const Rev& x);
Rev sinh(const Rev& x);
Rev cosh(const Rev& x);
Rev asin(const Rev& x);
Rev acos(const Rev& x);
Rev acosh(const Rev& x);
Rev clamp_min(const Rev& x, double lo);
Rev clamp_max(const Rev& x, double hi);
Rev clamp(const Rev& x, double lo, double hi);
Rev relu(const Rev& x);

// double counterparts so templated code works for both scalar types
inline double clamp_min(double x, double lo) { return x < lo ? lo : x; }
inline double clamp_max(double x, double hi) { return x > hi ? hi : x; }
inline double clamp(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

} // namespace hfm::ad
