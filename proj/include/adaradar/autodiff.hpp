#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "adaradar/tensor.hpp"

namespace adaradar {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the reverse-mode graph. `backward` reads `grad` and
/// accumulates into the parents' gradients.
struct Node {
    Tensor value;
    Tensor grad; // empty until something flows into it
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward;

    Tensor& grad_buffer();
};

/// Handle to a graph node. Copies share the node.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    bool defined() const { return static_cast<bool>(node_); }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
    std::size_t numel() const { return node_->value.numel(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }

    bool has_grad() const { return node_ && !node_->grad.empty(); }
    /// Gradient buffer; zeros of the value's shape if nothing has flowed yet.
    Tensor grad() const;
    void zero_grad() { node_->grad = Tensor(); }

    double item() const { return node_->value.item(); }

    /// Reverse sweep from this scalar node with seed gradient 1.
    void backward() const;

    const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

/// Builds a node for `value` whose parents are `inputs`. The backward
/// closure is recorded only when some input requires a gradient.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

inline Var constant(Tensor value) { return Var(std::move(value), false); }
Var detach(const Var& x);

// Elementwise arithmetic with numpy-style broadcasting.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }

Var add_scalar(const Var& x, double c);
Var mul_scalar(const Var& x, double c);
Var neg(const Var& x);
/// c - x
Var rsub_scalar(double c, const Var& x);

Var log(const Var& x);
Var exp(const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var square(const Var& x);
/// Clamps to [lo, hi]; gradient is zero where the clamp is active.
Var clamp(const Var& x, double lo, double hi);

/// Elementwise map with a caller-supplied derivative.
Var map(const Var& x, std::function<double(double)> f, std::function<double(double)> df);

/// Forward value is `hard`, backward passes the gradient to `soft` unchanged.
Var straight_through(const Tensor& hard, const Var& soft);

Var sum(const Var& x);
Var mean(const Var& x);
/// Sum over one axis; the axis is removed (rank-1 inputs reduce to shape {1}).
Var sum_axis(const Var& x, std::size_t axis);

struct MaxResult {
    Var values;
    std::vector<std::size_t> argmax; // index along the reduced axis, per output element
};
/// Max over one axis with the axis removed. Ties resolve to the lowest
/// index; backward routes the full upstream gradient to that element.
MaxResult max_over_axis(const Var& x, std::size_t axis);

/// 2D matrix product [M x K] . [K x N].
Var matmul(const Var& a, const Var& b);

Var reshape(const Var& x, Shape shape);
Var permute(const Var& x, const std::vector<std::size_t>& axes);
Var transpose(const Var& x); // rank-2 only

Var concat(const std::vector<Var>& xs, std::size_t axis);
Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end);
std::vector<Var> split(const Var& x, std::size_t axis, const std::vector<std::size_t>& sizes);

Var softmax_lastdim(const Var& x);

/// Gathers fractional positions along `axis` by linear interpolation.
/// Positions are clamped to [0, dim-1]; the output's extent along `axis`
/// equals positions.size(). Differentiable in `x` and in `positions`
/// (right derivative at integer positions, zero where clamped).
Var linear_interp_gather(const Var& x, std::size_t axis, const Var& positions);
Var linear_interp_gather(const Var& x, std::size_t axis, std::span<const double> positions);

/// Cross-correlation of x [C x H x W] with w [O x C x kh x kw] plus
/// optional bias [O]; zero padding.
Var conv2d(const Var& x, const Var& w, const Var& bias, std::size_t stride, std::size_t pad);

enum class ResizeMode { Nearest, Linear };
/// Resizes the two trailing axes of x [C x H x W] (half-pixel centres).
Var resize2d(const Var& x, std::size_t out_h, std::size_t out_w, ResizeMode mode);

} // namespace adaradar
