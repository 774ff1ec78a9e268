#include "adaradar/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace adaradar {

Tensor& Node::grad_buffer()
{
    if (grad.empty()) {
        grad = Tensor(value.shape(), 0.0);
    }
    return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>())
{
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Tensor Var::grad() const
{
    if (node_->grad.empty()) {
        return Tensor(node_->value.shape(), 0.0);
    }
    return node_->grad;
}

void Var::backward() const
{
    if (node_->value.numel() != 1) {
        throw std::logic_error("backward() requires a single-element root, got shape " +
                               shape_str(shape()));
    }
    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    node_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) {
            n->backward(*n);
        }
    }
}

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward)
{
#ifndef NDEBUG
    bool inputs_finite = std::all_of(inputs.begin(), inputs.end(),
                                     [](const Var& v) { return v.value().all_finite(); });
    if (inputs_finite && !value.all_finite()) {
        throw std::domain_error("non-finite value produced from finite inputs");
    }
#endif
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Var& v) { return v.requires_grad(); });
    if (any) {
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (auto& v : inputs) {
            node->parents.push_back(v.node());
        }
        node->backward = std::move(backward);
    }
    return Var(std::move(node));
}

Var detach(const Var& x) { return constant(x.value()); }

namespace {

bool needs(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

void check_axis(const Var& x, std::size_t axis, const char* op)
{
    if (axis >= x.shape().size()) {
        throw std::out_of_range(std::string(op) + ": axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(x.shape()));
    }
}

// outer x n x inner decomposition around one axis.
struct AxisSplit {
    std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis)
{
    AxisSplit r;
    for (std::size_t i = 0; i < axis; ++i) {
        r.outer *= s[i];
    }
    r.n = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) {
        r.inner *= s[i];
    }
    return r;
}

Shape drop_axis(const Shape& s, std::size_t axis)
{
    Shape out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i != axis) {
            out.push_back(s[i]);
        }
    }
    if (out.empty()) {
        out.push_back(1);
    }
    return out;
}

// Per-output-element offsets into each broadcast operand.
struct Broadcast {
    Shape out;
    std::vector<std::size_t> a_off, b_off;
    bool same = false;
};

Broadcast plan_broadcast(const Shape& a, const Shape& b)
{
    Broadcast p;
    if (a == b) {
        p.out = a;
        p.same = true;
        return p;
    }
    std::size_t rank = std::max(a.size(), b.size());
    Shape pa(rank, 1), pb(rank, 1);
    std::copy(a.begin(), a.end(), pa.begin() + (rank - a.size()));
    std::copy(b.begin(), b.end(), pb.begin() + (rank - b.size()));
    p.out.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
            throw std::invalid_argument("cannot broadcast " + shape_str(a) + " with " +
                                        shape_str(b));
        }
        p.out[i] = std::max(pa[i], pb[i]);
    }
    auto strides = [&](const Shape& s) {
        std::vector<std::size_t> st(rank, 0);
        std::size_t acc = 1;
        for (std::size_t i = rank; i-- > 0;) {
            st[i] = s[i] == 1 ? 0 : acc;
            acc *= s[i];
        }
        return st;
    };
    auto sa = strides(pa);
    auto sb = strides(pb);
    std::size_t total = shape_numel(p.out);
    p.a_off.resize(total);
    p.b_off.resize(total);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t oa = 0, ob = 0;
    for (std::size_t k = 0; k < total; ++k) {
        p.a_off[k] = oa;
        p.b_off[k] = ob;
        for (std::size_t i = rank; i-- > 0;) {
            if (++idx[i] < p.out[i]) {
                oa += sa[i];
                ob += sb[i];
                break;
            }
            oa -= sa[i] * (p.out[i] - 1);
            ob -= sb[i] * (p.out[i] - 1);
            idx[i] = 0;
        }
    }
    return p;
}

enum class BinOp { Add, Sub, Mul, Div };

Var binary(const Var& a, const Var& b, BinOp op)
{
    auto plan = std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape()));
    Tensor out(plan->out);
    const auto& av = a.value();
    const auto& bv = b.value();
    std::size_t n = out.numel();
    for (std::size_t k = 0; k < n; ++k) {
        double x = av[plan->same ? k : plan->a_off[k]];
        double y = bv[plan->same ? k : plan->b_off[k]];
        switch (op) {
        case BinOp::Add: out[k] = x + y; break;
        case BinOp::Sub: out[k] = x - y; break;
        case BinOp::Mul: out[k] = x * y; break;
        case BinOp::Div: out[k] = x / y; break;
        }
    }
    return make_result(std::move(out), {a, b}, [plan, op](Node& self) {
        const Tensor& g = self.grad;
        const Tensor& av = self.parents[0]->value;
        const Tensor& bv = self.parents[1]->value;
        std::size_t n = g.numel();
        if (needs(self, 0)) {
            Tensor& ga = self.parents[0]->grad_buffer();
            for (std::size_t k = 0; k < n; ++k) {
                std::size_t ia = plan->same ? k : plan->a_off[k];
                std::size_t ib = plan->same ? k : plan->b_off[k];
                switch (op) {
                case BinOp::Add:
                case BinOp::Sub: ga[ia] += g[k]; break;
                case BinOp::Mul: ga[ia] += g[k] * bv[ib]; break;
                case BinOp::Div: ga[ia] += g[k] / bv[ib]; break;
                }
            }
        }
        if (needs(self, 1)) {
            Tensor& gb = self.parents[1]->grad_buffer();
            for (std::size_t k = 0; k < n; ++k) {
                std::size_t ia = plan->same ? k : plan->a_off[k];
                std::size_t ib = plan->same ? k : plan->b_off[k];
                switch (op) {
                case BinOp::Add: gb[ib] += g[k]; break;
                case BinOp::Sub: gb[ib] -= g[k]; break;
                case BinOp::Mul: gb[ib] += g[k] * av[ia]; break;
                case BinOp::Div: gb[ib] -= g[k] * av[ia] / (bv[ib] * bv[ib]); break;
                }
            }
        }
    });
}

// Elementwise unary op whose derivative is expressed from (input, output).
template <typename F, typename DF>
Var unary(const Var& x, F f, DF df)
{
    Tensor out(x.shape());
    const auto& xv = x.value();
    for (std::size_t k = 0; k < out.numel(); ++k) {
        out[k] = f(xv[k]);
    }
    return make_result(std::move(out), {x}, [df](Node& self) {
        const Tensor& xv = self.parents[0]->value;
        Tensor& gx = self.parents[0]->grad_buffer();
        for (std::size_t k = 0; k < gx.numel(); ++k) {
            gx[k] += self.grad[k] * df(xv[k], self.value[k]);
        }
    });
}

} // namespace

Var add(const Var& a, const Var& b) { return binary(a, b, BinOp::Add); }
Var sub(const Var& a, const Var& b) { return binary(a, b, BinOp::Sub); }
Var mul(const Var& a, const Var& b) { return binary(a, b, BinOp::Mul); }
Var div(const Var& a, const Var& b) { return binary(a, b, BinOp::Div); }

Var add_scalar(const Var& x, double c)
{
    return unary(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var mul_scalar(const Var& x, double c)
{
    return unary(x, [c](double v) { return v * c; }, [c](double, double) { return c; });
}

Var neg(const Var& x) { return mul_scalar(x, -1.0); }

Var rsub_scalar(double c, const Var& x)
{
    return unary(x, [c](double v) { return c - v; }, [](double, double) { return -1.0; });
}

Var log(const Var& x)
{
    return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var exp(const Var& x)
{
    return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var sigmoid(const Var& x)
{
    return unary(
        x,
        [](double v) {
            if (v >= 0) {
                return 1.0 / (1.0 + std::exp(-v));
            }
            double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var relu(const Var& x)
{
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var square(const Var& x)
{
    return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var clamp(const Var& x, double lo, double hi)
{
    return unary(x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
                 [lo, hi](double v, double) { return (v < lo || v > hi) ? 0.0 : 1.0; });
}

Var map(const Var& x, std::function<double(double)> f, std::function<double(double)> df)
{
    return unary(x, [f = std::move(f)](double v) { return f(v); },
                 [df = std::move(df)](double v, double) { return df(v); });
}

Var straight_through(const Tensor& hard, const Var& soft)
{
    if (hard.shape() != soft.shape()) {
        throw std::invalid_argument("straight_through: shape mismatch " +
                                    shape_str(hard.shape()) + " vs " + shape_str(soft.shape()));
    }
    return make_result(hard, {soft}, [](Node& self) {
        Tensor& gs = self.parents[0]->grad_buffer();
        for (std::size_t k = 0; k < gs.numel(); ++k) {
            gs[k] += self.grad[k];
        }
    });
}

Var sum(const Var& x)
{
    double s = 0.0;
    for (double v : x.value().data()) {
        s += v;
    }
    return make_result(Tensor::scalar(s), {x}, [](Node& self) {
        Tensor& gx = self.parents[0]->grad_buffer();
        double g = self.grad[0];
        for (std::size_t k = 0; k < gx.numel(); ++k) {
            gx[k] += g;
        }
    });
}

Var mean(const Var& x)
{
    if (x.numel() == 0) {
        throw std::invalid_argument("mean of empty tensor");
    }
    return mul_scalar(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Var sum_axis(const Var& x, std::size_t axis)
{
    check_axis(x, axis, "sum_axis");
    auto sp = split_at(x.shape(), axis);
    Tensor out(drop_axis(x.shape(), axis), 0.0);
    const auto& xv = x.value();
    for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t i = 0; i < sp.n; ++i) {
            const double* src = &xv.data()[(o * sp.n + i) * sp.inner];
            double* dst = &out.data()[o * sp.inner];
            for (std::size_t j = 0; j < sp.inner; ++j) {
                dst[j] += src[j];
            }
        }
    }
    return make_result(std::move(out), {x}, [sp](Node& self) {
        Tensor& gx = self.parents[0]->grad_buffer();
        for (std::size_t o = 0; o < sp.outer; ++o) {
            for (std::size_t i = 0; i < sp.n; ++i) {
                for (std::size_t j = 0; j < sp.inner; ++j) {
                    gx[(o * sp.n + i) * sp.inner + j] += self.grad[o * sp.inner + j];
                }
            }
        }
    });
}

MaxResult max_over_axis(const Var& x, std::size_t axis)
{
    check_axis(x, axis, "max_over_axis");
    auto sp = split_at(x.shape(), axis);
    Tensor out(drop_axis(x.shape(), axis));
    std::vector<std::size_t> arg(sp.outer * sp.inner, 0);
    const auto& xv = x.value();
    for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t j = 0; j < sp.inner; ++j) {
            std::size_t best = 0;
            double bv = xv[o * sp.n * sp.inner + j];
            for (std::size_t i = 1; i < sp.n; ++i) {
                double v = xv[(o * sp.n + i) * sp.inner + j];
                if (v > bv) {
                    bv = v;
                    best = i;
                }
            }
            out[o * sp.inner + j] = bv;
            arg[o * sp.inner + j] = best;
        }
    }
    auto shared_arg = std::make_shared<std::vector<std::size_t>>(arg);
    Var values = make_result(std::move(out), {x}, [sp, shared_arg](Node& self) {
        Tensor& gx = self.parents[0]->grad_buffer();
        for (std::size_t o = 0; o < sp.outer; ++o) {
            for (std::size_t j = 0; j < sp.inner; ++j) {
                std::size_t k = o * sp.inner + j;
                gx[(o * sp.n + (*shared_arg)[k]) * sp.inner + j] += self.grad[k];
            }
        }
    });
    return {values, std::move(arg)};
}

Var matmul(const Var& a, const Var& b)
{
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0)) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) +
                                    " and " + shape_str(b.shape()));
    }
    std::size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
    Tensor out(Shape{M, N}, 0.0);
    const double* A = a.value().data().data();
    const double* B = b.value().data().data();
    double* C = out.data().data();
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t k = 0; k < K; ++k) {
            double aik = A[i * K + k];
            const double* brow = B + k * N;
            double* crow = C + i * N;
            for (std::size_t j = 0; j < N; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return make_result(std::move(out), {a, b}, [M, K, N](Node& self) {
        const double* G = self.grad.data().data();
        const double* A = self.parents[0]->value.data().data();
        const double* B = self.parents[1]->value.data().data();
        if (needs(self, 0)) {
            double* GA = self.parents[0]->grad_buffer().data().data();
            for (std::size_t i = 0; i < M; ++i) {
                for (std::size_t k = 0; k < K; ++k) {
                    const double* grow = G + i * N;
                    const double* brow = B + k * N;
                    double s = 0.0;
                    for (std::size_t j = 0; j < N; ++j) {
                        s += grow[j] * brow[j];
                    }
                    GA[i * K + k] += s;
                }
            }
        }
        if (needs(self, 1)) {
            double* GB = self.parents[1]->grad_buffer().data().data();
            for (std::size_t i = 0; i < M; ++i) {
                for (std::size_t k = 0; k < K; ++k) {
                    double aik = A[i * K + k];
                    const double* grow = G + i * N;
                    double* gbrow = GB + k * N;
                    for (std::size_t j = 0; j < N; ++j) {
                        gbrow[j] += aik * grow[j];
                    }
                }
            }
        }
    });
}

Var reshape(const Var& x, Shape shape)
{
    Tensor out = x.value().reshaped(std::move(shape));
    return make_result(std::move(out), {x}, [](Node& self) {
        Tensor& gx = self.parents[0]->grad_buffer();
        for (std::size_t k = 0; k < gx.numel(); ++k) {
            gx[k] += self.grad[k];
        }
    });
}

Var permute(const Var& x, const std::vector<std::size_t>& axes)
{
    const Shape& in = x.shape();
    std::size_t rank = in.size();
    if (axes.size() != rank) {
        throw std::invalid_argument("permute: axes rank mismatch for " + shape_str(in));
    }
    std::vector<bool> used(rank, false);
    for (auto a : axes) {
        if (a >= rank || used[a]) {
            throw std::invalid_argument("permute: invalid axis permutation");
        }
        used[a] = true;
    }
    std::vector<std::size_t> in_stride(rank);
    std::size_t acc = 1;
    for (std::size_t i = rank; i-- > 0;) {
        in_stride[i] = acc;
        acc *= in[i];
    }
    Shape out_shape(rank);
    std::vector<std::size_t> src_stride(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        out_shape[i] = in[axes[i]];
        src_stride[i] = in_stride[axes[i]];
    }
    std::size_t total = x.numel();
    auto map_idx = std::make_shared<std::vector<std::size_t>>(total);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t off = 0;
    for (std::size_t k = 0; k < total; ++k) {
        (*map_idx)[k] = off;
        for (std::size_t i = rank; i-- > 0;) {
            if (++idx[i] < out_shape[i]) {
                off += src_stride[i];
                break;
            }
            off -= src_stride[i] * (out_shape[i] - 1);
            idx[i] = 0;
        }
    }
    Tensor out(out_shape);
    const auto& xv = x.value();
    for (std::size_t k = 0; k < total; ++k) {
        out[k] = xv[(*map_idx)[k]];
    }
    return make_result(std::move(out), {x}, [map_idx](Node& self) {
        Tensor& gx = self.parents[0]->grad_buffer();
        for (std::size_t k = 0; k < self.grad.numel(); ++k) {
            gx[(*map_idx)[k]] += self.grad[k];
        }
    });
}

Var transpose(const Var& x)
{
    if (x.shape().size() != 2) {
        throw std::invalid_argument("transpose expects rank 2, got " + shape_str(x.shape()));
    }
    return permute(x, {1, 0});
}

Var concat(const std::vector<Var>& xs, std::size_t axis)
{
    if (xs.empty()) {
        throw std::invalid_argument("concat of zero tensors");
    }
    check_axis(xs[0], axis, "concat");
    Shape out_shape = xs[0].shape();
    out_shape[axis] = 0;
    for (const auto& v : xs) {
        const Shape& s = v.shape();
        if (s.size() != out_shape.size()) {
            throw std::invalid_argument("concat: rank mismatch");
        }
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i != axis && s[i] != xs[0].shape()[i]) {
                throw std::invalid_argument("concat: shape mismatch " + shape_str(s) + " vs " +
                                            shape_str(xs[0].shape()) + " off axis " +
                                            std::to_string(axis));
            }
        }
        out_shape[axis] += s[axis];
    }
    auto sp = split_at(out_shape, axis);
    Tensor out(out_shape);
    std::vector<std::size_t> widths;
    std::size_t start = 0;
    for (const auto& v : xs) {
        std::size_t w = v.dim(axis);
        const auto& xv = v.value();
        for (std::size_t o = 0; o < sp.outer; ++o) {
            std::copy_n(&xv.data()[o * w * sp.inner], w * sp.inner,
                        &out.data()[(o * sp.n + start) * sp.inner]);
        }
        widths.push_back(w);
        start += w;
    }
    return make_result(std::move(out), xs, [sp, widths](Node& self) {
        std::size_t start = 0;
        for (std::size_t p = 0; p < widths.size(); ++p) {
            std::size_t w = widths[p];
            if (self.parents[p]->requires_grad) {
                Tensor& gx = self.parents[p]->grad_buffer();
                for (std::size_t o = 0; o < sp.outer; ++o) {
                    const double* src = &self.grad.data()[(o * sp.n + start) * sp.inner];
                    double* dst = &gx.data()[o * w * sp.inner];
                    for (std::size_t j = 0; j < w * sp.inner; ++j) {
                        dst[j] += src[j];
                    }
                }
            }
            start += w;
        }
    });
}

Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end)
{
    check_axis(x, axis, "slice");
    if (begin >= end || end > x.dim(axis)) {
        throw std::out_of_range("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") invalid for axis of size " + std::to_string(x.dim(axis)));
    }
    auto sp = split_at(x.shape(), axis);
    Shape out_shape = x.shape();
    std::size_t w = end - begin;
    out_shape[axis] = w;
    Tensor out(out_shape);
    const auto& xv = x.value();
    for (std::size_t o = 0; o < sp.outer; ++o) {
        std::copy_n(&xv.data()[(o * sp.n + begin) * sp.inner], w * sp.inner,
                    &out.data()[o * w * sp.inner]);
    }
    return make_result(std::move(out), {x}, [sp, begin, w](Node& self) {
        Tensor& gx = self.parents[0]->grad_buffer();
        for (std::size_t o = 0; o < sp.outer; ++o) {
            const double* src = &self.grad.data()[o * w * sp.inner];
            double* dst = &gx.data()[(o * sp.n + begin) * sp.inner];
            for (std::size_t j = 0; j < w * sp.inner; ++j) {
                dst[j] += src[j];
            }
        }
    });
}

std::vector<Var> split(const Var& x, std::size_t axis, const std::vector<std::size_t>& sizes)
{
    check_axis(x, axis, "split");
    std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    if (total != x.dim(axis)) {
        throw std::invalid_argument("split sizes sum to " + std::to_string(total) +
                                    ", axis has " + std::to_string(x.dim(axis)));
    }
    std::vector<Var> parts;
    std::size_t start = 0;
    for (auto s : sizes) {
        parts.push_back(slice(x, axis, start, start + s));
        start += s;
    }
    return parts;
}

Var softmax_lastdim(const Var& x)
{
    if (x.numel() == 0 || x.shape().empty()) {
        throw std::invalid_argument("softmax of empty tensor");
    }
    std::size_t n = x.shape().back();
    std::size_t rows = x.numel() / n;
    Tensor out(x.shape());
    const auto& xv = x.value();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = &xv.data()[r * n];
        double* dst = &out.data()[r * n];
        double m = *std::max_element(src, src + n);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            dst[j] = std::exp(src[j] - m);
            s += dst[j];
        }
        for (std::size_t j = 0; j < n; ++j) {
            dst[j] /= s;
        }
    }
    return make_result(std::move(out), {x}, [n, rows](Node& self) {
        Tensor& gx = self.parents[0]->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = &self.value.data()[r * n];
            const double* g = &self.grad.data()[r * n];
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                dot += g[j] * y[j];
            }
            for (std::size_t j = 0; j < n; ++j) {
                gx[r * n + j] += y[j] * (g[j] - dot);
            }
        }
    });
}

namespace {

struct InterpTap {
    std::size_t i0 = 0, i1 = 0;
    double frac = 0.0;
    bool clamped = false;
};

InterpTap interp_tap(double p, std::size_t n)
{
    InterpTap t;
    double hi = static_cast<double>(n - 1);
    if (p < 0.0 || p > hi) {
        t.clamped = true;
    }
    double c = std::clamp(p, 0.0, hi);
    auto i0 = static_cast<std::size_t>(std::floor(c));
    if (i0 >= n - 1) {
        t.i0 = t.i1 = n - 1;
        t.frac = 0.0;
    } else {
        t.i0 = i0;
        t.i1 = i0 + 1;
        t.frac = c - static_cast<double>(i0);
    }
    return t;
}

} // namespace

Var linear_interp_gather(const Var& x, std::size_t axis, const Var& positions)
{
    check_axis(x, axis, "linear_interp_gather");
    if (positions.shape().size() != 1) {
        throw std::invalid_argument("linear_interp_gather: positions must be rank 1");
    }
    auto sp = split_at(x.shape(), axis);
    std::size_t P = positions.numel();
    auto taps = std::make_shared<std::vector<InterpTap>>(P);
    for (std::size_t p = 0; p < P; ++p) {
        double pos = positions.value()[p];
        if (!std::isfinite(pos)) {
            throw std::invalid_argument("linear_interp_gather: non-finite position");
        }
        (*taps)[p] = interp_tap(pos, sp.n);
    }
    Shape out_shape = x.shape();
    out_shape[axis] = P;
    Tensor out(out_shape);
    const auto& xv = x.value();
    for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t p = 0; p < P; ++p) {
            const auto& t = (*taps)[p];
            const double* r0 = &xv.data()[(o * sp.n + t.i0) * sp.inner];
            const double* r1 = &xv.data()[(o * sp.n + t.i1) * sp.inner];
            double* dst = &out.data()[(o * P + p) * sp.inner];
            if (t.frac == 0.0) {
                std::copy_n(r0, sp.inner, dst);
            } else {
                for (std::size_t j = 0; j < sp.inner; ++j) {
                    dst[j] = (1.0 - t.frac) * r0[j] + t.frac * r1[j];
                }
            }
        }
    }
    return make_result(std::move(out), {x, positions}, [sp, P, taps](Node& self) {
        const Tensor& xv = self.parents[0]->value;
        const Tensor& g = self.grad;
        if (needs(self, 0)) {
            Tensor& gx = self.parents[0]->grad_buffer();
            for (std::size_t o = 0; o < sp.outer; ++o) {
                for (std::size_t p = 0; p < P; ++p) {
                    const auto& t = (*taps)[p];
                    const double* gr = &g.data()[(o * P + p) * sp.inner];
                    double* g0 = &gx.data()[(o * sp.n + t.i0) * sp.inner];
                    double* g1 = &gx.data()[(o * sp.n + t.i1) * sp.inner];
                    for (std::size_t j = 0; j < sp.inner; ++j) {
                        g0[j] += (1.0 - t.frac) * gr[j];
                        g1[j] += t.frac * gr[j];
                    }
                }
            }
        }
        if (needs(self, 1)) {
            Tensor& gp = self.parents[1]->grad_buffer();
            for (std::size_t p = 0; p < P; ++p) {
                const auto& t = (*taps)[p];
                if (t.clamped || t.i0 == t.i1) {
                    continue;
                }
                double s = 0.0;
                for (std::size_t o = 0; o < sp.outer; ++o) {
                    const double* gr = &g.data()[(o * P + p) * sp.inner];
                    const double* r0 = &xv.data()[(o * sp.n + t.i0) * sp.inner];
                    const double* r1 = &xv.data()[(o * sp.n + t.i1) * sp.inner];
                    for (std::size_t j = 0; j < sp.inner; ++j) {
                        s += gr[j] * (r1[j] - r0[j]);
                    }
                }
                gp[p] += s;
            }
        }
    });
}

Var linear_interp_gather(const Var& x, std::size_t axis, std::span<const double> positions)
{
    Tensor pos(Shape{positions.size()}, std::vector<double>(positions.begin(), positions.end()));
    return linear_interp_gather(x, axis, constant(std::move(pos)));
}

Var conv2d(const Var& x, const Var& w, const Var& bias, std::size_t stride, std::size_t pad)
{
    if (x.shape().size() != 3 || w.shape().size() != 4 || w.dim(1) != x.dim(0)) {
        throw std::invalid_argument("conv2d: input " + shape_str(x.shape()) +
                                    " incompatible with weight " + shape_str(w.shape()));
    }
    if (stride == 0) {
        throw std::invalid_argument("conv2d: stride must be positive");
    }
    std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    std::size_t O = w.dim(0), KH = w.dim(2), KW = w.dim(3);
    if (H + 2 * pad < KH || W + 2 * pad < KW) {
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    }
    std::size_t OH = (H + 2 * pad - KH) / stride + 1;
    std::size_t OW = (W + 2 * pad - KW) / stride + 1;
    bool has_bias = bias.defined();
    if (has_bias && (bias.shape().size() != 1 || bias.dim(0) != O)) {
        throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()));
    }
    std::size_t CK = C * KH * KW, P = OH * OW;

    // im2col: cols[ck][p]; -1 marks padding.
    auto cols = std::make_shared<std::vector<double>>(CK * P, 0.0);
    auto src = std::make_shared<std::vector<std::ptrdiff_t>>(CK * P, -1);
    const auto& xv = x.value();
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t ky = 0; ky < KH; ++ky) {
            for (std::size_t kx = 0; kx < KW; ++kx) {
                std::size_t row = (c * KH + ky) * KW + kx;
                for (std::size_t oy = 0; oy < OH; ++oy) {
                    auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                              static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) {
                        continue;
                    }
                    for (std::size_t ox = 0; ox < OW; ++ox) {
                        auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                  static_cast<std::ptrdiff_t>(pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) {
                            continue;
                        }
                        std::size_t at = row * P + oy * OW + ox;
                        auto s = (c * H + static_cast<std::size_t>(iy)) * W +
                                 static_cast<std::size_t>(ix);
                        (*cols)[at] = xv[s];
                        (*src)[at] = static_cast<std::ptrdiff_t>(s);
                    }
                }
            }
        }
    }
    Tensor out(Shape{O, OH, OW}, 0.0);
    const double* Wt = w.value().data().data();
    for (std::size_t o = 0; o < O; ++o) {
        double* orow = &out.data()[o * P];
        if (has_bias) {
            std::fill_n(orow, P, bias.value()[o]);
        }
        for (std::size_t k = 0; k < CK; ++k) {
            double wk = Wt[o * CK + k];
            const double* crow = &(*cols)[k * P];
            for (std::size_t p = 0; p < P; ++p) {
                orow[p] += wk * crow[p];
            }
        }
    }
    std::vector<Var> inputs{x, w};
    if (has_bias) {
        inputs.push_back(bias);
    }
    return make_result(std::move(out), inputs, [=](Node& self) {
        const double* G = self.grad.data().data();
        const double* Wt = self.parents[1]->value.data().data();
        if (needs(self, 0)) {
            Tensor& gx = self.parents[0]->grad_buffer();
            std::vector<double> gcol(P);
            for (std::size_t k = 0; k < CK; ++k) {
                std::fill(gcol.begin(), gcol.end(), 0.0);
                for (std::size_t o = 0; o < O; ++o) {
                    double wk = Wt[o * CK + k];
                    const double* grow = G + o * P;
                    for (std::size_t p = 0; p < P; ++p) {
                        gcol[p] += wk * grow[p];
                    }
                }
                for (std::size_t p = 0; p < P; ++p) {
                    auto s = (*src)[k * P + p];
                    if (s >= 0) {
                        gx[static_cast<std::size_t>(s)] += gcol[p];
                    }
                }
            }
        }
        if (needs(self, 1)) {
            double* GW = self.parents[1]->grad_buffer().data().data();
            for (std::size_t o = 0; o < O; ++o) {
                const double* grow = G + o * P;
                for (std::size_t k = 0; k < CK; ++k) {
                    const double* crow = &(*cols)[k * P];
                    double s = 0.0;
                    for (std::size_t p = 0; p < P; ++p) {
                        s += grow[p] * crow[p];
                    }
                    GW[o * CK + k] += s;
                }
            }
        }
        if (has_bias && needs(self, 2)) {
            Tensor& gb = self.parents[2]->grad_buffer();
            for (std::size_t o = 0; o < O; ++o) {
                double s = 0.0;
                for (std::size_t p = 0; p < P; ++p) {
                    s += G[o * P + p];
                }
                gb[o] += s;
            }
        }
    });
}

namespace {

struct ResizeTap {
    std::size_t i0, i1;
    double w1; // weight of i1; i0 gets 1 - w1
};

std::vector<ResizeTap> resize_taps(std::size_t in, std::size_t out, ResizeMode mode)
{
    std::vector<ResizeTap> taps(out);
    double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        if (mode == ResizeMode::Nearest) {
            auto i = std::min(static_cast<std::size_t>(std::floor(static_cast<double>(o) * scale)),
                              in - 1);
            taps[o] = {i, i, 0.0};
            continue;
        }
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        auto i0 = static_cast<std::size_t>(std::floor(src));
        std::size_t i1 = std::min(i0 + 1, in - 1);
        taps[o] = {i0, i1, i1 == i0 ? 0.0 : src - static_cast<double>(i0)};
    }
    return taps;
}

} // namespace

Var resize2d(const Var& x, std::size_t out_h, std::size_t out_w, ResizeMode mode)
{
    if (x.shape().size() != 3) {
        throw std::invalid_argument("resize2d expects C x H x W, got " + shape_str(x.shape()));
    }
    if (out_h == 0 || out_w == 0) {
        throw std::invalid_argument("resize2d: output size must be positive");
    }
    std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    auto ty = std::make_shared<std::vector<ResizeTap>>(resize_taps(H, out_h, mode));
    auto tx = std::make_shared<std::vector<ResizeTap>>(resize_taps(W, out_w, mode));
    Tensor out(Shape{C, out_h, out_w});
    const auto& xv = x.value();
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t y = 0; y < out_h; ++y) {
            const auto& a = (*ty)[y];
            for (std::size_t xo = 0; xo < out_w; ++xo) {
                const auto& b = (*tx)[xo];
                double v00 = xv[(c * H + a.i0) * W + b.i0];
                double v01 = xv[(c * H + a.i0) * W + b.i1];
                double v10 = xv[(c * H + a.i1) * W + b.i0];
                double v11 = xv[(c * H + a.i1) * W + b.i1];
                double top = (1.0 - b.w1) * v00 + b.w1 * v01;
                double bot = (1.0 - b.w1) * v10 + b.w1 * v11;
                out[(c * out_h + y) * out_w + xo] = (1.0 - a.w1) * top + a.w1 * bot;
            }
        }
    }
    return make_result(std::move(out), {x}, [=](Node& self) {
        Tensor& gx = self.parents[0]->grad_buffer();
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t y = 0; y < out_h; ++y) {
                const auto& a = (*ty)[y];
                for (std::size_t xo = 0; xo < out_w; ++xo) {
                    const auto& b = (*tx)[xo];
                    double g = self.grad[(c * out_h + y) * out_w + xo];
                    gx[(c * H + a.i0) * W + b.i0] += g * (1.0 - a.w1) * (1.0 - b.w1);
                    gx[(c * H + a.i0) * W + b.i1] += g * (1.0 - a.w1) * b.w1;
                    gx[(c * H + a.i1) * W + b.i0] += g * a.w1 * (1.0 - b.w1);
                    gx[(c * H + a.i1) * W + b.i1] += g * a.w1 * b.w1;
                }
            }
        }
    });
}

} // namespace adaradar
