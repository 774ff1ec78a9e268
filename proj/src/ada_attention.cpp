#include "adaradar/ada_attention.hpp"

#include <cmath>
#include <stdexcept>

namespace adaradar {

Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng)
{
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor t(std::move(shape));
    for (auto& v : t.data()) {
        v = u(rng);
    }
    return t;
}

Var shift_blend(const Var& x, std::size_t axis, const Var& theta, const Var& delta)
{
    if (theta.shape().size() != 1 || theta.shape() != delta.shape()) {
        throw std::invalid_argument("shift_blend: theta and delta must be equal-length vectors");
    }
    if (axis >= x.shape().size()) {
        throw std::out_of_range("shift_blend: axis out of range");
    }
    std::size_t n = x.dim(axis);
    Tensor ramp(Shape{n});
    for (std::size_t j = 0; j < n; ++j) {
        ramp[j] = static_cast<double>(j);
    }
    Var base = constant(std::move(ramp));
    Var out;
    for (std::size_t k = 0; k < theta.numel(); ++k) {
        Var positions = add(base, slice(delta, 0, k, k + 1));
        Var term = mul(linear_interp_gather(x, axis, positions), slice(theta, 0, k, k + 1));
        out = out.defined() ? add(out, term) : term;
    }
    return out;
}

Var columns_to_tokens(const Var& x)
{
    if (x.shape().size() != 3) {
        throw std::invalid_argument("expected C x H x W, got " + shape_str(x.shape()));
    }
    std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    return reshape(permute(x, {2, 0, 1}), {W, C * H});
}

Var tokens_to_columns(const Var& tokens, std::size_t channels, std::size_t height, std::size_t width)
{
    return permute(reshape(tokens, {width, channels, height}), {1, 2, 0});
}

Var rows_to_tokens(const Var& x)
{
    if (x.shape().size() != 3) {
        throw std::invalid_argument("expected C x H x W, got " + shape_str(x.shape()));
    }
    std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    return reshape(permute(x, {1, 0, 2}), {H, C * W});
}

Var tokens_to_rows(const Var& tokens, std::size_t channels, std::size_t height, std::size_t width)
{
    return permute(reshape(tokens, {height, channels, width}), {1, 0, 2});
}

Var sample_columns(const Var& x, const Var& theta, const Var& delta)
{
    return columns_to_tokens(shift_blend(x, 2, theta, delta));
}

Var sample_rows(const Var& x, const Var& theta, const Var& delta)
{
    return rows_to_tokens(shift_blend(x, 1, theta, delta));
}

MultiHeadSelfAttention::MultiHeadSelfAttention(const std::string& prefix, std::size_t d_model,
                                               std::size_t heads, std::mt19937_64& rng)
    : d_model_(d_model), heads_(heads)
{
    if (heads == 0 || d_model == 0 || d_model % heads != 0) {
        throw std::invalid_argument(prefix + ": d_model " + std::to_string(d_model) +
                                    " is not divisible by " + std::to_string(heads) + " heads");
    }
    Shape sq{d_model, d_model};
    w_q = Parameter(prefix + ".w_q", he_uniform(sq, d_model, rng));
    w_k = Parameter(prefix + ".w_k", he_uniform(sq, d_model, rng));
    w_v = Parameter(prefix + ".w_v", he_uniform(sq, d_model, rng));
    w_o = Parameter(prefix + ".w_o", he_uniform(sq, d_model, rng));
}

Var MultiHeadSelfAttention::forward(const Var& tokens, std::vector<Tensor>* attention) const
{
    if (tokens.shape().size() != 2 || tokens.dim(0) == 0) {
        throw std::invalid_argument("msa: expected N x d tokens with N >= 1");
    }
    if (tokens.dim(1) != d_model_) {
        throw std::invalid_argument("msa: token width " + std::to_string(tokens.dim(1)) +
                                    " does not match d_model " + std::to_string(d_model_));
    }
    Var q = matmul(tokens, w_q.var());
    Var k = matmul(tokens, w_k.var());
    Var v = matmul(tokens, w_v.var());
    std::size_t dk = d_model_ / heads_;
    double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    std::vector<Var> outs;
    for (std::size_t h = 0; h < heads_; ++h) {
        Var qh = slice(q, 1, h * dk, (h + 1) * dk);
        Var kh = slice(k, 1, h * dk, (h + 1) * dk);
        Var vh = slice(v, 1, h * dk, (h + 1) * dk);
        Var weights = softmax_lastdim(mul_scalar(matmul(qh, transpose(kh)), scale));
        if (attention) {
            attention->push_back(weights.value());
        }
        outs.push_back(matmul(weights, vh));
    }
    Var merged = heads_ == 1 ? outs[0] : concat(outs, 1);
    return matmul(merged, w_o.var());
}

void MultiHeadSelfAttention::collect(ParameterList& out)
{
    out.insert(out.end(), {&w_q, &w_k, &w_v, &w_o});
}

void AdaBlockConfig::validate() const
{
    if (channels == 0 || height == 0 || width == 0) {
        throw std::invalid_argument("attention block: C, H and W must be positive");
    }
    if (k_h == 0 || k_w == 0) {
        throw std::invalid_argument("attention block: k_h and k_w must be at least 1");
    }
    if (heads == 0 || column_d_model() % heads != 0 || row_d_model() % heads != 0) {
        throw std::invalid_argument("attention block: token widths " +
                                    std::to_string(column_d_model()) + " and " +
                                    std::to_string(row_d_model()) + " must be divisible by " +
                                    std::to_string(heads) + " heads");
    }
}

Tensor offset_ladder(std::size_t k)
{
    Tensor t(Shape{k});
    for (std::size_t i = 0; i < k; ++i) {
        double step = static_cast<double>((i + 1) / 2);
        t[i] = (i % 2 == 1) ? step : -step;
    }
    t[0] = 0.0;
    return t;
}

AdaAttentionBlock::AdaAttentionBlock(const std::string& prefix, const AdaBlockConfig& config,
                                     std::mt19937_64& rng)
    : config_(config)
{
    config_.validate();
    if (config_.adaptive) {
        theta_h = Parameter(prefix + ".theta_h",
                            Tensor(Shape{config_.k_w}, 1.0 / static_cast<double>(config_.k_w)));
        delta_h = Parameter(prefix + ".delta_h", offset_ladder(config_.k_w));
        theta_w = Parameter(prefix + ".theta_w",
                            Tensor(Shape{config_.k_h}, 1.0 / static_cast<double>(config_.k_h)));
        delta_w = Parameter(prefix + ".delta_w", offset_ladder(config_.k_h));
    }
    column_attention =
        MultiHeadSelfAttention(prefix + ".col_msa", config_.column_d_model(), config_.heads, rng);
    row_attention =
        MultiHeadSelfAttention(prefix + ".row_msa", config_.row_d_model(), config_.heads, rng);
}

Var AdaAttentionBlock::forward(const Var& x) const
{
    const auto& c = config_;
    if (x.shape() != Shape{c.channels, c.height, c.width}) {
        throw std::invalid_argument("attention block expects " +
                                    shape_str({c.channels, c.height, c.width}) + ", got " +
                                    shape_str(x.shape()));
    }
    Var cols = c.adaptive ? sample_columns(x, theta_h.var(), delta_h.var()) : columns_to_tokens(x);
    Var y = add(cols, column_attention.forward(cols));
    y = tokens_to_columns(y, c.channels, c.height, c.width);

    Var rows = c.adaptive ? sample_rows(y, theta_w.var(), delta_w.var()) : rows_to_tokens(y);
    Var z = add(rows, row_attention.forward(rows));
    return tokens_to_rows(z, c.channels, c.height, c.width);
}

void AdaAttentionBlock::collect(ParameterList& out)
{
    if (config_.adaptive) {
        out.insert(out.end(), {&theta_h, &delta_h, &theta_w, &delta_w});
    }
    column_attention.collect(out);
    row_attention.collect(out);
}

} // namespace adaradar
