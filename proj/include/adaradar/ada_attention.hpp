#pragma once

#include <random>
#include <string>
#include <vector>

#include "adaradar/parameter.hpp"

namespace adaradar {

/// He-uniform initialisation, U(-sqrt(6/fan_in), sqrt(6/fan_in)).
Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

/// Weighted sum of shifted copies of x along `axis`:
///   out[..., j, ...] = sum_k theta[k] * x[..., j + delta[k], ...]
/// with fractional shifts resolved by clamped linear interpolation.
Var shift_blend(const Var& x, std::size_t axis, const Var& theta, const Var& delta);

/// C x H x W -> W tokens of size C*H (column j gathers x[:, :, j]).
Var columns_to_tokens(const Var& x);
/// Inverse of columns_to_tokens.
Var tokens_to_columns(const Var& tokens, std::size_t channels, std::size_t height, std::size_t width);
/// C x H x W -> H tokens of size C*W.
Var rows_to_tokens(const Var& x);
Var tokens_to_rows(const Var& tokens, std::size_t channels, std::size_t height, std::size_t width);

/// Modulated, offset column sampling followed by tokenisation: W_d tokens
/// of size H_d * C. theta and delta both have k_w entries.
Var sample_columns(const Var& x, const Var& theta, const Var& delta);
/// Row counterpart: H_d tokens of size W_d * C. theta and delta have k_h entries.
Var sample_rows(const Var& x, const Var& theta, const Var& delta);

/// Multi-head self-attention over N tokens of width d_model, without biases:
/// per head softmax(q k^T / sqrt(d_k)) v, heads concatenated, then projected.
class MultiHeadSelfAttention {
public:
    MultiHeadSelfAttention() = default;
    MultiHeadSelfAttention(const std::string& prefix, std::size_t d_model, std::size_t heads,
                           std::mt19937_64& rng);

    /// If `attention` is non-null it receives one N x N map per head.
    Var forward(const Var& tokens, std::vector<Tensor>* attention = nullptr) const;

    std::size_t d_model() const { return d_model_; }
    std::size_t heads() const { return heads_; }
    void collect(ParameterList& out);

    Parameter w_q, w_k, w_v, w_o; // d_model x d_model, applied as tokens . W

private:
    std::size_t d_model_ = 0;
    std::size_t heads_ = 1;
};

struct AdaBlockConfig {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t heads = 4;
    std::size_t k_h = 3;
    std::size_t k_w = 3;
    /// false: plain axial attention over straight rows and columns, with no
    /// modulation or offset parameters.
    bool adaptive = true;

    std::size_t column_d_model() const { return height * channels; }
    std::size_t row_d_model() const { return width * channels; }
    /// Throws std::invalid_argument on inconsistent settings.
    void validate() const;
};

/// Offsets 0, +1, -1, +2, -2, ... truncated to k entries.
Tensor offset_ladder(std::size_t k);

/// Column sampling -> MSA (+ residual) -> row sampling -> MSA (+ residual).
class AdaAttentionBlock {
public:
    AdaAttentionBlock() = default;
    AdaAttentionBlock(const std::string& prefix, const AdaBlockConfig& config, std::mt19937_64& rng);

    /// x: C x H x W; the output has the same shape.
    Var forward(const Var& x) const;

    const AdaBlockConfig& config() const { return config_; }
    void collect(ParameterList& out);

    Parameter theta_h, delta_h; // k_w entries each, column stage
    Parameter theta_w, delta_w; // k_h entries each, row stage
    MultiHeadSelfAttention column_attention, row_attention;

private:
    AdaBlockConfig config_;
};

} // namespace adaradar
