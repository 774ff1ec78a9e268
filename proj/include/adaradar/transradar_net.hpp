#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "adaradar/ada_attention.hpp"
#include "adaradar/radar_synth.hpp"

namespace adaradar {

struct ModelConfig {
    std::size_t frames = 3;      // T, input channels of each encoder
    std::size_t num_classes = 4; // K
    synth::CubeDims dims{};
    std::size_t enc_channels = 8; // C_enc per view
    std::size_t n_blocks = 2;
    std::size_t heads = 4;
    std::size_t k_h = 3;
    std::size_t k_w = 3;
    bool no_adaptive = false;
    /// Initial background probability set through the classifier bias.
    double background_prior = 0.99;

    std::size_t latent_height() const { return dims.range / 4; }
    std::size_t latent_width() const { return std::max(dims.angle, dims.doppler) / 4; }
    std::size_t latent_channels() const { return 3 * enc_channels; }
    /// Throws std::invalid_argument naming the offending setting.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Smallest configuration, used for end-to-end gradient checks.
ModelConfig micro_config();

struct SegMasks {
    Var rd_probs; // K x R x D
    Var ra_probs; // K x R x A
};

/// 2D convolution with He-uniform weights and zero bias.
struct Conv2d {
    Conv2d() = default;
    Conv2d(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
           std::mt19937_64& rng);

    Var operator()(const Var& x, std::size_t stride = 1) const;
    void collect(ParameterList& out);

    Parameter weight; // out x in x k x k
    Parameter bias;   // out
};

/// Two stride-2 stages, each conv3x3 -> relu -> conv3x3 -> relu.
class ViewEncoder {
public:
    ViewEncoder() = default;
    ViewEncoder(const std::string& name, std::size_t in_channels, std::size_t channels,
                std::mt19937_64& rng);

    /// x: T x H x W with H, W divisible by 4 -> C_enc x H/4 x W/4.
    Var forward(const Var& x) const;
    void collect(ParameterList& out);

private:
    std::string name_;
    Conv2d down1_, conv1_, down2_, conv2_;
};

/// 1x1 reduce -> 2 x (resize x2 -> conv3x3 -> relu) -> 1x1 to K -> softmax.
class SegDecoder {
public:
    SegDecoder() = default;
    SegDecoder(const std::string& name, std::size_t in_channels, std::size_t channels,
               std::size_t num_classes, double background_prior, std::mt19937_64& rng);

    /// z: C x H_d x W_d -> K x out_h x out_w per-pixel distributions.
    Var forward(const Var& z, std::size_t out_h, std::size_t out_w) const;
    void collect(ParameterList& out);

private:
    std::string name_;
    Conv2d reduce_, up1_, up2_, classify_;
};

/// Per-pixel softmax over the leading class axis of K x H x W logits.
Var class_softmax(const Var& logits);

/// Linear width resize of RD/AD maps to `width`, then channel concat (AD, RD, RA).
Var fuse_latent(const Var& ra, const Var& rd, const Var& ad, std::size_t width);

class TransRadarNet {
public:
    TransRadarNet() = default;
    TransRadarNet(const ModelConfig& config, std::uint64_t seed);

    /// Views as T x H x W (or 1 x T x H x W): RA R x A, RD R x D, AD A x D.
    SegMasks forward(const Var& ra, const Var& rd, const Var& ad) const;
    SegMasks forward(const synth::Views& views) const;

    const ModelConfig& config() const { return config_; }
    /// Every learnable tensor, in a fixed registration order.
    ParameterList parameters();
    std::size_t param_count();

    std::vector<AdaAttentionBlock>& blocks() { return blocks_; }

private:
    ModelConfig config_;
    ViewEncoder enc_ra_, enc_rd_, enc_ad_;
    std::vector<AdaAttentionBlock> blocks_;
    SegDecoder dec_rd_, dec_ra_;
};

} // namespace adaradar
