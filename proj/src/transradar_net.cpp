#include "adaradar/transradar_net.hpp"

#include <cmath>
#include <stdexcept>

namespace adaradar {

void ModelConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
    if (frames == 0) {
        fail("frames must be at least 1");
    }
    if (num_classes < 2) {
        fail("num_classes must be at least 2");
    }
    if (enc_channels == 0 || n_blocks == 0 || heads == 0) {
        fail("enc_channels, n_blocks and heads must be positive");
    }
    if (k_h == 0 || k_w == 0) {
        fail("k_h and k_w must be at least 1");
    }
    if (dims.range % 4 || dims.angle % 4 || dims.doppler % 4 || dims.range == 0 ||
        dims.angle == 0 || dims.doppler == 0) {
        fail("range, angle and doppler bins must be positive multiples of 4");
    }
    // The AD latent has height A/4 and is stacked with range-indexed maps.
    if (dims.range != dims.angle) {
        fail("range bins (" + std::to_string(dims.range) + ") must equal angle bins (" +
             std::to_string(dims.angle) + ")");
    }
    std::size_t c = latent_channels();
    if ((latent_height() * c) % heads || (latent_width() * c) % heads) {
        fail("token widths " + std::to_string(latent_height() * c) + " and " +
             std::to_string(latent_width() * c) + " must be divisible by " + std::to_string(heads) +
             " heads");
    }
    if (!(background_prior > 0.0 && background_prior < 1.0)) {
        fail("background_prior must lie in (0, 1)");
    }
}

ModelConfig micro_config()
{
    ModelConfig c;
    c.frames = 2;
    c.num_classes = 3;
    c.dims = {16, 16, 8};
    c.enc_channels = 4;
    c.n_blocks = 1;
    return c;
}

Conv2d::Conv2d(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
               std::mt19937_64& rng)
    : weight(name + ".weight", he_uniform({out, in, kernel, kernel}, in * kernel * kernel, rng)),
      bias(name + ".bias", Tensor(Shape{out}, 0.0))
{
}

Var Conv2d::operator()(const Var& x, std::size_t stride) const
{
    return conv2d(x, weight.var(), bias.var(), stride, weight.value().dim(2) / 2);
}

void Conv2d::collect(ParameterList& out)
{
    out.push_back(&weight);
    out.push_back(&bias);
}

ViewEncoder::ViewEncoder(const std::string& name, std::size_t in_channels, std::size_t channels,
                         std::mt19937_64& rng)
    : name_(name),
      down1_(name + ".down1", in_channels, channels, 3, rng),
      conv1_(name + ".conv1", channels, channels, 3, rng),
      down2_(name + ".down2", channels, channels, 3, rng),
      conv2_(name + ".conv2", channels, channels, 3, rng)
{
}

Var ViewEncoder::forward(const Var& x) const
{
    if (x.shape().size() != 3 || x.dim(1) % 4 || x.dim(2) % 4) {
        throw std::invalid_argument(name_ + ": expected T x H x W with H, W divisible by 4, got " +
                                    shape_str(x.shape()));
    }
    Var h = relu(conv1_(relu(down1_(x, 2))));
    return relu(conv2_(relu(down2_(h, 2))));
}

void ViewEncoder::collect(ParameterList& out)
{
    for (auto* c : {&down1_, &conv1_, &down2_, &conv2_}) {
        c->collect(out);
    }
}

SegDecoder::SegDecoder(const std::string& name, std::size_t in_channels, std::size_t channels,
                       std::size_t num_classes, double background_prior, std::mt19937_64& rng)
    : name_(name),
      reduce_(name + ".reduce", in_channels, channels, 1, rng),
      up1_(name + ".up1", channels, channels, 3, rng),
      up2_(name + ".up2", channels, channels, 3, rng),
      classify_(name + ".classify", channels, num_classes, 1, rng)
{
    // Start from a confident background prediction.
    auto k = static_cast<double>(num_classes);
    classify_.bias.mutable_value()[0] =
        std::log(background_prior * (k - 1.0) / (1.0 - background_prior));
}

Var SegDecoder::forward(const Var& z, std::size_t out_h, std::size_t out_w) const
{
    if (z.shape().size() != 3) {
        throw std::invalid_argument(name_ + ": expected C x H x W latent, got " + shape_str(z.shape()));
    }
    Var h = reduce_(z);
    h = relu(up1_(resize2d(h, out_h / 2, out_w / 2, ResizeMode::Linear)));
    h = relu(up2_(resize2d(h, out_h, out_w, ResizeMode::Linear)));
    return class_softmax(classify_(h));
}

void SegDecoder::collect(ParameterList& out)
{
    for (auto* c : {&reduce_, &up1_, &up2_, &classify_}) {
        c->collect(out);
    }
}

Var class_softmax(const Var& logits)
{
    return permute(softmax_lastdim(permute(logits, {1, 2, 0})), {2, 0, 1});
}

Var fuse_latent(const Var& ra, const Var& rd, const Var& ad, std::size_t width)
{
    for (const Var* v : {&ra, &rd, &ad}) {
        if (v->shape().size() != 3) {
            throw std::invalid_argument("fuse_latent: expected C x H x W maps, got " +
                                        shape_str(v->shape()));
        }
    }
    if (rd.dim(1) != ra.dim(1) || ad.dim(1) != ra.dim(1)) {
        throw std::invalid_argument("fuse_latent: heights differ (RA " + std::to_string(ra.dim(1)) +
                                    ", RD " + std::to_string(rd.dim(1)) + ", AD " +
                                    std::to_string(ad.dim(1)) + ")");
    }
    auto fit = [width](const Var& v) {
        return v.dim(2) == width ? v : resize2d(v, v.dim(1), width, ResizeMode::Linear);
    };
    return concat({fit(ad), fit(rd), fit(ra)}, 0);
}

TransRadarNet::TransRadarNet(const ModelConfig& config, std::uint64_t seed) : config_(config)
{
    config_.validate();
    std::mt19937_64 rng(seed);
    const auto& c = config_;
    enc_ra_ = ViewEncoder("enc_ra", c.frames, c.enc_channels, rng);
    enc_rd_ = ViewEncoder("enc_rd", c.frames, c.enc_channels, rng);
    enc_ad_ = ViewEncoder("enc_ad", c.frames, c.enc_channels, rng);
    AdaBlockConfig bc{c.latent_channels(), c.latent_height(), c.latent_width(), c.heads, c.k_h, c.k_w,
                      !c.no_adaptive};
    for (std::size_t b = 0; b < c.n_blocks; ++b) {
        blocks_.emplace_back("block" + std::to_string(b), bc, rng);
    }
    dec_rd_ = SegDecoder("dec_rd", c.latent_channels(), c.enc_channels, c.num_classes,
                         c.background_prior, rng);
    dec_ra_ = SegDecoder("dec_ra", c.latent_channels(), c.enc_channels, c.num_classes,
                         c.background_prior, rng);
}

namespace {

Var as_frames(const Var& v, const char* view, std::size_t T, std::size_t H, std::size_t W)
{
    Shape s = v.shape();
    if (s.size() == 4 && s[0] == 1) {
        s.erase(s.begin());
    }
    if (s != Shape{T, H, W}) {
        throw std::invalid_argument(std::string("input ") + view + ": expected " +
                                    shape_str({T, H, W}) + ", got " + shape_str(v.shape()));
    }
    return v.shape().size() == 4 ? reshape(v, s) : v;
}

} // namespace

SegMasks TransRadarNet::forward(const Var& ra, const Var& rd, const Var& ad) const
{
    const auto& c = config_;
    const auto& d = c.dims;
    Var f_ra = enc_ra_.forward(as_frames(ra, "RA", c.frames, d.range, d.angle));
    Var f_rd = enc_rd_.forward(as_frames(rd, "RD", c.frames, d.range, d.doppler));
    Var f_ad = enc_ad_.forward(as_frames(ad, "AD", c.frames, d.angle, d.doppler));
    Var z = fuse_latent(f_ra, f_rd, f_ad, c.latent_width());
    for (const auto& block : blocks_) {
        z = block.forward(z);
    }
    return {dec_rd_.forward(z, d.range, d.doppler), dec_ra_.forward(z, d.range, d.angle)};
}

SegMasks TransRadarNet::forward(const synth::Views& views) const
{
    return forward(constant(views.ra.data), constant(views.rd.data), constant(views.ad.data));
}

ParameterList TransRadarNet::parameters()
{
    ParameterList out;
    enc_ra_.collect(out);
    enc_rd_.collect(out);
    enc_ad_.collect(out);
    for (auto& b : blocks_) {
        b.collect(out);
    }
    dec_rd_.collect(out);
    dec_ra_.collect(out);
    return out;
}

std::size_t TransRadarNet::param_count() { return count_scalars(parameters()); }

} // namespace adaradar
