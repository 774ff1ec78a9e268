#include "adaradar/radar_synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adaradar::synth {

std::string view_name(ViewId v)
{
    switch (v) {
    case ViewId::RA: return "ra";
    case ViewId::RD: return "rd";
    case ViewId::AD: return "ad";
    }
    return "?";
}

namespace {

std::vector<double> gauss1d(std::size_t n, double centre, double sigma)
{
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = (static_cast<double>(i) - centre) / sigma;
        g[i] = std::exp(-0.5 * z * z);
    }
    return g;
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

void validate(const RadScene& scene, const CubeDims& dims)
{
    if (dims.range == 0 || dims.angle == 0 || dims.doppler == 0) {
        throw std::invalid_argument("cube dimensions must be positive");
    }
    if (scene.frames == 0) {
        throw std::invalid_argument("scene must have at least one frame");
    }
    auto inside = [](double v, std::size_t n) {
        return std::isfinite(v) && v >= 0.0 && v <= static_cast<double>(n - 1);
    };
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const auto& o = scene.objects[i];
        std::string which = "object " + std::to_string(i);
        if (o.class_id < kPedestrian || o.class_id > kCar) {
            throw std::invalid_argument(which + ": class_id must be 1, 2 or 3");
        }
        if (!inside(o.range_bin, dims.range) || !inside(o.angle_bin, dims.angle) ||
            !inside(o.doppler_bin, dims.doppler)) {
            throw std::invalid_argument(which + ": centre lies outside the cube at frame 0");
        }
        if (!(o.amplitude > 0.0)) {
            throw std::invalid_argument(which + ": amplitude must be positive");
        }
        for (double e : o.extent) {
            if (!(e > 0.0)) {
                throw std::invalid_argument(which + ": extents must be positive");
            }
        }
        if (!std::isfinite(o.velocity_drift)) {
            throw std::invalid_argument(which + ": drift must be finite");
        }
    }
    const auto& n = scene.noise;
    if (n.speckle_level < 0.0 || n.ghost_amplitude < 0.0) {
        throw std::invalid_argument("noise levels must be non-negative");
    }
}

// Separable per-axis profiles of one object at one frame.
struct Profiles {
    std::vector<double> r, a, d;
};

Profiles profiles(const RadObject& o, const CubeDims& dims, std::size_t frame)
{
    double rc = o.range_bin + o.velocity_drift * static_cast<double>(frame);
    return {gauss1d(dims.range, rc, o.extent[0]), gauss1d(dims.angle, o.angle_bin, o.extent[1]),
            gauss1d(dims.doppler, o.doppler_bin, o.extent[2])};
}

// Labels pixels where an object's 2D marginal exceeds half its own peak;
// overlaps go to the object with the larger marginal.
void mask_plane(LabelMap& mask, const std::vector<const RadObject*>& objs,
                const std::vector<std::vector<double>>& rows,
                const std::vector<std::vector<double>>& cols, const std::vector<double>& weights)
{
    std::vector<double> best(mask.size(), 0.0);
    for (std::size_t i = 0; i < objs.size(); ++i) {
        double peak = max_of(rows[i]) * max_of(cols[i]);
        if (!(peak > 0.0)) {
            continue;
        }
        for (std::size_t y = 0; y < mask.height; ++y) {
            for (std::size_t x = 0; x < mask.width; ++x) {
                double v = rows[i][y] * cols[i][x];
                double m = weights[i] * v;
                if (v > 0.5 * peak && m > best[y * mask.width + x]) {
                    best[y * mask.width + x] = m;
                    mask.at(y, x) = objs[i]->class_id;
                }
            }
        }
    }
}

double fraction(const LabelMap& m)
{
    return static_cast<double>(m.foreground_count()) / static_cast<double>(m.size());
}

} // namespace

void render_masks(const RadScene& scene, const CubeDims& dims, std::vector<LabelMap>& masks_ra,
                  std::vector<LabelMap>& masks_rd)
{
    validate(scene, dims);
    masks_ra.assign(scene.frames, LabelMap(dims.range, dims.angle));
    masks_rd.assign(scene.frames, LabelMap(dims.range, dims.doppler));
    std::vector<const RadObject*> objs;
    for (const auto& o : scene.objects) {
        objs.push_back(&o);
    }
    for (std::size_t t = 0; t < scene.frames; ++t) {
        std::vector<std::vector<double>> pr, pa, pd;
        std::vector<double> w_ra, w_rd;
        for (const auto* o : objs) {
            auto p = profiles(*o, dims, t);
            double sa = 0.0, sd = 0.0;
            for (double v : p.a) {
                sa += v;
            }
            for (double v : p.d) {
                sd += v;
            }
            w_ra.push_back(o->amplitude * sd);
            w_rd.push_back(o->amplitude * sa);
            pr.push_back(std::move(p.r));
            pa.push_back(std::move(p.a));
            pd.push_back(std::move(p.d));
        }
        mask_plane(masks_ra[t], objs, pr, pa, w_ra);
        mask_plane(masks_rd[t], objs, pr, pd, w_rd);
    }
}

RadCube render_scene(const RadScene& scene, const CubeDims& dims, std::uint64_t seed,
                     double foreground_cap)
{
    RadCube cube;
    render_masks(scene, dims, cube.masks_ra, cube.masks_rd);
    for (std::size_t t = 0; t < scene.frames; ++t) {
        double fr = std::max(fraction(cube.masks_ra[t]), fraction(cube.masks_rd[t]));
        if (fr > foreground_cap) {
            throw std::invalid_argument("scene foreground fraction " + std::to_string(fr) +
                                        " at frame " + std::to_string(t) + " exceeds cap " +
                                        std::to_string(foreground_cap));
        }
    }

    const std::size_t R = dims.range, A = dims.angle, D = dims.doppler;
    cube.intensity = Tensor(Shape{scene.frames, R, A, D}, 0.0);
    auto add_blob = [&](std::size_t t, const Profiles& p, double amp) {
        for (std::size_t r = 0; r < R; ++r) {
            double vr = amp * p.r[r];
            if (vr == 0.0) {
                continue;
            }
            for (std::size_t a = 0; a < A; ++a) {
                double vra = vr * p.a[a];
                double* dst = &cube.intensity.at(t, r, a, 0);
                for (std::size_t d = 0; d < D; ++d) {
                    dst[d] += vra * p.d[d];
                }
            }
        }
    };
    for (std::size_t t = 0; t < scene.frames; ++t) {
        for (const auto& o : scene.objects) {
            add_blob(t, profiles(o, dims, t), o.amplitude);
        }
    }

    std::mt19937_64 rng(seed);
    const auto& noise = scene.noise;
    if (noise.ghost_count > 0 && noise.ghost_amplitude > 0.0) {
        std::uniform_real_distribution<double> ur(0.0, static_cast<double>(R - 1));
        std::uniform_real_distribution<double> ua(0.0, static_cast<double>(A - 1));
        std::uniform_real_distribution<double> ud(0.0, static_cast<double>(D - 1));
        std::uniform_real_distribution<double> ue(0.7, 1.2);
        for (std::size_t t = 0; t < scene.frames; ++t) {
            for (std::size_t g = 0; g < noise.ghost_count; ++g) {
                double rc = ur(rng), ac = ua(rng), dc = ud(rng);
                double er = ue(rng), ea = ue(rng), ed = ue(rng);
                add_blob(t, {gauss1d(R, rc, er), gauss1d(A, ac, ea), gauss1d(D, dc, ed)},
                         noise.ghost_amplitude);
            }
        }
    }
    if (noise.speckle_level > 0.0) {
        // Log-normal multiplicative speckle over a clutter floor of the same level.
        double s = noise.speckle_level;
        std::normal_distribution<double> n01(0.0, 1.0);
        for (auto& v : cube.intensity.data()) {
            v = (v + s) * std::exp(s * n01(rng) - 0.5 * s * s);
        }
    }
    return cube;
}

Views marginalize(const RadCube& cube)
{
    const auto& I = cube.intensity;
    std::size_t T = I.dim(0), R = I.dim(1), A = I.dim(2), D = I.dim(3);
    Views v{{ViewId::RA, Tensor(Shape{1, T, R, A}, 0.0)},
            {ViewId::RD, Tensor(Shape{1, T, R, D}, 0.0)},
            {ViewId::AD, Tensor(Shape{1, T, A, D}, 0.0)}};
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t a = 0; a < A; ++a) {
                const double* src = &I.at(t, r, a, 0);
                double s = 0.0;
                for (std::size_t d = 0; d < D; ++d) {
                    s += src[d];
                    v.rd.data.at(0, t, r, d) += src[d];
                    v.ad.data.at(0, t, a, d) += src[d];
                }
                v.ra.data.at(0, t, r, a) = s;
            }
        }
    }
    return v;
}

void standardize_frames(ViewStack& view)
{
    Tensor& x = view.data;
    if (x.rank() != 4 || x.dim(0) != 1) {
        throw std::invalid_argument("view stack must be 1 x T x H x W, got " + shape_str(x.shape()));
    }
    std::size_t T = x.dim(1), plane = x.dim(2) * x.dim(3);
    for (std::size_t t = 0; t < T; ++t) {
        double* p = &x.data()[t * plane];
        double mean = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            mean += p[i];
        }
        mean /= static_cast<double>(plane);
        double var = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            var += (p[i] - mean) * (p[i] - mean);
        }
        double sd = std::max(std::sqrt(var / static_cast<double>(plane)), 1e-6);
        for (std::size_t i = 0; i < plane; ++i) {
            p[i] = (p[i] - mean) / sd;
        }
    }
}

Views slice_views(const RadCube& cube)
{
    Views v = marginalize(cube);
    standardize_frames(v.ra);
    standardize_frames(v.rd);
    standardize_frames(v.ad);
    return v;
}

namespace {

struct ClassPrior {
    std::array<double, 3> extent;
    double amplitude;
};

ClassPrior class_prior(int class_id)
{
    switch (class_id) {
    case kPedestrian: return {{0.8, 0.8, 0.6}, 2.0};
    case kCyclist: return {{1.0, 1.0, 0.7}, 3.0};
    default: return {{1.5, 1.4, 0.9}, 5.0};
    }
}

} // namespace

RadScene sample_scene(const SceneSampler& sampler, const CubeDims& dims, std::mt19937_64& rng)
{
    RadScene scene;
    scene.frames = sampler.frames;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    std::vector<int> classes;
    if (sampler.one_of_each_class) {
        classes = {kPedestrian, kCyclist, kCar};
    } else {
        std::uniform_int_distribution<std::size_t> count(sampler.min_objects, sampler.max_objects);
        std::uniform_int_distribution<int> cls(kPedestrian, kCar);
        std::size_t n = count(rng);
        for (std::size_t i = 0; i < n; ++i) {
            classes.push_back(cls(rng));
        }
    }
    // Keep centres two bins from the border so blobs are not truncated.
    auto pos = [&](std::size_t n) {
        double margin = n > 6 ? 2.0 : 0.0;
        return uniform(margin, static_cast<double>(n - 1) - margin);
    };
    for (int c : classes) {
        auto prior = class_prior(c);
        RadObject o;
        o.class_id = c;
        o.range_bin = pos(dims.range);
        o.angle_bin = pos(dims.angle);
        o.doppler_bin = pos(dims.doppler);
        for (std::size_t k = 0; k < 3; ++k) {
            o.extent[k] = prior.extent[k] * uniform(0.85, 1.15);
        }
        o.amplitude = prior.amplitude * uniform(0.85, 1.15);
        o.velocity_drift = uniform(-sampler.max_drift, sampler.max_drift);
        scene.objects.push_back(o);
    }
    scene.noise.speckle_level = uniform(sampler.speckle_min, sampler.speckle_max);
    scene.noise.ghost_count =
        std::uniform_int_distribution<std::size_t>(0, sampler.ghost_max)(rng);
    scene.noise.ghost_amplitude = sampler.ghost_amplitude;

    std::vector<LabelMap> ra, rd;
    while (true) {
        render_masks(scene, dims, ra, rd);
        double worst = 0.0;
        for (std::size_t t = 0; t < scene.frames; ++t) {
            worst = std::max({worst, fraction(ra[t]), fraction(rd[t])});
        }
        if (worst <= sampler.foreground_cap || scene.objects.empty()) {
            break;
        }
        scene.objects.pop_back();
    }
    return scene;
}

} // namespace adaradar::synth
