#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "adaradar/labels.hpp"
#include "adaradar/tensor.hpp"

namespace adaradar::synth {

inline constexpr int kBackground = 0;
inline constexpr int kPedestrian = 1;
inline constexpr int kCyclist = 2;
inline constexpr int kCar = 3;
inline constexpr std::size_t kNumClasses = 4;

struct CubeDims {
    std::size_t range = 64;
    std::size_t angle = 64;
    std::size_t doppler = 16;

    friend bool operator==(const CubeDims&, const CubeDims&) = default;
};

struct RadObject {
    int class_id = kCar;
    double range_bin = 0.0;
    double angle_bin = 0.0;
    double doppler_bin = 0.0;
    std::array<double, 3> extent{1.0, 1.0, 1.0}; // Gaussian sigma per (range, angle, doppler), bins
    double amplitude = 1.0;
    double velocity_drift = 0.0; // range bins per frame
};

struct NoiseConfig {
    double speckle_level = 0.0;
    std::size_t ghost_count = 0;
    double ghost_amplitude = 0.0;
};

struct RadScene {
    std::vector<RadObject> objects;
    NoiseConfig noise;
    std::size_t frames = 1;
};

struct RadCube {
    Tensor intensity;                // T x R x A x D
    std::vector<LabelMap> masks_ra;  // T frames of R x A
    std::vector<LabelMap> masks_rd;  // T frames of R x D

    std::size_t frames() const { return intensity.dim(0); }
    CubeDims dims() const { return {intensity.dim(1), intensity.dim(2), intensity.dim(3)}; }
};

enum class ViewId { RA, RD, AD };
std::string view_name(ViewId v);

/// T past frames of one 2D view, shaped 1 x T x H x W.
struct ViewStack {
    ViewId view = ViewId::RA;
    Tensor data;
};

struct Views {
    ViewStack ra, rd, ad;
};

/// Renders each object as an anisotropic Gaussian drifting along range.
/// Masks mark bins where an object's noise-free marginal intensity exceeds
/// half of its own peak; speckle and ghosts are applied after masking.
/// Throws if an object centre lies outside the cube at frame 0 or if any
/// mask frame exceeds `foreground_cap`.
RadCube render_scene(const RadScene& scene, const CubeDims& dims, std::uint64_t seed,
                     double foreground_cap = 0.01);

/// Noise-free masks only (no intensity cube, no cap check).
void render_masks(const RadScene& scene, const CubeDims& dims, std::vector<LabelMap>& masks_ra,
                  std::vector<LabelMap>& masks_rd);

/// Marginal sums of the cube: RA over doppler, RD over angle, AD over range.
Views marginalize(const RadCube& cube);

/// Per-frame standardisation to zero mean and unit variance (sigma floor 1e-6).
void standardize_frames(ViewStack& view);

/// marginalize() followed by standardize_frames() on each view.
Views slice_views(const RadCube& cube);

/// Knobs for drawing random scenes.
struct SceneSampler {
    std::size_t frames = 3;
    std::size_t min_objects = 1;
    std::size_t max_objects = 3;
    bool one_of_each_class = false; // exactly one pedestrian, cyclist and car
    double speckle_min = 0.05;
    double speckle_max = 0.25;
    std::size_t ghost_max = 2;
    double ghost_amplitude = 1.5;
    double max_drift = 0.5;
    double foreground_cap = 0.01;
};

/// Draws a scene whose masks respect `foreground_cap` (objects are dropped
/// until they do).
RadScene sample_scene(const SceneSampler& sampler, const CubeDims& dims, std::mt19937_64& rng);

} // namespace adaradar::synth
