#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "adaradar/radar_synth.hpp"

namespace adaradar::synth {

enum class Split { Train, Val, Test };
std::string split_name(Split s);
Split parse_split(const std::string& s);

struct Sample {
    std::string id;
    std::uint64_t seed = 0;
    Split split = Split::Train;
    Views views;                   // standardised inputs
    std::vector<LabelMap> mask_ra; // T frames
    std::vector<LabelMap> mask_rd;

    /// Ground truth of the most recent frame, which the network predicts.
    const LabelMap& target_ra() const { return mask_ra.back(); }
    const LabelMap& target_rd() const { return mask_rd.back(); }
};

struct Dataset {
    int version = 1;
    CubeDims dims;
    std::size_t frames = 3;
    std::size_t num_classes = kNumClasses;
    std::vector<Sample> samples;

    std::vector<const Sample*> split(Split s) const;
};

/// Renders and slices one scene into a sample.
Sample make_sample(std::string id, const RadScene& scene, const CubeDims& dims, std::uint64_t seed,
                   Split split, double foreground_cap);

struct GenerateOptions {
    CubeDims dims;
    SceneSampler sampler;
    std::size_t num_samples = 60;
    double train_fraction = 0.8;
    double val_fraction = 0.1;
};

/// Draws `num_samples` scenes; splits are assigned in order (train, val, test).
Dataset generate_dataset(const GenerateOptions& options, std::uint64_t seed);

/// Layout: manifest.json plus <id>.{ra,rd,ad,mask_ra,mask_rd}.adrt per sample.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
/// Throws std::runtime_error naming the offending file.
Dataset read_dataset(const std::filesystem::path& dir);

} // namespace adaradar::synth
