#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adaradar/dataset.hpp"
#include "adaradar/losses.hpp"
#include "adaradar/transradar_net.hpp"

namespace adaradar {

/// Synthetic data settings; cube dims and frame count come from the model.
struct DataConfig {
    std::size_t num_samples = 60;
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    std::size_t min_objects = 1;
    std::size_t max_objects = 3;
    bool one_of_each_class = false;
    double speckle_min = 0.05;
    double speckle_max = 0.25;
    std::size_t ghost_max = 2;
    double ghost_amplitude = 1.5;
    double max_drift = 0.5;
    double foreground_cap = 0.01;
};

struct SchedulerConfig {
    std::string type = "exponential";
    std::size_t step = 10;
    double gamma = 0.9;
};

/// One row of an ablation matrix: which loss terms are on, and the architecture flag.
struct AblationRow {
    std::string name;
    bool oc = true;
    bool cl = true;
    bool sd = true;
    bool coherence = false;
    bool mv = true;
    bool no_adaptive = false;
};

struct TrainConfig {
    std::string dataset = "data";
    DataConfig data;
    ModelConfig model;
    LossWeights loss;
    std::size_t batch_size = 6;
    double lr = 1e-4;
    SchedulerConfig scheduler;
    std::size_t epochs = 20;
    std::uint64_t seed = 0;
    /// Caps the batches drawn per epoch; 0 means a full pass.
    std::size_t max_batches_per_epoch = 0;
    /// Rows for `ablate`; empty selects the default matrix.
    std::vector<AblationRow> ablation;

    void validate() const;
};

/// Loss-table rows plus the "no adaptive" architecture row.
std::vector<AblationRow> default_ablation_matrix();

/// Applies a row's toggles to a copy of the config.
TrainConfig apply_row(const TrainConfig& base, const AblationRow& row);

/// Generation options equivalent to `config` (dims and frames from the model).
synth::GenerateOptions generate_options(const TrainConfig& config);

/// Strict parsing: unknown keys and wrong types are errors. Missing keys keep defaults.
TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string train_config_json(const TrainConfig& config);

ModelConfig parse_model_config(const std::string& json_text);
std::string model_config_json(const ModelConfig& config);

} // namespace adaradar
