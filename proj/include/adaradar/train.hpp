#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "adaradar/config.hpp"
#include "adaradar/dataset.hpp"
#include "adaradar/grad_check.hpp"
#include "adaradar/losses.hpp"
#include "adaradar/metrics.hpp"
#include "adaradar/optim.hpp"
#include "adaradar/transradar_net.hpp"

namespace adaradar {

// Checkpoint file:
//   "ADCK" | u8 version (1) | u32 LE header length | JSON header
//   {"model": ModelConfig, "params": [{"name", "shape"}]} | one ADRT blob per parameter.
inline constexpr std::uint8_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, TransRadarNet& model);
/// Throws std::runtime_error naming the file if the header and blobs disagree.
TransRadarNet load_checkpoint(const std::filesystem::path& path);

/// Throws if the dataset's dims, frames or classes differ from the model's.
void check_compatible(const synth::Dataset& dataset, const ModelConfig& model);

struct EvalReport {
    MetricReport rd;
    MetricReport ra;
};

/// Aggregated confusion over `samples`, one sample at a time.
EvalReport evaluate(const TransRadarNet& model, const std::vector<const synth::Sample*>& samples);
EvalReport evaluate(const TransRadarNet& model, const synth::Dataset& dataset, synth::Split split);

/// One optimizer step per call; owns the model and the Adam state.
class Trainer {
public:
    Trainer(const TrainConfig& config, Binarize mode = Binarize::StraightThrough);

    /// Forward, loss, backward and Adam update on `batch`. The returned report
    /// holds the loss before the update. Throws if any term is not finite.
    LossReport step(const std::vector<const synth::Sample*>& batch, double lr);

    /// Loss of `batch` under the current weights, without updating.
    LossReport loss(const std::vector<const synth::Sample*>& batch) const;

    TransRadarNet& model() { return model_; }
    const TransRadarNet& model() const { return model_; }
    const TrainConfig& config() const { return config_; }

private:
    TrainConfig config_;
    Binarize mode_;
    TransRadarNet model_;
    Adam adam_;
};

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double oc = 0.0, cl = 0.0, sd = 0.0, mv = 0.0, col = 0.0, total = 0.0;
    double val_miou_rd = 0.0;
    double val_miou_ra = 0.0;
};

std::string epoch_csv_header();
std::string epoch_csv_row(const EpochLog& e);

struct TrainResult {
    std::vector<EpochLog> epochs;
    /// Epoch whose weights were kept (-1: the initialization).
    long best_epoch = -1;
    TransRadarNet best;
    EvalReport val;
};

/// Full run. Batches are reshuffled every epoch; the model with the best mean
/// val mIoU over both heads is kept (the last epoch when there is no val split).
/// With a non-empty `out_dir`, writes log.csv, checkpoint.adck and metrics.json.
TrainResult train(const TrainConfig& config, const synth::Dataset& dataset,
                  const std::filesystem::path& out_dir = {},
                  const std::function<void(const EpochLog&)>& on_epoch = {});

struct AblationResult {
    AblationRow row;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double val_miou_rd = 0.0;
    double val_miou_ra = 0.0;
};

/// Trains every row for every seed. A failing row is recorded and the run continues.
std::vector<AblationResult> ablate(const TrainConfig& config, const synth::Dataset& dataset,
                                   const std::vector<AblationRow>& rows,
                                   const std::vector<std::uint64_t>& seeds,
                                   const std::function<void(const AblationResult&)>& on_row = {});

std::string ablation_csv_header();
std::string ablation_csv_row(const AblationResult& r);

struct GradCheckCommand {
    std::uint64_t seed = 0;
    /// Perturbs one analytic gradient entry after backward (negative control).
    bool corrupt = false;
    /// Checks a loss that does not depend on the parameters.
    bool constant_loss = false;
    GradCheckOptions check;
};

/// Finite-difference check of the full objective (soft CL) on one synthetic
/// sample through the micro model. Labels the micro model cannot represent
/// are merged into its last class.
GradCheckReport gradcheck_command(const GradCheckCommand& cmd);

/// Binary PGM of a label map, labels spread over 0..255.
void write_pgm(const std::filesystem::path& path, const LabelMap& labels, std::size_t num_classes);

} // namespace adaradar
