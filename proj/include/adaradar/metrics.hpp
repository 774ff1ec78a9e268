#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adaradar/labels.hpp"

namespace adaradar {

/// K x K pixel counts, rows = ground truth, columns = prediction.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes = 0);

    std::size_t num_classes() const { return k_; }
    std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * k_ + pred]; }
    std::uint64_t& at(std::size_t gt, std::size_t pred) { return counts_[gt * k_ + pred]; }
    std::uint64_t total() const;

    /// Accumulates one (prediction, ground truth) pair of maps.
    void add(const LabelMap& pred, const LabelMap& gt);
    ConfusionMatrix& operator+=(const ConfusionMatrix& other);

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t k_ = 0;
    std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt, std::size_t num_classes);

/// Scoring of a class absent from both prediction and ground truth.
enum class AbsentClass {
    ScoreOne, // IoU = Dice = 1
    Exclude   // reported as NaN and left out of the means
};

struct MetricReport {
    std::vector<double> iou;
    std::vector<double> dice;
    double miou = 0.0;
    double mdice = 0.0;
};

MetricReport iou_dice(const ConfusionMatrix& cm, AbsentClass absent = AbsentClass::ScoreOne);

/// Column labels: Bkg., Ped., Cycl., Car for four classes, c0..cK-1 otherwise.
std::vector<std::string> class_names(std::size_t num_classes);

/// JSON object {"iou": {name: v}, "dice": {...}, "miou": v, "mdice": v}.
std::string report_json(const MetricReport& r, int indent = 2);

/// CSV header/row: prefix columns, then IoU per class + mean, then Dice per class + mean.
std::string report_csv_header(std::size_t num_classes, const std::string& prefix = "view");
std::string report_csv_row(const MetricReport& r, const std::string& prefix);

} // namespace adaradar
