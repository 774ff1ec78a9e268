#pragma once

#include <cstddef>
#include <vector>

#include "adaradar/tensor.hpp"

namespace adaradar {

/// Integer class map, row-major H x W. Label 0 is background.
struct LabelMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<int> labels;

    LabelMap() = default;
    LabelMap(std::size_t h, std::size_t w, int fill = 0) : height(h), width(w), labels(h * w, fill) {}

    int& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
    int at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
    std::size_t size() const { return labels.size(); }
    std::size_t foreground_count() const;

    friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// K x H x W one-hot encoding. Throws if a label lies outside [0, K).
Tensor one_hot(const LabelMap& map, std::size_t num_classes);

/// Per-pixel argmax over the leading class axis of a K x H x W tensor,
/// ties resolved to the lowest class index.
LabelMap argmax_labels(const Tensor& probs);

/// Stacks frames into a T x H x W tensor of label values and back.
Tensor labels_to_tensor(const std::vector<LabelMap>& frames);
std::vector<LabelMap> labels_from_tensor(const Tensor& t);

} // namespace adaradar
