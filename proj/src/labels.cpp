#include "adaradar/labels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace adaradar {

std::size_t LabelMap::foreground_count() const
{
    return static_cast<std::size_t>(
        std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
}

Tensor one_hot(const LabelMap& map, std::size_t num_classes)
{
    Tensor out(Shape{num_classes, map.height, map.width}, 0.0);
    std::size_t plane = map.height * map.width;
    for (std::size_t i = 0; i < plane; ++i) {
        int l = map.labels[i];
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
            throw std::out_of_range("label " + std::to_string(l) + " outside [0, " +
                                    std::to_string(num_classes) + ")");
        }
        out[static_cast<std::size_t>(l) * plane + i] = 1.0;
    }
    return out;
}

LabelMap argmax_labels(const Tensor& probs)
{
    if (probs.rank() != 3) {
        throw std::invalid_argument("argmax_labels expects K x H x W, got " +
                                    shape_str(probs.shape()));
    }
    std::size_t K = probs.dim(0);
    LabelMap map(probs.dim(1), probs.dim(2));
    std::size_t plane = map.size();
    for (std::size_t i = 0; i < plane; ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < K; ++k) {
            if (probs[k * plane + i] > probs[best * plane + i]) {
                best = k;
            }
        }
        map.labels[i] = static_cast<int>(best);
    }
    return map;
}

Tensor labels_to_tensor(const std::vector<LabelMap>& frames)
{
    if (frames.empty()) {
        throw std::invalid_argument("labels_to_tensor: no frames");
    }
    Tensor out(Shape{frames.size(), frames[0].height, frames[0].width});
    std::size_t plane = frames[0].size();
    for (std::size_t t = 0; t < frames.size(); ++t) {
        if (frames[t].height != frames[0].height || frames[t].width != frames[0].width) {
            throw std::invalid_argument("labels_to_tensor: frame size mismatch");
        }
        for (std::size_t i = 0; i < plane; ++i) {
            out[t * plane + i] = static_cast<double>(frames[t].labels[i]);
        }
    }
    return out;
}

std::vector<LabelMap> labels_from_tensor(const Tensor& t)
{
    if (t.rank() != 3) {
        throw std::invalid_argument("labels_from_tensor expects T x H x W, got " +
                                    shape_str(t.shape()));
    }
    std::vector<LabelMap> frames;
    std::size_t plane = t.dim(1) * t.dim(2);
    for (std::size_t f = 0; f < t.dim(0); ++f) {
        LabelMap m(t.dim(1), t.dim(2));
        for (std::size_t i = 0; i < plane; ++i) {
            double v = t[f * plane + i];
            if (v != std::floor(v) || v < 0) {
                throw std::invalid_argument("label tensor holds a non-label value");
            }
            m.labels[i] = static_cast<int>(v);
        }
        frames.push_back(std::move(m));
    }
    return frames;
}

} // namespace adaradar
