#pragma once

#include <vector>

#include "adaradar/parameter.hpp"

namespace adaradar {

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are matched to parameters by
/// position, so the same ParameterList order must be passed on every step.
class Adam {
public:
    explicit Adam(AdamOptions options = {}) : opt_(options) {}

    /// One update with learning rate `lr`; parameters without a gradient
    /// are treated as having a zero gradient.
    void step(const ParameterList& params, double lr);

    std::size_t steps() const { return t_; }

private:
    AdamOptions opt_;
    std::size_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

/// lr(epoch) = lr0 * gamma^floor(epoch / step).
struct ExponentialSchedule {
    double lr0 = 1e-4;
    std::size_t step = 10;
    double gamma = 0.9;

    double lr(std::size_t epoch) const;
};

} // namespace adaradar
