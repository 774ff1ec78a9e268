#pragma once

#include <functional>
#include <string>

#include "adaradar/parameter.hpp"

namespace adaradar {

struct GradCheckOptions {
    double eps = 1e-5;
    double tol = 1e-4;
    /// Denominator floor of the relative error, so that gradients that are
    /// zero up to round-off compare by absolute error.
    double abs_floor = 1e-6;
    /// The floor is raised to scale_floor * (largest analytic gradient
    /// magnitude), since central differences cannot resolve gradients much
    /// smaller than that through round-off in f.
    double scale_floor = 1e-5;
    /// Runs after the analytic backward pass and before comparison. Used to
    /// inject faults in negative-control tests.
    std::function<void(ParameterList&)> after_backward;
};

struct GradCheckReport {
    bool passed = false;
    std::size_t checked = 0;
    std::size_t failed = 0;
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;

    std::string summary() const;
};

/// Compares analytic gradients of the scalar `f` against central finite
/// differences for every element of every parameter. Throws if two
/// evaluations at the same point disagree.
GradCheckReport grad_check(const std::function<Var()>& f, ParameterList params,
                           const GradCheckOptions& options = {});

} // namespace adaradar
