#include "adaradar/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace adaradar {

std::string GradCheckReport::summary() const
{
    std::ostringstream os;
    os.precision(6);
    os << (passed ? "PASS" : "FAIL") << ": " << checked << " elements checked, " << failed
       << " above tolerance, max relative error " << max_rel_error;
    if (!worst_param.empty()) {
        os << " at " << worst_param << "[" << worst_index << "] (analytic " << worst_analytic
           << ", numeric " << worst_numeric << ")";
    }
    return os.str();
}

GradCheckReport grad_check(const std::function<Var()>& f, ParameterList params,
                           const GradCheckOptions& options)
{
    zero_grads(params);
    Var first = f();
    if (first.numel() != 1) {
        throw std::invalid_argument("grad_check: function must return a scalar");
    }
    double f0 = first.item();
    first.backward();
    Var second = f();
    double f1 = second.item();
    if (std::memcmp(&f0, &f1, sizeof(double)) != 0) {
        throw std::runtime_error("grad_check: computation is not deterministic");
    }
    if (options.after_backward) {
        options.after_backward(params);
    }

    double largest = 0.0;
    for (auto* p : params) {
        Tensor g = p->grad();
        for (double v : g.data()) {
            largest = std::max(largest, std::abs(v));
        }
    }
    double floor = std::max(options.abs_floor, options.scale_floor * largest);

    GradCheckReport report;
    for (auto* p : params) {
        Tensor analytic = p->grad();
        Tensor& value = p->mutable_value();
        for (std::size_t i = 0; i < value.numel(); ++i) {
            double saved = value[i];
            value[i] = saved + options.eps;
            double fp = f().item();
            value[i] = saved - options.eps;
            double fm = f().item();
            value[i] = saved;
            double numeric = (fp - fm) / (2.0 * options.eps);
            double a = analytic[i];
            double denom = std::max({std::abs(a), std::abs(numeric), floor});
            double rel = std::abs(a - numeric) / denom;
            ++report.checked;
            if (!(rel < options.tol)) {
                ++report.failed;
            }
            if (!(rel <= report.max_rel_error) || report.worst_param.empty()) {
                report.max_rel_error = rel;
                report.worst_param = p->name();
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    zero_grads(params);
    report.passed = report.failed == 0;
    return report;
}

} // namespace adaradar
