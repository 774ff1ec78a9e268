#include "adaradar/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace adaradar {

void Adam::step(const ParameterList& params, double lr)
{
    if (m_.empty()) {
        for (auto* p : params) {
            m_.emplace_back(p->value().shape(), 0.0);
            v_.emplace_back(p->value().shape(), 0.0);
        }
    }
    if (m_.size() != params.size()) {
        throw std::invalid_argument("adam: parameter list changed between steps");
    }
    ++t_;
    double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        if (p.value().shape() != m_[i].shape()) {
            throw std::invalid_argument("adam: shape of " + p.name() + " changed");
        }
        if (!p.has_grad()) {
            // Decay the moments as if the gradient were zero.
            for (std::size_t j = 0; j < m_[i].numel(); ++j) {
                m_[i][j] *= opt_.beta1;
                v_[i][j] *= opt_.beta2;
            }
        }
        Tensor g = p.has_grad() ? p.grad() : Tensor();
        Tensor& w = p.mutable_value();
        for (std::size_t j = 0; j < w.numel(); ++j) {
            if (!g.empty()) {
                m_[i][j] = opt_.beta1 * m_[i][j] + (1.0 - opt_.beta1) * g[j];
                v_[i][j] = opt_.beta2 * v_[i][j] + (1.0 - opt_.beta2) * g[j] * g[j];
            }
            double mh = m_[i][j] / c1;
            double vh = v_[i][j] / c2;
            w[j] -= lr * mh / (std::sqrt(vh) + opt_.eps);
        }
    }
}

double ExponentialSchedule::lr(std::size_t epoch) const
{
    if (step == 0) {
        throw std::invalid_argument("scheduler step must be positive");
    }
    return lr0 * std::pow(gamma, static_cast<double>(epoch / step));
}

} // namespace adaradar
