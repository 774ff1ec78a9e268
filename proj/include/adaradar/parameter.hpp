#pragma once

#include <string>
#include <vector>

#include "adaradar/autodiff.hpp"

namespace adaradar {

/// A named learnable tensor. Copying a Parameter deep-copies its value so a
/// copied model never shares state with the original.
class Parameter {
public:
    Parameter() = default;
    Parameter(std::string name, Tensor init);
    Parameter(const Parameter& other);
    Parameter& operator=(const Parameter& other);
    Parameter(Parameter&&) noexcept = default;
    Parameter& operator=(Parameter&&) noexcept = default;

    const std::string& name() const { return name_; }
    const Var& var() const { return var_; }
    const Tensor& value() const { return var_.value(); }
    Tensor& mutable_value() { return var_.mutable_value(); }
    Tensor grad() const { return var_.grad(); }
    bool has_grad() const { return var_.has_grad(); }
    void zero_grad() { var_.zero_grad(); }
    std::size_t numel() const { return var_.numel(); }

private:
    std::string name_;
    Var var_;
};

using ParameterList = std::vector<Parameter*>;

std::size_t count_scalars(const ParameterList& params);
void zero_grads(const ParameterList& params);

/// Throws if two parameters share a name.
void check_unique_names(const ParameterList& params);

} // namespace adaradar
