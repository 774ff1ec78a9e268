#include "adaradar/parameter.hpp"

#include <set>
#include <stdexcept>

namespace adaradar {

Parameter::Parameter(std::string name, Tensor init)
    : name_(std::move(name)), var_(std::move(init), true)
{
}

Parameter::Parameter(const Parameter& other)
    : name_(other.name_), var_(other.var_.defined() ? Var(other.value(), true) : Var())
{
}

Parameter& Parameter::operator=(const Parameter& other)
{
    if (this != &other) {
        name_ = other.name_;
        var_ = other.var_.defined() ? Var(other.value(), true) : Var();
    }
    return *this;
}

std::size_t count_scalars(const ParameterList& params)
{
    std::size_t n = 0;
    for (const auto* p : params) {
        n += p->numel();
    }
    return n;
}

void zero_grads(const ParameterList& params)
{
    for (auto* p : params) {
        p->zero_grad();
    }
}

void check_unique_names(const ParameterList& params)
{
    std::set<std::string> names;
    for (const auto* p : params) {
        if (!names.insert(p->name()).second) {
            throw std::logic_error("duplicate parameter name: " + p->name());
        }
    }
}

} // namespace adaradar
