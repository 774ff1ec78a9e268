#include "adaradar/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace adaradar {

std::size_t shape_numel(const Shape& shape)
{
    if (shape.empty()) {
        return 0;
    }
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape)
{
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) {
            s += "x";
        }
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace {

void validate_shape(const Shape& shape)
{
    if (shape.empty()) {
        throw std::invalid_argument("tensor shape must have at least one dimension");
    }
    for (auto d : shape) {
        if (d == 0) {
            throw std::invalid_argument("tensor dimensions must be positive, got " +
                                        shape_str(shape));
        }
    }
}

} // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape))
{
    validate_shape(shape_);
    data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data))
{
    validate_shape(shape_);
    if (shape_numel(shape_) != data_.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str(shape_));
    }
}

double Tensor::item() const
{
    if (data_.size() != 1) {
        throw std::logic_error("item() on tensor of shape " + shape_str(shape_));
    }
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape_numel(shape) != data_.size()) {
        throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " +
                                    shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const
{
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool bit_identical(const Tensor& a, const Tensor& b)
{
    if (a.shape() != b.shape()) {
        return false;
    }
    return a.numel() == 0 ||
           std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

} // namespace adaradar
