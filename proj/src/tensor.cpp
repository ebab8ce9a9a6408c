#include "sipp/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sipp {

std::size_t shape_volume(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

void check_shape(const Shape& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have rank >= 1");
    for (auto e : shape) {
        if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_to_string(shape));
    }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_volume(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (shape_volume(shape_) != data_.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_to_string(shape_));
    }
    for (double v : data_) {
        if (!std::isfinite(v)) throw std::invalid_argument("tensor data contains a non-finite value");
    }
}

std::size_t Tensor::slice_size() const {
    return shape_.empty() ? 0 : data_.size() / shape_[0];
}

std::span<double> Tensor::slice(std::size_t index) {
    if (shape_.empty() || index >= shape_[0]) throw std::out_of_range("tensor slice index out of range");
    const auto n = slice_size();
    return std::span<double>(data_).subspan(index * n, n);
}

std::span<const double> Tensor::slice(std::size_t index) const {
    if (shape_.empty() || index >= shape_[0]) throw std::out_of_range("tensor slice index out of range");
    const auto n = slice_size();
    return std::span<const double>(data_).subspan(index * n, n);
}

Shape Tensor::trailing_shape() const {
    if (shape_.size() <= 1) return {1};
    return Shape(shape_.begin() + 1, shape_.end());
}

double frobenius_norm(std::span<const double> values) {
    double acc = 0.0;
    for (double v : values) acc += v * v;
    return std::sqrt(acc);
}

QuadrantSplit quadrant_split(std::span<const double> v) {
    QuadrantSplit out;
    out.plus.resize(v.size());
    out.minus.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        // One side is exactly zero, so the recombination is exact.
        out.plus[i] = v[i] > 0.0 ? v[i] : 0.0;
        out.minus[i] = v[i] < 0.0 ? -v[i] : 0.0;
    }
    return out;
}

}  // namespace sipp
