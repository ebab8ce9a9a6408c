#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sipp {

using Shape = std::vector<std::size_t>;

std::size_t shape_volume(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Every extent is positive and the element count always matches the shape.
/// Construction from explicit data rejects NaN/Inf entries.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);  // zero-filled
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Row-major sub-block along the leading dimension (e.g. one batch item).
    std::span<double> slice(std::size_t index);
    std::span<const double> slice(std::size_t index) const;
    std::size_t slice_size() const;

    /// Shape with the leading extent removed.
    Shape trailing_shape() const;

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

double frobenius_norm(std::span<const double> values);
inline double frobenius_norm(const Tensor& t) { return frobenius_norm(t.data()); }

/// Positive and negative parts of a signed vector; both are element-wise
/// nonnegative and `plus - minus` reproduces the input bit for bit.
struct QuadrantSplit {
    std::vector<double> plus;
    std::vector<double> minus;
};

QuadrantSplit quadrant_split(std::span<const double> v);

}  // namespace sipp
