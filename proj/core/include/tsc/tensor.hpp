#pragma once

#include <cstddef>
#include <vector>

#include "tsc/common.hpp"

namespace tsc {

/// Dense row-major array of 64-bit floats. The single value carrier for
/// network activations, parameters and gradients.
///
/// Axis conventions: convolutional tensors are [batch, channel, time],
/// dense tensors are [batch, feature]. Ops check the rank they expect.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const;
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    void fill(double v);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    /// Throws ShapeError unless the tensor has the given rank.
    void require_rank(std::size_t r, const char* who) const;

    /// Elementwise in-place accumulation; shapes must match.
    Tensor& operator+=(const Tensor& other);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Product of extents; throws ShapeError on a zero extent.
std::size_t shape_product(const std::vector<std::size_t>& shape);

}  // namespace tsc
