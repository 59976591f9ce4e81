// tensor.hpp - dense row-major double tensor, rank 1..3
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace moelab {

// Minimal dense carrier for token states, logits and probabilities.
// Row-major; all arithmetic in the library runs on 64-bit floats.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    // Rank-2 identity.
    static Tensor identity(std::size_t n);
    static Tensor row_vector(std::initializer_list<double> values);

    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t dim(std::size_t axis) const;

    // Leading dims collapsed: a B x S x H tensor is rows() = B*S rows of width cols().
    std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }
    std::size_t rows() const { return shape_.empty() ? 0 : data_.size() / shape_.back(); }
    double* row(std::size_t i) { return data_.data() + i * cols(); }
    const double* row(std::size_t i) const { return data_.data() + i * cols(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<const double> values() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    // Exact elementwise equality (bit-for-bit on finite values).
    bool equals(const Tensor& other) const { return shape_ == other.shape_ && data_ == other.data_; }

    void fill(double value) { data_.assign(data_.size(), value); }

private:
    static std::size_t count(const std::vector<std::size_t>& shape);

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace moelab
