#include "moelab/tensor.hpp"

#include <stdexcept>
#include <string>

namespace moelab {

std::size_t Tensor::count(const std::vector<std::size_t>& shape) {
    if (shape.empty() || shape.size() > 3) {
        throw std::invalid_argument("Tensor: rank must be 1, 2 or 3, got " +
                                    std::to_string(shape.size()));
    }
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("Tensor: zero-sized dimension");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size()) {
        throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                    " does not match shape");
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor Tensor::row_vector(std::initializer_list<double> values) {
    return Tensor({1, values.size()}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) throw std::invalid_argument("Tensor::dim: axis out of range");
    return shape_[axis];
}

}  // namespace moelab
