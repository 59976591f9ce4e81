#include "moelab/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace moelab {
namespace {

// Fixed-order dot product: four independent accumulators, combined in a set
// order, so the result is reproducible and the loop still vectorizes.
double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((s0 + s1) + (s2 + s3)) + tail;
}

}  // namespace

Activation activation_from_name(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "gelu") return Activation::gelu;
    if (name == "silu") return Activation::silu;
    throw std::invalid_argument("activation_from_name: unknown activation '" + std::string(name) +
                                "' (expected relu, gelu or silu)");
}

std::string_view activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::gelu: return "gelu";
        case Activation::silu: return "silu";
    }
    return "?";
}

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::gelu: {
            const double c = 0.7978845608028654;  // sqrt(2/pi)
            return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
        }
        case Activation::silu: return x / (1.0 + std::exp(-x));
    }
    return 0.0;
}

double activation_derivative(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::gelu: {
            const double c = 0.7978845608028654;
            const double u = c * (x + 0.044715 * x * x * x);
            const double t = std::tanh(u);
            const double du = c * (1.0 + 3.0 * 0.044715 * x * x);
            return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
        }
        case Activation::silu: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 + x * (1.0 - s));
        }
    }
    return 0.0;
}

void activate(Tensor& t, Activation a) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = apply_activation(a, t[i]);
}

void softmax_rows_inplace(Tensor& t, double temperature) {
    if (temperature <= 0.0) {
        throw std::invalid_argument("softmax: temperature must be positive, got " +
                                    std::to_string(temperature));
    }
    const std::size_t rows = t.rows(), cols = t.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = t.row(i);
        double hi = row[0] / temperature;
        for (std::size_t j = 1; j < cols; ++j) hi = std::max(hi, row[j] / temperature);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            row[j] = std::exp(row[j] / temperature - hi);
            sum += row[j];
        }
        for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
    }
}

Tensor softmax(const Tensor& t, double temperature) {
    Tensor out = t;
    softmax_rows_inplace(out, temperature);
    return out;
}

std::vector<std::size_t> topk_indices(const double* row, std::size_t width, std::size_t k) {
    if (k == 0 || k > width) {
        throw std::invalid_argument("topk_indices: k must be in [1, " + std::to_string(width) +
                                    "], got " + std::to_string(k));
    }
    std::vector<std::size_t> order(width);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Stable sort keeps the lowest index first among equal values: the tie-break rule.
    std::stable_sort(order.begin(), order.end(),
                     [row](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    order.resize(k);
    return order;
}

std::vector<std::size_t> topk_indices(const std::vector<double>& row, std::size_t k) {
    return topk_indices(row.data(), row.size(), k);
}

void l2_normalize_rows_inplace(Tensor& t, double eps) {
    const std::size_t rows = t.rows(), cols = t.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = t.row(i);
        const double norm = std::sqrt(dot(row, row, cols));
        const double denom = std::max(norm, eps);
        for (std::size_t j = 0; j < cols; ++j) row[j] /= denom;
    }
}

Tensor l2_normalize_rows(const Tensor& t, double eps) {
    Tensor out = t;
    l2_normalize_rows_inplace(out, eps);
    return out;
}

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw std::invalid_argument("matmul: incompatible shapes");
    }
    const std::size_t m = a.dim(0), kk = a.dim(1), n = b.dim(1);
    out = Tensor({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double* dst = out.row(i);
        const double* arow = a.row(i);
        for (std::size_t k = 0; k < kk; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < n; ++j) dst[j] += aik * brow[j];
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor out;
    matmul(a, b, out);
    return out;
}

void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
        throw std::invalid_argument("matmul_nt: incompatible shapes");
    }
    const std::size_t m = a.dim(0), n = b.dim(0), kk = a.dim(1);
    out = Tensor({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double* dst = out.row(i);
        for (std::size_t j = 0; j < n; ++j) dst[j] = dot(a.row(i), b.row(j), kk);
    }
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    Tensor out;
    matmul_nt(a, b, out);
    return out;
}

Tensor affine_rows(const Tensor& x, const Tensor& w, const Tensor* b) {
    if (w.rank() != 2 || x.cols() != w.dim(1)) {
        throw std::invalid_argument("affine_rows: weight shape does not match input width");
    }
    const std::size_t rows = x.rows(), in = x.cols(), out_features = w.dim(0);
    if (b != nullptr && b->size() != out_features) {
        throw std::invalid_argument("affine_rows: bias length does not match output width");
    }
    std::vector<std::size_t> shape(x.shape());
    shape.back() = out_features;
    Tensor y(std::move(shape));
    for (std::size_t i = 0; i < rows; ++i) {
        const double* xrow = x.row(i);
        double* yrow = y.row(i);
        for (std::size_t o = 0; o < out_features; ++o) {
            yrow[o] = dot(xrow, w.row(o), in) + (b != nullptr ? (*b)[o] : 0.0);
        }
    }
    return y;
}

Tensor hadamard_matrix(std::size_t n) {
    if (n == 0 || (n & (n - 1)) != 0) {
        throw std::invalid_argument("hadamard_matrix: order must be a power of two");
    }
    Tensor h({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            h.at(i, j) = (std::popcount(i & j) & 1U) != 0 ? -1.0 : 1.0;
        }
    }
    return h;
}

}  // namespace moelab
