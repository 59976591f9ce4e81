// kernels.hpp - deterministic numeric primitives shared by routers, experts and the tape
#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "moelab/tensor.hpp"

namespace moelab {

enum class Activation { relu, gelu, silu };

Activation activation_from_name(std::string_view name);
std::string_view activation_name(Activation a);

// Scalar activations. gelu is the tanh approximation with constant 0.044715;
// silu(x) = x * sigmoid(x).
double apply_activation(Activation a, double x);
// Derivative of the same scalar function.
double activation_derivative(Activation a, double x);
void activate(Tensor& t, Activation a);

// Numerically stable row-wise softmax over the last dimension: the row max is
// subtracted before exponentiation. temperature divides the logits; must be > 0.
void softmax_rows_inplace(Tensor& t, double temperature = 1.0);
Tensor softmax(const Tensor& t, double temperature = 1.0);

// Indices of the k largest entries of row, in descending value order.
// Ties break toward the lowest index; k must be in [1, width].
std::vector<std::size_t> topk_indices(const double* row, std::size_t width, std::size_t k);
std::vector<std::size_t> topk_indices(const std::vector<double>& row, std::size_t k);

// Row-wise x / max(||x||_2, eps). A zero row stays zero.
void l2_normalize_rows_inplace(Tensor& t, double eps = 1e-12);
Tensor l2_normalize_rows(const Tensor& t, double eps = 1e-12);

// out = A * B for rank-2 A (m x k) and B (k x n). Fixed ikj loop order so the
// reduction order, and hence the result, is identical run to run.
void matmul(const Tensor& a, const Tensor& b, Tensor& out);
Tensor matmul(const Tensor& a, const Tensor& b);
// out = A * B^T; rows(A) x rows(B). This is the natural layout for weight
// matrices stored as (out_features x in_features).
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out);
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// y = x * W^T (+ b), x treated as rows() x cols(), W as (out x in), b as out.
// Works for rank-2 and rank-3 x; the output keeps the leading dims of x.
Tensor affine_rows(const Tensor& x, const Tensor& w, const Tensor* b);

// Sylvester Hadamard matrix of order n (n a power of two), entries +-1.
Tensor hadamard_matrix(std::size_t n);

}  // namespace moelab
