#pragma once

// Raw dense kernels over row-major spans. Every kernel has a serial reference
// in `serial` and, where the loop is data-parallel, an OpenMP version in
// `omp` that computes each output entry with exactly the same sequence of
// floating-point operations, so the two agree bitwise.

#include <cstddef>
#include <span>

namespace gkan::kernels {

namespace serial {

// out[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t n);

// out[k x n] += a[m x k]^T * b[m x n]
void matmul_at_b_acc(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     std::size_t m, std::size_t k, std::size_t n);

// out[m x k] += a[m x n] * b[k x n]^T
void matmul_a_bt_acc(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     std::size_t m, std::size_t n, std::size_t k);

// Pearson correlation between every pair of columns of x[rows x cols].
// out is cols x cols. Columns with zero variance produce NaN entries; callers
// check variance first.
void pearson_matrix(std::span<const double> x, std::span<double> out, std::size_t rows,
                    std::size_t cols);

// Shifted-ReLU grid basis: out[r][j*grid + k] = phi_k(x[r][j]) where
// phi_0(t) = t and phi_k(t) = max(0, t - k/grid) for k >= 1.
void relu_grid_expand(std::span<const double> x, std::span<double> out, std::size_t rows,
                      std::size_t cols, std::size_t grid);

}  // namespace serial

namespace omp {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t n);

void pearson_matrix(std::span<const double> x, std::span<double> out, std::size_t rows,
                    std::size_t cols);

void relu_grid_expand(std::span<const double> x, std::span<double> out, std::size_t rows,
                      std::size_t cols, std::size_t grid);

}  // namespace omp

}  // namespace gkan::kernels
