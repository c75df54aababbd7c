#include "gkan/kernels.hpp"

#include <cmath>
#include <vector>

namespace gkan::kernels {

namespace {

// Centered column-major copy of x plus per-column sum of squares.
void center_columns(std::span<const double> x, std::size_t rows, std::size_t cols,
                    std::vector<double>& centered, std::vector<double>& sumsq, std::size_t c) {
  double mean = 0.0;
  for (std::size_t r = 0; r < rows; ++r) mean += x[r * cols + c];
  mean /= static_cast<double>(rows);
  double ss = 0.0;
  double* col = centered.data() + c * rows;
  for (std::size_t r = 0; r < rows; ++r) {
    col[r] = x[r * cols + c] - mean;
    ss += col[r] * col[r];
  }
  sumsq[c] = ss;
}

double centered_corr(const std::vector<double>& centered, const std::vector<double>& sumsq,
                     std::size_t rows, std::size_t i, std::size_t j) {
  const double* a = centered.data() + i * rows;
  const double* b = centered.data() + j * rows;
  double cross = 0.0;
  for (std::size_t r = 0; r < rows; ++r) cross += a[r] * b[r];
  return cross / std::sqrt(sumsq[i] * sumsq[j]);
}

bool row_is_zero(const double* row, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j)
    if (row[j] != 0.0) return false;
  return true;
}

inline double grid_basis(double t, std::size_t k, std::size_t grid) {
  if (k == 0) return t;
  const double shifted = t - static_cast<double>(k) / static_cast<double>(grid);
  return shifted > 0.0 ? shifted : 0.0;
}

}  // namespace

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) o[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * brow[j];
    }
  }
}

void matmul_at_b_acc(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t r = 0; r < m; ++r) {
    const double* brow = b.data() + r * n;
    if (row_is_zero(brow, n)) continue;  // pooled gradients leave most rows empty
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[r * k + p];
      if (av == 0.0) continue;
      double* o = out.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * brow[j];
    }
  }
}

void matmul_a_bt_acc(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     std::size_t m, std::size_t n, std::size_t k) {
  // axpy over a transposed copy of b vectorizes; the dot-product form does not
  std::vector<double> bt(n * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * n;
    double* o = out.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double av = arow[j];
      if (av == 0.0) continue;
      const double* brow = bt.data() + j * k;
      for (std::size_t p = 0; p < k; ++p) o[p] += av * brow[p];
    }
  }
}

void pearson_matrix(std::span<const double> x, std::span<double> out, std::size_t rows,
                    std::size_t cols) {
  std::vector<double> centered(rows * cols);
  std::vector<double> sumsq(cols);
  for (std::size_t c = 0; c < cols; ++c) center_columns(x, rows, cols, centered, sumsq, c);
  for (std::size_t i = 0; i < cols; ++i) {
    out[i * cols + i] = 1.0;
    for (std::size_t j = i + 1; j < cols; ++j) {
      const double r = centered_corr(centered, sumsq, rows, i, j);
      out[i * cols + j] = r;
      out[j * cols + i] = r;
    }
  }
}

void relu_grid_expand(std::span<const double> x, std::span<double> out, std::size_t rows,
                      std::size_t cols, std::size_t grid) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j)
      for (std::size_t k = 0; k < grid; ++k)
        out[(r * cols + j) * grid + k] = grid_basis(x[r * cols + j], k, grid);
}

}  // namespace serial

namespace omp {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* o = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) o[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * brow[j];
    }
  }
}

void pearson_matrix(std::span<const double> x, std::span<double> out, std::size_t rows,
                    std::size_t cols) {
  std::vector<double> centered(rows * cols);
  std::vector<double> sumsq(cols);
  const auto ncols = static_cast<long long>(cols);
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (long long c = 0; c < ncols; ++c)
      center_columns(x, rows, cols, centered, sumsq, static_cast<std::size_t>(c));
    // Row i owns the upper-triangle entries (i, j>i) and their mirrors.
#pragma omp for schedule(dynamic, 4)
    for (long long ii = 0; ii < ncols; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      out[i * cols + i] = 1.0;
      for (std::size_t j = i + 1; j < cols; ++j) {
        const double r = centered_corr(centered, sumsq, rows, i, j);
        out[i * cols + j] = r;
        out[j * cols + i] = r;
      }
    }
  }
}

void relu_grid_expand(std::span<const double> x, std::span<double> out, std::size_t rows,
                      std::size_t cols, std::size_t grid) {
  const auto n = static_cast<long long>(rows * cols);
#pragma omp parallel for schedule(static)
  for (long long idx = 0; idx < n; ++idx) {
    const auto e = static_cast<std::size_t>(idx);
    for (std::size_t k = 0; k < grid; ++k) out[e * grid + k] = grid_basis(x[e], k, grid);
  }
}

}  // namespace omp

}  // namespace gkan::kernels
