#include "gkan/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "gkan/errors.hpp"
#include "gkan/kernels.hpp"

namespace gkan {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " does not match shape " + gkan::shape_str(rows, cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_str() const { return gkan::shape_str(rows_, cols_); }

std::string shape_str(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.all_finite()) throw NumericError("non-finite value in " + what);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul shape mismatch: " + a.shape_str() + " times " + b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  kernels::serial::matmul(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add shape mismatch: " + a.shape_str() + " and " + b.shape_str());
  }
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

Matrix scaled(const Matrix& a, double factor) {
  Matrix out = a;
  for (double& v : out.data()) v *= factor;
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("compare shape mismatch: " + a.shape_str() + " and " + b.shape_str());
  }
  double worst = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) worst = std::max(worst, std::abs(ad[i] - bd[i]));
  return worst;
}

}  // namespace gkan
