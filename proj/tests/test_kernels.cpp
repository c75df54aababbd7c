#include <omp.h>

#include "doctest.h"
#include "gkan/kernels.hpp"
#include "oracles.hpp"

using namespace gkan;

namespace {

Matrix brute_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t p = 0; p < a.cols(); ++p) out(i, j) += a(i, p) * b(p, j);
  return out;
}

// Sparse like the activations the kernels see: about a third exact zeros.
Matrix sparse_random(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m = oracle::random_matrix(r, c, rng);
  for (double& v : m.data())
    if (uniform01(rng) < 0.33) v = 0.0;
  return m;
}

}  // namespace

TEST_CASE("serial kernels agree with brute-force products") {
  Rng rng = derive_rng(3, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix a = sparse_random(7, 5, rng), b = sparse_random(5, 4, rng);
    Matrix out(7, 4);
    kernels::serial::matmul(a.data(), b.data(), out.data(), 7, 5, 4);
    CHECK(max_abs_diff(out, brute_matmul(a, b)) < 1e-12);

    // a^T c accumulated into a nonzero buffer
    const Matrix c = sparse_random(7, 4, rng);
    Matrix acc = oracle::random_matrix(5, 4, rng);
    const Matrix expect = add(acc, brute_matmul(a.transposed(), c));
    kernels::serial::matmul_at_b_acc(a.data(), c.data(), acc.data(), 7, 5, 4);
    CHECK(max_abs_diff(acc, expect) < 1e-12);

    // c b^T accumulated
    Matrix acc2 = oracle::random_matrix(7, 5, rng);
    const Matrix expect2 = add(acc2, brute_matmul(c, b.transposed()));
    kernels::serial::matmul_a_bt_acc(c.data(), b.data(), acc2.data(), 7, 4, 5);
    CHECK(max_abs_diff(acc2, expect2) < 1e-12);
  }
}

TEST_CASE("serial pearson matches the textbook formula") {
  Rng rng = derive_rng(4, 0);
  const Matrix x = oracle::random_matrix(30, 6, rng);
  Matrix out(6, 6);
  kernels::serial::pearson_matrix(x.data(), out.data(), 30, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(std::abs(out(i, j) - (i == j ? 1.0 : oracle::pearson(x, i, j))) < 1e-12);
}

TEST_CASE("grid expansion places each basis value at j*G+k") {
  const Matrix x{{0.75, 0.0}};
  Matrix out(1, 4);
  kernels::serial::relu_grid_expand(x.data(), out.data(), 1, 2, 2);
  CHECK(out(0, 0) == 0.75);
  CHECK(out(0, 1) == 0.25);
  CHECK(out(0, 2) == 0.0);
  CHECK(out(0, 3) == 0.0);
}

TEST_CASE("OpenMP kernels are bitwise equal to the serial reference") {
  const int saved = omp_get_max_threads();
  for (int threads : {1, 2, 4, 7}) {
    omp_set_num_threads(threads);
    Rng rng = derive_rng(9, static_cast<std::uint64_t>(threads));
    for (auto [m, k, n] : {std::tuple{1, 1, 1}, {13, 7, 5}, {90, 90, 32}, {64, 320, 32}}) {
      const Matrix a = sparse_random(m, k, rng), b = oracle::random_matrix(k, n, rng);
      Matrix s(m, n), p(m, n);
      kernels::serial::matmul(a.data(), b.data(), s.data(), m, k, n);
      kernels::omp::matmul(a.data(), b.data(), p.data(), m, k, n);
      CHECK(s == p);
    }
    for (auto [rows, cols] : {std::pair{3, 2}, {40, 17}, {110, 90}}) {
      const Matrix x = oracle::random_matrix(rows, cols, rng);
      Matrix s(cols, cols), p(cols, cols);
      kernels::serial::pearson_matrix(x.data(), s.data(), rows, cols);
      kernels::omp::pearson_matrix(x.data(), p.data(), rows, cols);
      CHECK(s == p);

      Matrix gs(rows, cols * 10), gp(rows, cols * 10);
      kernels::serial::relu_grid_expand(x.data(), gs.data(), rows, cols, 10);
      kernels::omp::relu_grid_expand(x.data(), gp.data(), rows, cols, 10);
      CHECK(gs == gp);
    }
  }
  omp_set_num_threads(saved);
}
