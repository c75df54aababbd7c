#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "gkan/matrix.hpp"
#include "gkan/rng.hpp"
#include "gkan/tape.hpp"

namespace gkan {

inline constexpr double kKanEpsilon = 1e-8;

struct GcnLayer {
  Matrix weight;  // F_in x F_out

  static GcnLayer glorot(std::size_t in, std::size_t out, Rng& rng);
};

// Learnable shifted-ReLU grid layer. Coefficient c[i][j][k] (output unit i,
// input unit j, grid index k) lives at coeffs(j * grid_size + k, i), which
// makes the forward pass a single basis-times-coefficients product.
struct KanLayer {
  Matrix coeffs;  // (in * grid_size) x out
  std::size_t grid_size = 10;
  double epsilon = kKanEpsilon;

  static KanLayer zeros(std::size_t in, std::size_t out, std::size_t grid);
  // uniform(-s, s), s = 1 / sqrt(in * grid)
  static KanLayer uniform_init(std::size_t in, std::size_t out, std::size_t grid, Rng& rng);

  std::size_t in_features() const noexcept { return grid_size ? coeffs.rows() / grid_size : 0; }
  std::size_t out_features() const noexcept { return coeffs.cols(); }
  double& coeff(std::size_t i, std::size_t j, std::size_t k) {
    return coeffs(j * grid_size + k, i);
  }
  double coeff(std::size_t i, std::size_t j, std::size_t k) const {
    return coeffs(j * grid_size + k, i);
  }
};

// Dense layer used by the plain-GCN baseline in place of a KanLayer.
struct AffineLayer {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out

  static AffineLayer glorot(std::size_t in, std::size_t out, Rng& rng);
};

struct ClassifierHead {
  Matrix weight;  // hidden x classes
  Matrix bias;    // 1 x classes

  static ClassifierHead glorot(std::size_t in, std::size_t classes, Rng& rng);
};

// Per-column min/max used by min-max normalization.
struct ColumnStats {
  std::vector<double> min;
  std::vector<double> max;

  friend bool operator==(const ColumnStats&, const ColumnStats&) = default;
};

ColumnStats column_stats(const Matrix& h);

// --- tape-level blocks ------------------------------------------------------

// ReLU(propagator * h * weight)
Var gcn_forward(GradTape& tape, Var weight, Var propagator, Var h);

// (h - min) / (max - min + epsilon) per column. Statistics come from `h`
// unless `frozen` is given; either way they are constants for differentiation.
std::pair<Var, ColumnStats> kan_normalize(GradTape& tape, Var h, double epsilon,
                                          const ColumnStats* frozen = nullptr);

// out[n][i] = sum_j sum_k c[i][j][k] * max(0, h[n][j] - k/G)
Var kan_forward(GradTape& tape, Var coeffs, Var h_normalized, std::size_t grid);

// ReLU(h * weight + bias)
Var affine_relu_forward(GradTape& tape, Var weight, Var bias, Var h);

// Inverted dropout; identity when !training or rate == 0.
Var dropout(GradTape& tape, Var h, double rate, bool training, Rng& rng);

Var global_max_pool(GradTape& tape, Var h);

Var classify(GradTape& tape, Var weight, Var bias, Var z);

// --- matrix-level conveniences ----------------------------------------------

Matrix gcn_forward(const GcnLayer& layer, const Matrix& propagator, const Matrix& h);
std::pair<Matrix, ColumnStats> kan_normalize(const Matrix& h, double epsilon);
Matrix kan_forward(const KanLayer& layer, const Matrix& h_normalized);
Matrix dropout(const Matrix& h, double rate, bool training, Rng& rng);
Matrix global_max_pool(const Matrix& h);  // 1 x C
Matrix classify(const ClassifierHead& head, const Matrix& z);

}  // namespace gkan
