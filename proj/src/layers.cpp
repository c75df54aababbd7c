#include "gkan/layers.hpp"

#include <cmath>

#include "gkan/errors.hpp"

namespace gkan {

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = uniform(rng, -scale, scale);
  return m;
}

double glorot_scale(std::size_t in, std::size_t out) {
  return std::sqrt(6.0 / static_cast<double>(in + out));
}

}  // namespace

GcnLayer GcnLayer::glorot(std::size_t in, std::size_t out, Rng& rng) {
  return {uniform_matrix(in, out, glorot_scale(in, out), rng)};
}

KanLayer KanLayer::zeros(std::size_t in, std::size_t out, std::size_t grid) {
  if (grid == 0) throw ConfigError("grid size must be at least 1");
  return {Matrix(in * grid, out), grid, kKanEpsilon};
}

KanLayer KanLayer::uniform_init(std::size_t in, std::size_t out, std::size_t grid, Rng& rng) {
  if (grid == 0) throw ConfigError("grid size must be at least 1");
  const double s = 1.0 / std::sqrt(static_cast<double>(in * grid));
  return {uniform_matrix(in * grid, out, s, rng), grid, kKanEpsilon};
}

AffineLayer AffineLayer::glorot(std::size_t in, std::size_t out, Rng& rng) {
  return {uniform_matrix(in, out, glorot_scale(in, out), rng), Matrix(1, out)};
}

ClassifierHead ClassifierHead::glorot(std::size_t in, std::size_t classes, Rng& rng) {
  return {uniform_matrix(in, classes, glorot_scale(in, classes), rng), Matrix(1, classes)};
}

ColumnStats column_stats(const Matrix& h) {
  if (h.rows() == 0) throw ShapeError("column statistics of an empty matrix " + h.shape_str());
  ColumnStats s;
  s.min.assign(h.row(0).begin(), h.row(0).end());
  s.max = s.min;
  for (std::size_t r = 1; r < h.rows(); ++r)
    for (std::size_t c = 0; c < h.cols(); ++c) {
      s.min[c] = std::min(s.min[c], h(r, c));
      s.max[c] = std::max(s.max[c], h(r, c));
    }
  return s;
}

Var gcn_forward(GradTape& tape, Var weight, Var propagator, Var h) {
  const Matrix& p = tape.value(propagator);
  const Matrix& x = tape.value(h);
  const Matrix& w = tape.value(weight);
  if (p.rows() != p.cols() || p.cols() != x.rows() || x.cols() != w.rows()) {
    throw ShapeError("gcn_forward shape mismatch: propagator " + p.shape_str() + ", features " +
                     x.shape_str() + ", weight " + w.shape_str());
  }
  // Same product either way; pick the cheaper association.
  const Var mixed = w.rows() <= w.cols() ? tape.matmul(tape.matmul(propagator, h), weight)
                                         : tape.matmul(propagator, tape.matmul(h, weight));
  return tape.relu(mixed);
}

std::pair<Var, ColumnStats> kan_normalize(GradTape& tape, Var h, double epsilon,
                                          const ColumnStats* frozen) {
  ColumnStats stats = frozen ? *frozen : column_stats(tape.value(h));
  std::vector<double> denom(stats.min.size());
  for (std::size_t c = 0; c < denom.size(); ++c) denom[c] = stats.max[c] - stats.min[c] + epsilon;
  Var out = tape.normalize_columns(h, stats.min, std::move(denom));
  return {out, std::move(stats)};
}

Var kan_forward(GradTape& tape, Var coeffs, Var h_normalized, std::size_t grid) {
  const Matrix& c = tape.value(coeffs);
  const Matrix& x = tape.value(h_normalized);
  if (grid == 0 || c.rows() != x.cols() * grid) {
    throw ShapeError("kan_forward shape mismatch: input " + x.shape_str() + " with grid " +
                     std::to_string(grid) + " against coefficients " + c.shape_str());
  }
  return tape.matmul(tape.relu_grid(h_normalized, grid), coeffs);
}

Var affine_relu_forward(GradTape& tape, Var weight, Var bias, Var h) {
  const Matrix& x = tape.value(h);
  const Matrix& w = tape.value(weight);
  if (x.cols() != w.rows()) {
    throw ShapeError("affine shape mismatch: input " + x.shape_str() + ", weight " +
                     w.shape_str());
  }
  return tape.relu(tape.add_row(tape.matmul(h, weight), bias));
}

Var dropout(GradTape& tape, Var h, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must satisfy 0 <= rate < 1, got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return h;
  const Matrix& x = tape.value(h);
  Matrix mask(x.rows(), x.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = uniform01(rng) < rate ? 0.0 : keep_scale;
  return tape.mul_const(h, std::move(mask));
}

Var global_max_pool(GradTape& tape, Var h) { return tape.column_max(h); }

Var classify(GradTape& tape, Var weight, Var bias, Var z) {
  const Matrix& zv = tape.value(z);
  const Matrix& w = tape.value(weight);
  if (zv.rows() != 1 || zv.cols() != w.rows()) {
    throw ShapeError("classify shape mismatch: pooled " + zv.shape_str() + ", weight " +
                     w.shape_str());
  }
  return tape.add_row(tape.matmul(z, weight), bias);
}

Matrix gcn_forward(const GcnLayer& layer, const Matrix& propagator, const Matrix& h) {
  GradTape tape;
  const Var out = gcn_forward(tape, tape.constant(layer.weight), tape.constant(propagator),
                              tape.constant(h));
  return tape.value(out);
}

std::pair<Matrix, ColumnStats> kan_normalize(const Matrix& h, double epsilon) {
  GradTape tape;
  auto [out, stats] = kan_normalize(tape, tape.constant(h), epsilon);
  return {tape.value(out), std::move(stats)};
}

Matrix kan_forward(const KanLayer& layer, const Matrix& h_normalized) {
  GradTape tape;
  const Var out = kan_forward(tape, tape.constant(layer.coeffs), tape.constant(h_normalized),
                              layer.grid_size);
  return tape.value(out);
}

Matrix dropout(const Matrix& h, double rate, bool training, Rng& rng) {
  GradTape tape;
  return tape.value(dropout(tape, tape.constant(h), rate, training, rng));
}

Matrix global_max_pool(const Matrix& h) {
  GradTape tape;
  return tape.value(global_max_pool(tape, tape.constant(h)));
}

Matrix classify(const ClassifierHead& head, const Matrix& z) {
  GradTape tape;
  const Var out = classify(tape, tape.constant(head.weight), tape.constant(head.bias),
                           tape.constant(z));
  return tape.value(out);
}

}  // namespace gkan
