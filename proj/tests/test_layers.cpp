#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gkan/errors.hpp"
#include "gkan/layers.hpp"
#include "gkan/model.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

using namespace gkan;

TEST_CASE("gcn with identity propagator and weight passes non-negative input through") {
  const GcnLayer layer{Matrix::identity(2)};
  const Matrix h{{0.5, 2.0}, {0.0, 1.0}, {3.0, 0.25}};
  CHECK(gcn_forward(layer, Matrix::identity(3), h) == h);
  const Matrix mixed{{-0.5, 2.0}, {1.0, -1.0}, {3.0, 0.25}};
  CHECK(gcn_forward(layer, Matrix::identity(3), mixed) == Matrix{{0, 2}, {1, 0}, {3, 0.25}});
}

TEST_CASE("gcn on a 4-node path with one-hot features") {
  Matrix a(4, 4);
  for (std::size_t i = 0; i < 3; ++i) a(i, i + 1) = a(i + 1, i) = 1.0;
  const Matrix p = normalize_propagator(a);
  // degrees with self-loops: 2, 3, 3, 2
  const double d[4] = {2, 3, 3, 2};
  const Matrix out = gcn_forward(GcnLayer{Matrix::identity(4)}, p, Matrix::identity(4));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const bool linked = i == j || (i > j ? i - j : j - i) == 1;
      CHECK(out(i, j) == doctest::Approx(linked ? 1.0 / std::sqrt(d[i] * d[j]) : 0.0).epsilon(1e-15));
    }
}

TEST_CASE("gcn shape mismatch") {
  CHECK_THROWS_AS(gcn_forward(GcnLayer{Matrix(2, 3)}, Matrix::identity(3), Matrix(3, 1)), ShapeError);
}

TEST_CASE("min-max normalization of [0, 5, 10] and of a constant column") {
  const auto [n, stats] = kan_normalize(Matrix{{0, 7}, {5, 7}, {10, 7}}, 1e-8);
  CHECK(std::abs(n(0, 0) - 0.0) < 1e-8);
  CHECK(std::abs(n(1, 0) - 0.5) < 1e-8);
  CHECK(std::abs(n(2, 0) - 1.0) < 1e-8);
  CHECK(n(2, 0) < 1.0);
  for (std::size_t r = 0; r < 3; ++r) CHECK(n(r, 1) == 0.0);
  CHECK(stats.min == std::vector<double>{0, 7});
  CHECK(stats.max == std::vector<double>{10, 7});
}

TEST_CASE("kan_forward hand examples") {
  SUBCASE("zero coefficients give zero output") {
    const auto layer = KanLayer::zeros(3, 4, 5);
    CHECK(kan_forward(layer, Matrix(2, 3, 0.3)) == Matrix(2, 4));
  }
  SUBCASE("G = 1 with identity coefficients is the identity on [0, 1]") {
    auto layer = KanLayer::zeros(3, 3, 1);
    for (std::size_t i = 0; i < 3; ++i) layer.coeff(i, i, 0) = 1.0;
    const Matrix h{{0.0, 0.4, 0.99}, {0.7, 0.1, 0.5}};
    CHECK(kan_forward(layer, h) == h);
  }
  SUBCASE("G = 2 at h = 0.75") {
    auto layer = KanLayer::zeros(1, 1, 2);
    layer.coeff(0, 0, 0) = 1.0;
    layer.coeff(0, 0, 1) = 2.0;
    CHECK(kan_forward(layer, Matrix{{0.75}})(0, 0) == doctest::Approx(1.25).epsilon(1e-15));
  }
}

TEST_CASE("kan_forward matches the triple-sum oracle") {
  Rng rng = derive_rng(8, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t in = 1 + uniform_index(rng, 6), out = 1 + uniform_index(rng, 6);
    const std::size_t grid = 1 + uniform_index(rng, 12);
    const auto layer = KanLayer::uniform_init(in, out, grid, rng);
    const Matrix h = oracle::random_matrix(1 + uniform_index(rng, 5), in, rng, 0.0, 1.0);
    CHECK(max_abs_diff(kan_forward(layer, h), oracle::kan_forward(oracle::coeffs_of(layer), h, grid)) <
          1e-12);
  }
}

TEST_CASE("kan_forward is linear within a grid cell and continuous across knots") {
  Rng rng = derive_rng(12, 0);
  const std::size_t grid = 10;
  const auto layer = KanLayer::uniform_init(3, 4, grid, rng);
  Matrix base = oracle::random_matrix(1, 3, rng, 0.0, 1.0);
  auto eval = [&](double t) {
    Matrix h = base;
    h(0, 1) = t;
    return kan_forward(layer, h);
  };
  for (std::size_t cell = 0; cell < grid; ++cell) {
    const double lo = static_cast<double>(cell) / grid, hi = lo + 1.0 / grid;
    const double a = lo + 0.1 / grid, b = lo + 0.5 / grid, c = lo + 0.9 / grid;
    // equal spacing, so a linear map has zero second difference
    const Matrix fa = eval(a), fb = eval(b), fc = eval(c);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(fa(0, i) - 2 * fb(0, i) + fc(0, i)) < 1e-12);
    if (cell + 1 < grid) CHECK(max_abs_diff(eval(hi - 1e-9), eval(hi + 1e-9)) < 1e-7);
  }
}

TEST_CASE("kan initialization scale") {
  Rng rng = derive_rng(1, 0);
  const auto layer = KanLayer::uniform_init(32, 32, 10, rng);
  const double s = 1.0 / std::sqrt(320.0);
  double largest = 0;
  for (double v : layer.coeffs.data()) largest = std::max(largest, std::abs(v));
  CHECK(largest <= s);
  CHECK(largest > 0.9 * s);
  CHECK(layer.epsilon == 1e-8);
}

TEST_CASE("dropout modes") {
  Rng rng = derive_rng(2, 0);
  const Matrix h = oracle::random_matrix(20, 30, rng);
  CHECK(dropout(h, 0.0, true, rng) == h);
  CHECK(dropout(h, 0.7, false, rng) == h);
  CHECK_THROWS_AS(dropout(h, 1.0, true, rng), ConfigError);
  CHECK_THROWS_AS(dropout(h, -0.1, true, rng), ConfigError);

  const Matrix d = dropout(h, 0.2, true, rng);
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (d.data()[i] == 0.0) ++dropped;
    else CHECK(d.data()[i] == doctest::Approx(h.data()[i] / 0.8).epsilon(1e-15));
  }
  CHECK(dropped > 80);
  CHECK(dropped < 160);
}

TEST_CASE("global max pool") {
  CHECK(global_max_pool(Matrix{{1, 5}, {3, 2}}) == Matrix{{3, 5}});
  CHECK(global_max_pool(Matrix{{4, -1, 2}}) == Matrix{{4, -1, 2}});
  CHECK_THROWS_AS(global_max_pool(Matrix(0, 3)), ShapeError);

  Rng rng = derive_rng(3, 0);
  const Matrix h = oracle::random_matrix(6, 4, rng);
  std::vector<std::size_t> order{5, 2, 0, 4, 1, 3};
  Matrix permuted(6, 4);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 4; ++c) permuted(r, c) = h(order[r], c);
  CHECK(global_max_pool(permuted) == global_max_pool(h));
}

TEST_CASE("max pool gradient lands on argmax entries, ties on the lowest row") {
  GradTape tape({{3, 2}});
  const Var h = tape.parameter(0, Matrix{{1, 7}, {4, 7}, {2, 0}});
  const auto g = tape.backward(tape.sum(global_max_pool(tape, h)));
  CHECK(g[0] == Matrix{{0, 1}, {1, 0}, {0, 0}});
}

TEST_CASE("classifier head") {
  ClassifierHead head{Matrix(3, 2), Matrix{{1, -1}}};
  CHECK(classify(head, Matrix{{0.3, -2, 5}}) == Matrix{{1, -1}});
  Rng rng = derive_rng(4, 0);
  head = ClassifierHead::glorot(3, 2, rng);
  head.bias = Matrix{{0.5, -0.25}};
  CHECK(classify(head, Matrix(1, 3)) == head.bias);
  const Matrix z{{0.3, -2, 5}};
  const Matrix got = classify(head, z);
  for (std::size_t c = 0; c < 2; ++c) {
    double dot = head.bias(0, c);
    for (std::size_t j = 0; j < 3; ++j) dot += z(0, j) * head.weight(j, c);
    CHECK(got(0, c) == doctest::Approx(dot).epsilon(1e-14));
  }
  CHECK_THROWS_AS(classify(head, Matrix(1, 4)), ShapeError);
}

TEST_CASE("all-zero model returns the bias as logits") {
  for (auto kind : {ModelKind::gcn_kan, ModelKind::gcn}) {
    auto params = ModelParams::zeros(kind, ModelShape{});
    params.head.bias = Matrix{{0.4, -0.6}};
    const RoiGraph g = graph_from_adjacency(Matrix(5, 5), 0.1);
    const Matrix x{{1}, {2}, {3}, {4}, {5}};
    CHECK(model_logits(params, g, x) == params.head.bias);
  }
}

TEST_CASE("inference is a deterministic function of params, graph and x") {
  const auto params = ModelParams::init(ModelKind::gcn_kan, ModelShape{}, 42);
  const auto again = ModelParams::init(ModelKind::gcn_kan, ModelShape{}, 42);
  CHECK(params.flatten() == again.flatten());
  const RoiGraph g = graph_from_adjacency(Matrix{{0, 0.5, 0}, {0.5, 0, 0.3}, {0, 0.3, 0}}, 0.1);
  const Matrix x{{0.2}, {-1.0}, {0.7}};
  const Matrix l = model_logits(params, g, x);
  CHECK(l.rows() == 1);
  CHECK(l.cols() == 2);
  CHECK(model_logits(again, g, x) == l);
}

TEST_CASE("model shape follows the layer dimensions") {
  const auto p = ModelParams::init(ModelKind::gcn_kan, ModelShape{}, 0);
  CHECK(p.gcn1.weight.rows() == 1);
  CHECK(p.gcn1.weight.cols() == 32);
  CHECK(p.gcn2.weight.rows() == 32);
  CHECK(p.kan1.in_features() == 32);
  CHECK(p.kan1.out_features() == 32);
  CHECK(p.kan2.grid_size == 10);
  CHECK(p.head.weight.rows() == 32);
  CHECK(p.head.weight.cols() == 2);
  CHECK(p.parameter_count() == 32 + 1024 + 2 * 10240 + 64 + 2);
}

TEST_CASE("each layer's tape gradient matches finite differences") {
  Rng rng = derive_rng(31, 0);
  const std::size_t n = 5;
  Matrix a(n, n);
  for (std::size_t i = 0; i + 1 < n; ++i) a(i, i + 1) = a(i + 1, i) = 0.6;
  const Matrix prop = normalize_propagator(a);

  SUBCASE("gcn") {
    const auto c = oracle::check_gradients(
        {oracle::random_matrix(3, 4, rng), oracle::random_matrix(n, 3, rng)},
        [&](GradTape& t, const std::vector<Var>& v) {
          return oracle::weighted_sum(t, gcn_forward(t, v[0], t.constant(prop), v[1]));
        });
    CHECK(c.mismatches.empty());
  }
  SUBCASE("normalize then kan with frozen statistics") {
    const Matrix h = oracle::random_matrix(n, 3, rng);
    const ColumnStats frozen = column_stats(h);
    const auto c = oracle::check_gradients(
        {h, oracle::random_matrix(3 * 4, 2, rng)}, [&](GradTape& t, const std::vector<Var>& v) {
          auto [norm, stats] = kan_normalize(t, v[0], kKanEpsilon, &frozen);
          return oracle::weighted_sum(t, kan_forward(t, v[1], norm, 4));
        });
    CHECK(c.mismatches.empty());
  }
  SUBCASE("affine relu") {
    const auto c = oracle::check_gradients(
        {oracle::random_matrix(3, 4, rng), oracle::random_matrix(1, 4, rng),
         oracle::random_matrix(n, 3, rng)},
        [&](GradTape& t, const std::vector<Var>& v) {
          return oracle::weighted_sum(t, affine_relu_forward(t, v[0], v[1], v[2]));
        });
    CHECK(c.mismatches.empty());
  }
  SUBCASE("dropout with a fixed mask") {
    const auto c = oracle::check_gradients(
        {oracle::random_matrix(n, 3, rng)}, [&](GradTape& t, const std::vector<Var>& v) {
          Rng fixed = derive_rng(5, 5);
          return oracle::weighted_sum(t, dropout(t, v[0], 0.3, true, fixed));
        });
    CHECK(c.mismatches.empty());
  }
  SUBCASE("pool and classify") {
    const auto c = oracle::check_gradients(
        {oracle::random_matrix(n, 4, rng), oracle::random_matrix(4, 2, rng),
         oracle::random_matrix(1, 2, rng)},
        [&](GradTape& t, const std::vector<Var>& v) {
          const Var logits = classify(t, v[1], v[2], global_max_pool(t, v[0]));
          return t.softmax_cross_entropy(logits, 1);
        });
    CHECK(c.mismatches.empty());
  }
}

TEST_CASE("one KAN layer fits sin(2 pi x); affine least squares for comparison") {
  const auto fit = scenario::fit_sine();
  CHECK(fit.kan_mse < 1e-2);
  // the least-squares line leaves ~0.196 of the 0.5 variance unexplained
  CHECK(fit.affine_mse == doctest::Approx(0.196).epsilon(0.01));
}
