#pragma once

#include <functional>
#include <span>
#include <vector>

namespace gkan {

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
// Throws EvaluationError naming the coordinate if f is non-finite there.
std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> theta, double h);

// Elementwise check |a - b| <= max(rel_tol * max(|a|, |b|), abs_floor).
struct GradientMismatch {
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};
std::vector<GradientMismatch> compare_gradients(std::span<const double> analytic,
                                                std::span<const double> numeric, double rel_tol,
                                                double abs_floor);

}  // namespace gkan
