#include "gkan/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gkan/errors.hpp"

namespace gkan {

std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> theta, double h) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  std::vector<double> x(theta.begin(), theta.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw EvaluationError("non-finite function value at coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

std::vector<GradientMismatch> compare_gradients(std::span<const double> analytic,
                                                std::span<const double> numeric, double rel_tol,
                                                double abs_floor) {
  if (analytic.size() != numeric.size()) {
    throw ShapeError("gradient length mismatch: " + std::to_string(analytic.size()) + " vs " +
                     std::to_string(numeric.size()));
  }
  std::vector<GradientMismatch> bad;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double tol = std::max(rel_tol * std::max(std::abs(a), std::abs(n)), abs_floor);
    if (!(std::abs(a - n) <= tol)) bad.push_back({i, a, n});
  }
  return bad;
}

}  // namespace gkan
