#include "gkan/graph.hpp"

#include <cmath>

#include "gkan/errors.hpp"
#include "gkan/kernels.hpp"

namespace gkan {

void CohortTable::validate() const {
  const std::size_t n = subject_ids.size();
  if (labels.size() != n || features.rows() != n) {
    throw ConfigError("cohort has " + std::to_string(n) + " subject ids, " +
                      std::to_string(labels.size()) + " labels and " +
                      std::to_string(features.rows()) + " feature rows");
  }
  if (roi_names.size() < 2) throw ConfigError("cohort needs at least 2 ROIs");
  if (features.cols() != roi_names.size()) {
    throw ConfigError("cohort feature width " + std::to_string(features.cols()) + " but " +
                      std::to_string(roi_names.size()) + " ROI names");
  }
  if (!features.all_finite()) throw ConfigError("cohort contains non-finite features");
  bool seen[2] = {false, false};
  for (int l : labels) {
    if (l != 0 && l != 1) throw ConfigError("label " + std::to_string(l) + " is not 0 or 1");
    seen[l] = true;
  }
  if (!seen[0] || !seen[1]) throw ConfigError("cohort needs at least one subject of each class");
}

CohortTable CohortTable::subset(const std::vector<std::size_t>& rows) const {
  CohortTable out;
  out.roi_names = roi_names;
  out.features = Matrix(rows.size(), features.cols());
  out.subject_ids.reserve(rows.size());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= subject_ids.size()) throw UsageError("subset row out of range");
    out.subject_ids.push_back(subject_ids[r]);
    out.labels.push_back(labels[r]);
    auto src = features.row(r);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
  }
  return out;
}

Matrix CohortTable::node_features(std::size_t subject) const {
  auto src = features.row(subject);
  return Matrix(src.size(), 1, std::vector<double>(src.begin(), src.end()));
}

RoiGraph build_adjacency(const CohortTable& cohort, double tau) {
  if (!(tau >= 0.0 && tau < 1.0)) {
    throw ConfigError("threshold tau must satisfy 0 <= tau < 1, got " + std::to_string(tau));
  }
  cohort.validate();
  const Matrix& x = cohort.features;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    bool constant = true;
    for (std::size_t r = 1; r < x.rows() && constant; ++r) constant = x(r, c) == x(0, c);
    if (constant) {
      throw DegenerateFeatureError("ROI '" + cohort.roi_names[c] +
                                   "' has zero variance across subjects; correlation undefined");
    }
  }

  const std::size_t n = x.cols();
  Matrix corr(n, n);
  kernels::omp::pearson_matrix(x.data(), corr.data(), x.rows(), n);

  Matrix adjacency(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && std::abs(corr(i, j)) > tau) adjacency(i, j) = corr(i, j);

  RoiGraph g;
  g.norm_propagator = normalize_propagator(adjacency);
  g.adjacency = std::move(adjacency);
  g.threshold_used = tau;
  return g;
}

Matrix normalize_propagator(const Matrix& adjacency) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n) {
    throw ShapeError("adjacency must be square, got " + adjacency.shape_str());
  }
  require_finite(adjacency, "adjacency");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(adjacency(i, j) - adjacency(j, i)) > 1e-12) {
        throw ShapeError("adjacency is not symmetric at (" + std::to_string(i) + ", " +
                         std::to_string(j) + ")");
      }

  Matrix with_loops = adjacency;
  for (std::size_t i = 0; i < n; ++i) with_loops(i, i) += 1.0;
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) degree[i] += with_loops(i, j);
    if (!(degree[i] > 0.0)) {
      throw DegenerateDegreeError("node " + std::to_string(i) + " has non-positive degree " +
                                  std::to_string(degree[i]) + " in A + I");
    }
  }
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      p(i, j) = with_loops(i, j) / std::sqrt(degree[i] * degree[j]);
  return p;
}

RoiGraph graph_from_adjacency(Matrix adjacency, double tau) {
  RoiGraph g;
  g.norm_propagator = normalize_propagator(adjacency);
  g.adjacency = std::move(adjacency);
  g.threshold_used = tau;
  return g;
}

}  // namespace gkan
