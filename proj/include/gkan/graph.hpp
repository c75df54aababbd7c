#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gkan/matrix.hpp"

namespace gkan {

// Subjects x ROIs feature table with binary labels (0 = negative, 1 = positive).
struct CohortTable {
  std::vector<std::string> subject_ids;
  std::vector<int> labels;
  Matrix features;  // subjects x n_roi
  std::vector<std::string> roi_names;

  std::size_t subject_count() const noexcept { return subject_ids.size(); }
  std::size_t roi_count() const noexcept { return roi_names.size(); }

  // Throws ConfigError describing the first violated invariant.
  void validate() const;

  // Rows selected by index, in the given order.
  CohortTable subset(const std::vector<std::size_t>& rows) const;

  // Node features of one subject as an n_roi x 1 matrix.
  Matrix node_features(std::size_t subject) const;
};

// Population ROI graph shared by every subject's graph.
struct RoiGraph {
  Matrix adjacency;        // symmetric, zero diagonal
  Matrix norm_propagator;  // D^-1/2 (A + I) D^-1/2
  double threshold_used = 0.0;

  std::size_t node_count() const noexcept { return adjacency.rows(); }
};

// Signed Pearson correlation between ROI columns across the cohort's
// subjects, kept where |corr| > tau (strict), diagonal zeroed.
RoiGraph build_adjacency(const CohortTable& cohort, double tau);

// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I.
Matrix normalize_propagator(const Matrix& adjacency);

// Graph over a single adjacency, e.g. one reloaded from a checkpoint.
RoiGraph graph_from_adjacency(Matrix adjacency, double tau);

}  // namespace gkan
