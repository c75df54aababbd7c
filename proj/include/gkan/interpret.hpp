#pragma once

#include <string>
#include <vector>

#include "gkan/graph.hpp"
#include "gkan/model.hpp"

namespace gkan {

// Mean absolute coefficient mass of each output unit:
// S_i = (1 / J) * sum_j sum_k |c[i][j][k]| with J the input width (32).
std::vector<double> unit_importance(const KanLayer& layer);

struct ImportanceReport {
  // One vector per KAN layer (empty for the plain GCN baseline).
  std::vector<std::vector<double>> unit_scores;
  std::vector<double> roi_scores;         // min-max normalized to [0, 1]
  std::vector<std::string> ranking;       // ROI names, most salient first
  std::vector<std::size_t> ranking_index; // same order, as ROI indices
  // Set when every raw saliency is zero (e.g. untrained all-zero params).
  bool degenerate = false;
};

// Max-pool argmax attribution. For each subject and each pooled column, the
// node holding the column maximum is credited |activation| times the
// |classifier weight| of that column toward the predicted class. Credits are
// averaged over subjects (summed in subject-id order), min-max normalized and
// ranked descending with ties broken by ROI index.
ImportanceReport roi_saliency(const ModelParams& params, const RoiGraph& graph,
                              const CohortTable& subjects);

}  // namespace gkan
