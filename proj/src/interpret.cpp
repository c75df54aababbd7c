#include "gkan/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gkan/errors.hpp"

namespace gkan {

std::vector<double> unit_importance(const KanLayer& layer) {
  const std::size_t in = layer.in_features();
  const std::size_t out = layer.out_features();
  std::vector<double> scores(out, 0.0);
  if (in == 0) return scores;
  for (std::size_t i = 0; i < out; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < in; ++j)
      for (std::size_t k = 0; k < layer.grid_size; ++k) total += std::abs(layer.coeff(i, j, k));
    scores[i] = total / static_cast<double>(in);
  }
  return scores;
}

ImportanceReport roi_saliency(const ModelParams& params, const RoiGraph& graph,
                              const CohortTable& subjects) {
  const std::size_t n = subjects.subject_count();
  if (n == 0) throw UsageError("saliency needs at least one subject");
  if (graph.node_count() != subjects.roi_count()) {
    throw CompatibilityError("graph has " + std::to_string(graph.node_count()) +
                             " nodes but cohort has " + std::to_string(subjects.roi_count()) +
                             " ROIs");
  }
  const std::size_t nodes = graph.node_count();

  std::vector<std::vector<double>> credit(n, std::vector<double>(nodes, 0.0));
  const auto count = static_cast<long long>(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (long long ss = 0; ss < count; ++ss) {
    const auto s = static_cast<std::size_t>(ss);
    try {
      GradTape tape(params.slot_shapes());
      const ForwardTrace trace = model_forward(tape, params, graph.norm_propagator,
                                               subjects.node_features(s), ForwardOptions{});
      const Matrix& h = tape.value(trace.pre_pool);
      const Matrix& logits = tape.value(trace.logits);
      std::size_t predicted = 0;
      for (std::size_t c = 1; c < logits.cols(); ++c)
        if (logits(0, c) > logits(0, predicted)) predicted = c;
      for (std::size_t col = 0; col < h.cols(); ++col) {
        std::size_t arg = 0;
        for (std::size_t r = 1; r < h.rows(); ++r)
          if (h(r, col) > h(arg, col)) arg = r;
        credit[s][arg] += std::abs(h(arg, col)) * std::abs(params.head.weight(col, predicted));
      }
    } catch (...) {
      errors[s] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<std::size_t> by_id(n);
  std::iota(by_id.begin(), by_id.end(), 0);
  std::stable_sort(by_id.begin(), by_id.end(), [&](auto a, auto b) {
    return subjects.subject_ids[a] < subjects.subject_ids[b];
  });
  std::vector<double> raw(nodes, 0.0);
  for (std::size_t s : by_id)
    for (std::size_t v = 0; v < nodes; ++v) raw[v] += credit[s][v];
  for (double& v : raw) v /= static_cast<double>(n);

  ImportanceReport rep;
  if (params.kind == ModelKind::gcn_kan) {
    rep.unit_scores.push_back(unit_importance(params.kan1));
    rep.unit_scores.push_back(unit_importance(params.kan2));
  }
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  rep.roi_scores.assign(nodes, 0.0);
  if (hi == 0.0) {
    rep.degenerate = true;
  } else if (hi == lo) {
    std::fill(rep.roi_scores.begin(), rep.roi_scores.end(), 1.0);
  } else {
    for (std::size_t v = 0; v < nodes; ++v) rep.roi_scores[v] = (raw[v] - lo) / (hi - lo);
  }

  rep.ranking_index.resize(nodes);
  std::iota(rep.ranking_index.begin(), rep.ranking_index.end(), 0);
  std::stable_sort(rep.ranking_index.begin(), rep.ranking_index.end(),
                   [&](auto a, auto b) { return rep.roi_scores[a] > rep.roi_scores[b]; });
  for (std::size_t v : rep.ranking_index) rep.ranking.push_back(subjects.roi_names[v]);
  return rep;
}

}  // namespace gkan
