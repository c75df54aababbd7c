#include "gkan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "gkan/errors.hpp"

namespace gkan {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.empty()) throw UsageError("metrics need at least one subject");
  if (scores.size() != labels.size()) {
    throw UsageError("metrics got " + std::to_string(scores.size()) + " scores for " +
                     std::to_string(labels.size()) + " labels");
  }
  for (int l : labels)
    if (l != 0 && l != 1) throw UsageError("label " + std::to_string(l) + " is not 0 or 1");
}

std::pair<std::size_t, std::size_t> class_sizes(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int l : labels) pos += l == 1;
  return {pos, labels.size() - pos};
}

}  // namespace

double ConfusionCounts::accuracy() const noexcept {
  const auto n = total();
  return n == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(n);
}

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
  check_inputs(scores, labels);
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      predicted ? ++c.tp : ++c.fn;
    } else {
      predicted ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [pos, neg] = class_sizes(labels);
  if (pos == 0 || neg == 0) throw UndefinedMetricError("AUC-ROC needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Sum of 1-based average ranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]] == 1) rank_sum += avg_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

double auc_roc_trapezoid(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto [pos, neg] = class_sizes(labels);
  if (pos == 0 || neg == 0) throw UndefinedMetricError("AUC-ROC needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

  // Lower the threshold one distinct score at a time; counts stay integral
  // so the trapezoids are exact up to the final division.
  double area2 = 0.0;  // twice the area in (fp, tp) count units
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t tp_next = tp, fp_next = fp;
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      labels[order[j]] == 1 ? ++tp_next : ++fp_next;
      ++j;
    }
    area2 += static_cast<double>(fp_next - fp) * static_cast<double>(tp + tp_next);
    tp = tp_next;
    fp = fp_next;
    i = j;
  }
  return area2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

PrecisionRecall f1_score(const ConfusionCounts& c) {
  PrecisionRecall r;
  const auto tp = static_cast<double>(c.tp);
  if (c.tp + c.fp == 0) {
    r.precision_undefined = true;
  } else {
    r.precision = tp / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    r.recall_undefined = true;
  } else {
    r.recall = tp / static_cast<double>(c.tp + c.fn);
  }
  if (r.precision + r.recall == 0.0) {
    r.f1_undefined = true;
  } else {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

EvalReport make_report(std::span<const std::string> ids, std::span<const double> scores,
                       std::span<const int> labels, double threshold) {
  check_inputs(scores, labels);
  if (ids.size() != scores.size()) throw UsageError("metrics got mismatched subject ids");
  EvalReport rep;
  rep.counts = confusion(scores, labels, threshold);
  rep.accuracy = rep.counts.accuracy();
  rep.auc_roc = auc_roc(scores, labels);
  const PrecisionRecall pr = f1_score(rep.counts);
  rep.precision = pr.precision;
  rep.recall = pr.recall;
  rep.f1 = pr.f1;
  rep.degenerate_precision_recall = pr.precision_undefined || pr.recall_undefined || pr.f1_undefined;
  rep.per_subject.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    rep.per_subject.push_back({ids[i], labels[i], scores[i], scores[i] >= threshold ? 1 : 0});
  return rep;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

AggregateReport aggregate(std::span<const EvalReport> folds) {
  auto column = [&](auto field) {
    std::vector<double> v;
    for (const auto& f : folds) v.push_back(f.*field);
    return mean_std(v);
  };
  AggregateReport a;
  a.folds = folds.size();
  a.accuracy = column(&EvalReport::accuracy);
  a.auc_roc = column(&EvalReport::auc_roc);
  a.precision = column(&EvalReport::precision);
  a.recall = column(&EvalReport::recall);
  a.f1 = column(&EvalReport::f1);
  return a;
}

std::string format_percent(const MeanStd& v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f%% ±%.1f%%", 100.0 * v.mean, 100.0 * v.std);
  return buf;
}

std::string format_decimal(const MeanStd& v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ±%.2f", v.mean, v.std);
  return buf;
}

}  // namespace gkan
