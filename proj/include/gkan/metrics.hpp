#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gkan {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + tn + fp + fn; }
  double accuracy() const noexcept;
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Positive prediction iff score >= threshold.
ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold = 0.5);

// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
// ties credited 1/2. O(n log n) via average ranks.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

// Trapezoidal area under the ROC curve traced over every distinct threshold.
double auc_roc_trapezoid(std::span<const double> scores, std::span<const int> labels);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when a zero denominator forced the corresponding value to 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

PrecisionRecall f1_score(const ConfusionCounts& counts);

struct SubjectScore {
  std::string id;
  int label = 0;
  double score = 0.0;
  int prediction = 0;
};

struct EvalReport {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double auc_roc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate_precision_recall = false;
  std::vector<SubjectScore> per_subject;
};

EvalReport make_report(std::span<const std::string> ids, std::span<const double> scores,
                       std::span<const int> labels, double threshold = 0.5);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

struct AggregateReport {
  MeanStd accuracy;
  MeanStd auc_roc;
  MeanStd precision;
  MeanStd recall;
  MeanStd f1;
  std::size_t folds = 0;
};

AggregateReport aggregate(std::span<const EvalReport> folds);

// "62.6% ±1.8%" for rates shown as percentages, "0.60 ±0.02" for F1.
std::string format_percent(const MeanStd& v);
std::string format_decimal(const MeanStd& v);

}  // namespace gkan
