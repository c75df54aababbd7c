#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "gkan/graph.hpp"
#include "gkan/metrics.hpp"
#include "gkan/model.hpp"

namespace gkan {

struct TrainConfig {
  ModelKind model = ModelKind::gcn_kan;
  std::size_t batch_size = 32;
  double lr = 0.0005;
  double weight_decay = 1e-4;
  double dropout = 0.2;
  std::size_t grid_size = 10;
  double tau = 0.1;
  std::size_t epochs_max = 1000;
  std::size_t early_stop_patience = 50;
  std::size_t scheduler_patience = 20;
  double scheduler_factor = 0.1;
  double min_lr = 1e-6;
  double improvement_delta = 1e-4;
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  // Evaluate training accuracy in inference mode after every epoch.
  bool track_train_accuracy = false;

  // Throws ConfigError naming the offending field.
  void validate() const;
  ModelShape model_shape() const;
};

// -log softmax(logits)[label], stabilized by subtracting the largest logit.
double cross_entropy(std::span<const double> logits, std::size_t label);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One Adam update with L2 weight decay folded into the gradient
// (g <- g + weight_decay * theta) before the moment updates. Throws
// TrainingError naming the tensor on a non-finite gradient.
void adam_step(ModelParams& params, const Gradients& grads, double lr, double weight_decay,
               const AdamHyper& hyper = {});

// Learning-rate reduction on a validation plateau. A loss counts as an
// improvement when it beats the best so far by more than `delta`; once more
// than `patience` consecutive epochs fail to improve, lr is multiplied by
// `factor` (floored at min_lr) and the counter resets.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, std::size_t patience, double factor, double min_lr,
                   double delta = 1e-4);

  // Returns the learning rate to use for the next epoch.
  double step(double val_loss);
  double lr() const noexcept { return lr_; }
  std::size_t bad_epochs() const noexcept { return bad_; }

 private:
  double lr_;
  std::size_t patience_;
  double factor_;
  double min_lr_;
  double delta_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_ = 0;
};

// Stops once more than `patience` consecutive epochs fail to improve on the
// best validation loss by more than `delta`.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience, double delta = 1e-4);

  bool check(double val_loss);
  bool improved_last() const noexcept { return improved_; }
  double best() const noexcept { return best_; }

 private:
  std::size_t patience_;
  double delta_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_ = 0;
  bool improved_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double train_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct FoldResult {
  std::size_t fold_index = 0;
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::vector<EpochRecord> history;
  EvalReport metrics;  // best parameters on the validation split
  ModelParams params;  // best-validation-loss snapshot
  RoiGraph graph;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

// Mean cross-entropy and positive-class scores in inference mode.
struct Evaluation {
  double mean_loss = 0.0;
  std::vector<double> scores;
};
Evaluation evaluate_model(const ModelParams& params, const RoiGraph& graph,
                          const CohortTable& cohort);

// Trains from a fresh initialization seeded by (config.seed, fold_index).
FoldResult train_one_fold(const CohortTable& train_set, const CohortTable& val_set,
                          const RoiGraph& graph, const TrainConfig& config,
                          std::size_t fold_index = 0);

// Fold index per subject: each class is shuffled and dealt round-robin.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                          std::uint64_t seed);

struct CvResult {
  std::vector<FoldResult> folds;
  AggregateReport aggregate;
};

// Stratified k-fold: per fold, the adjacency is built from that fold's
// training subjects only, the model is trained, and the held-out fold both
// drives early stopping and is scored. Folds run in parallel.
CvResult run_cross_validation(const CohortTable& cohort, const TrainConfig& config);

}  // namespace gkan
