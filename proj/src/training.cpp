#include "gkan/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "gkan/errors.hpp"

namespace gkan {

namespace {

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) {
  return seed ^ ((static_cast<std::uint64_t>(fold) + 1) * 0x9E3779B97F4A7C15ULL);
}

std::vector<Matrix> node_features(const CohortTable& cohort) {
  std::vector<Matrix> out;
  out.reserve(cohort.subject_count());
  for (std::size_t s = 0; s < cohort.subject_count(); ++s) out.push_back(cohort.node_features(s));
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must satisfy 0 <= dropout < 1");
  if (grid_size == 0) fail("grid_size must be positive");
  if (!(tau >= 0.0 && tau < 1.0)) fail("tau must satisfy 0 <= tau < 1");
  if (epochs_max == 0) fail("epochs_max must be positive");
  if (early_stop_patience == 0) fail("early_stop_patience must be positive");
  if (scheduler_patience == 0) fail("scheduler_patience must be positive");
  if (!(scheduler_factor > 0.0 && scheduler_factor < 1.0)) fail("scheduler_factor must be in (0, 1)");
  if (!(min_lr > 0.0)) fail("min_lr must be positive");
  if (!(improvement_delta >= 0.0)) fail("improvement_delta must be non-negative");
  if (folds < 2) fail("folds must be at least 2");
}

ModelShape TrainConfig::model_shape() const {
  ModelShape s;
  s.grid_size = grid_size;
  return s;
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw ShapeError("label out of range for logits");
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - top);
  return std::log(z) + top - logits[label];
}

void adam_step(ModelParams& params, const Gradients& grads, double lr, double weight_decay,
               const AdamHyper& hyper) {
  auto tensors = params.tensors();
  if (grads.size() != tensors.size()) {
    throw ShapeError("got " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(tensors.size()) + " parameter tensors");
  }
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const Matrix& p = *tensors[t].value;
    if (grads[t].rows() != p.rows() || grads[t].cols() != p.cols()) {
      throw ShapeError("gradient for " + tensors[t].name + " is " + grads[t].shape_str() +
                       ", parameter is " + p.shape_str());
    }
    if (!grads[t].all_finite()) {
      throw TrainingError("non-finite gradient for parameter " + tensors[t].name);
    }
  }

  AdamState& st = params.adam;
  if (st.first.size() != tensors.size()) {
    st.first.clear();
    st.second.clear();
    for (const auto& t : tensors) {
      st.first.emplace_back(t.value->rows(), t.value->cols());
      st.second.emplace_back(t.value->rows(), t.value->cols());
    }
  }
  ++st.step;
  const double step = static_cast<double>(st.step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, step);
  const double correction2 = 1.0 - std::pow(hyper.beta2, step);

  for (std::size_t t = 0; t < tensors.size(); ++t) {
    auto theta = tensors[t].value->data();
    auto g = grads[t].data();
    auto m = st.first[t].data();
    auto v = st.second[t].data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i] + weight_decay * theta[i];
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * gi;
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * gi * gi;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
  }
}

PlateauScheduler::PlateauScheduler(double lr, std::size_t patience, double factor, double min_lr,
                                   double delta)
    : lr_(lr), patience_(patience), factor_(factor), min_lr_(min_lr), delta_(delta) {}

double PlateauScheduler::step(double val_loss) {
  if (val_loss < best_ - delta_) {
    best_ = val_loss;
    bad_ = 0;
  } else if (++bad_ > patience_) {
    lr_ = std::max(lr_ * factor_, min_lr_);
    bad_ = 0;
  }
  return lr_;
}

EarlyStopping::EarlyStopping(std::size_t patience, double delta)
    : patience_(patience), delta_(delta) {}

bool EarlyStopping::check(double val_loss) {
  improved_ = val_loss < best_ - delta_;
  if (improved_) {
    best_ = val_loss;
    bad_ = 0;
    return false;
  }
  return ++bad_ > patience_;
}

Evaluation evaluate_model(const ModelParams& params, const RoiGraph& graph,
                          const CohortTable& cohort) {
  if (graph.node_count() != cohort.roi_count()) {
    throw CompatibilityError("graph has " + std::to_string(graph.node_count()) +
                             " nodes but cohort has " + std::to_string(cohort.roi_count()) +
                             " ROIs");
  }
  const std::size_t n = cohort.subject_count();
  std::vector<double> losses(n);
  Evaluation out;
  out.scores.resize(n);
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long long ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      const Matrix logits = model_logits(params, graph, cohort.node_features(i));
      losses[i] = cross_entropy(logits.data(), static_cast<std::size_t>(cohort.labels[i]));
      out.scores[i] = positive_probability(logits);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  double total = 0.0;
  for (double l : losses) total += l;
  out.mean_loss = n ? total / static_cast<double>(n) : 0.0;
  return out;
}

FoldResult train_one_fold(const CohortTable& train_set, const CohortTable& val_set,
                          const RoiGraph& graph, const TrainConfig& config,
                          std::size_t fold_index) {
  config.validate();
  if (train_set.subject_count() == 0 || val_set.subject_count() == 0) {
    throw ConfigError("training and validation splits must both be non-empty");
  }
  if (graph.node_count() != train_set.roi_count() || graph.node_count() != val_set.roi_count()) {
    throw CompatibilityError("graph has " + std::to_string(graph.node_count()) +
                             " nodes but the splits have " + std::to_string(train_set.roi_count()) +
                             " ROIs");
  }

  ModelParams params =
      ModelParams::init(config.model, config.model_shape(), fold_seed(config.seed, fold_index));
  Rng rng = derive_rng(config.seed, 0x5eed0000ULL + fold_index);
  PlateauScheduler scheduler(config.lr, config.scheduler_patience, config.scheduler_factor,
                             config.min_lr, config.improvement_delta);
  EarlyStopping stopper(config.early_stop_patience, config.improvement_delta);

  const std::vector<Matrix> inputs = node_features(train_set);
  const auto slots = params.slot_shapes();
  std::vector<std::size_t> order(train_set.subject_count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  FoldResult result;
  result.fold_index = fold_index;
  result.train_ids = train_set.subject_ids;
  result.val_ids = val_set.subject_ids;
  result.graph = graph;
  result.params = params;
  result.best_val_loss = std::numeric_limits<double>::infinity();

  ForwardOptions options;
  options.training = true;
  options.dropout_rate = config.dropout;
  options.rng = &rng;

  double lr = config.lr;
  for (std::size_t epoch = 1; epoch <= config.epochs_max; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      Gradients batch_grads;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t s = order[b];
        GradTape tape(slots);
        const ForwardTrace trace =
            model_forward(tape, params, graph.norm_propagator, inputs[s], options);
        const Var loss =
            tape.softmax_cross_entropy(trace.logits, static_cast<std::size_t>(train_set.labels[s]));
        loss_sum += tape.value(loss)(0, 0);
        Gradients g = tape.backward(loss);
        if (batch_grads.empty()) {
          batch_grads = std::move(g);
        } else {
          for (std::size_t t = 0; t < g.size(); ++t)
            for (std::size_t i = 0; i < g[t].size(); ++i) batch_grads[t].data()[i] += g[t].data()[i];
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (auto& g : batch_grads)
        for (double& v : g.data()) v *= inv;
      adam_step(params, batch_grads, lr, config.weight_decay);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_loss = evaluate_model(params, graph, val_set).mean_loss;
    if (config.track_train_accuracy) {
      const Evaluation tr = evaluate_model(params, graph, train_set);
      rec.train_accuracy = confusion(tr.scores, train_set.labels).accuracy();
    }
    result.history.push_back(rec);
    result.epochs_run = epoch;

    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      result.params = params;
    }
    lr = scheduler.step(rec.val_loss);
    if (stopper.check(rec.val_loss)) break;
  }

  const Evaluation best = evaluate_model(result.params, graph, val_set);
  result.metrics = make_report(val_set.subject_ids, best.scores, val_set.labels);
  return result;
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) throw ConfigError("folds must be at least 2");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ConfigError("labels must be 0 or 1");
    by_class[labels[i]].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < folds) {
      throw ConfigError("class " + std::to_string(c) + " has " +
                        std::to_string(by_class[c].size()) + " subjects, fewer than " +
                        std::to_string(folds) + " folds");
    }
  }
  Rng rng = derive_rng(seed, 0xf01d);
  std::vector<std::size_t> assignment(labels.size());
  std::size_t next = 0;
  for (auto& members : by_class) {
    shuffle(members.begin(), members.end(), rng);
    for (std::size_t idx : members) {
      assignment[idx] = next;
      next = (next + 1) % folds;
    }
  }
  return assignment;
}

CvResult run_cross_validation(const CohortTable& cohort, const TrainConfig& config) {
  config.validate();
  cohort.validate();
  const std::vector<std::size_t> assignment =
      stratified_folds(cohort.labels, config.folds, config.seed);

  CvResult out;
  out.folds.resize(config.folds);
  std::vector<std::exception_ptr> errors(config.folds);
  const auto k = static_cast<long long>(config.folds);
#pragma omp parallel for schedule(dynamic)
  for (long long ff = 0; ff < k; ++ff) {
    const auto f = static_cast<std::size_t>(ff);
    try {
      std::vector<std::size_t> train_rows, val_rows;
      for (std::size_t i = 0; i < assignment.size(); ++i)
        (assignment[i] == f ? val_rows : train_rows).push_back(i);
      const CohortTable train_set = cohort.subset(train_rows);
      const CohortTable val_set = cohort.subset(val_rows);
      const RoiGraph graph = build_adjacency(train_set, config.tau);
      out.folds[f] = train_one_fold(train_set, val_set, graph, config, f);
    } catch (...) {
      errors[f] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<EvalReport> reports;
  for (const auto& f : out.folds) reports.push_back(f.metrics);
  out.aggregate = aggregate(reports);
  return out;
}

}  // namespace gkan
