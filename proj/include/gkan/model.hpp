#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gkan/graph.hpp"
#include "gkan/layers.hpp"
#include "gkan/tape.hpp"

namespace gkan {

enum class ModelKind { gcn, gcn_kan };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct ModelShape {
  std::size_t in_features = 1;
  std::size_t hidden = 32;
  std::size_t classes = 2;
  std::size_t grid_size = 10;
};

// Adam first/second moments aligned with ModelParams::tensors().
struct AdamState {
  std::uint64_t step = 0;
  std::vector<Matrix> first;
  std::vector<Matrix> second;
};

struct NamedTensor {
  std::string name;
  Matrix* value;
};

struct NamedConstTensor {
  std::string name;
  const Matrix* value;
};

// Trainable state of either model variant. GCN-KAN uses kan1/kan2; the plain
// GCN baseline uses dense1/dense2 in the same positions.
struct ModelParams {
  ModelKind kind = ModelKind::gcn_kan;
  ModelShape shape;
  GcnLayer gcn1;
  GcnLayer gcn2;
  KanLayer kan1;
  KanLayer kan2;
  AffineLayer dense1;
  AffineLayer dense2;
  ClassifierHead head;
  AdamState adam;

  static ModelParams init(ModelKind kind, const ModelShape& shape, std::uint64_t seed);
  // Same shapes as init, every value zero.
  static ModelParams zeros(ModelKind kind, const ModelShape& shape);

  // Active trainable tensors in a fixed order; the index is the tape slot.
  std::vector<NamedTensor> tensors();
  std::vector<NamedConstTensor> tensors() const;
  std::vector<std::pair<std::size_t, std::size_t>> slot_shapes() const;

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);
};

struct ForwardOptions {
  bool training = false;
  double dropout_rate = 0.2;
  Rng* rng = nullptr;  // required when training with dropout_rate > 0
  // When set, KAN normalization uses these statistics (one entry per KAN
  // layer) instead of computing them from the activations.
  const std::vector<ColumnStats>* frozen_stats = nullptr;
};

struct ForwardTrace {
  Var logits;
  Var pre_pool;  // N x hidden activations entering the max-pool
  std::vector<ColumnStats> kan_stats;
};

// Records the full stack on `tape`, registering parameters under slots that
// match ModelParams::tensors(). The propagator and x are constants.
ForwardTrace model_forward(GradTape& tape, const ModelParams& params, const Matrix& propagator,
                           const Matrix& x, const ForwardOptions& options);

// Inference-mode logits, 1 x classes.
Matrix model_logits(const ModelParams& params, const RoiGraph& graph, const Matrix& x);

// Softmax probability of class 1 from 1 x 2 logits.
double positive_probability(const Matrix& logits);

}  // namespace gkan
