#include "gkan/model.hpp"

#include <cmath>

#include "gkan/errors.hpp"

namespace gkan {

std::string to_string(ModelKind kind) { return kind == ModelKind::gcn ? "gcn" : "gcn-kan"; }

ModelKind parse_model_kind(const std::string& text) {
  if (text == "gcn") return ModelKind::gcn;
  if (text == "gcn-kan") return ModelKind::gcn_kan;
  throw ConfigError("unknown model '" + text + "' (expected gcn or gcn-kan)");
}

ModelParams ModelParams::init(ModelKind kind, const ModelShape& shape, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0x1417);
  ModelParams p;
  p.kind = kind;
  p.shape = shape;
  p.gcn1 = GcnLayer::glorot(shape.in_features, shape.hidden, rng);
  p.gcn2 = GcnLayer::glorot(shape.hidden, shape.hidden, rng);
  if (kind == ModelKind::gcn_kan) {
    p.kan1 = KanLayer::uniform_init(shape.hidden, shape.hidden, shape.grid_size, rng);
    p.kan2 = KanLayer::uniform_init(shape.hidden, shape.hidden, shape.grid_size, rng);
  } else {
    p.dense1 = AffineLayer::glorot(shape.hidden, shape.hidden, rng);
    p.dense2 = AffineLayer::glorot(shape.hidden, shape.hidden, rng);
  }
  p.head = ClassifierHead::glorot(shape.hidden, shape.classes, rng);
  return p;
}

ModelParams ModelParams::zeros(ModelKind kind, const ModelShape& shape) {
  ModelParams p = init(kind, shape, 0);
  for (auto& t : p.tensors())
    for (double& v : t.value->data()) v = 0.0;
  return p;
}

std::vector<NamedTensor> ModelParams::tensors() {
  std::vector<NamedTensor> out{{"gcn1.weight", &gcn1.weight}, {"gcn2.weight", &gcn2.weight}};
  if (kind == ModelKind::gcn_kan) {
    out.push_back({"kan1.coeffs", &kan1.coeffs});
    out.push_back({"kan2.coeffs", &kan2.coeffs});
  } else {
    out.push_back({"dense1.weight", &dense1.weight});
    out.push_back({"dense1.bias", &dense1.bias});
    out.push_back({"dense2.weight", &dense2.weight});
    out.push_back({"dense2.bias", &dense2.bias});
  }
  out.push_back({"head.weight", &head.weight});
  out.push_back({"head.bias", &head.bias});
  return out;
}

std::vector<NamedConstTensor> ModelParams::tensors() const {
  std::vector<NamedConstTensor> out;
  for (auto& t : const_cast<ModelParams*>(this)->tensors()) out.push_back({t.name, t.value});
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> ModelParams::slot_shapes() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& t : tensors()) out.emplace_back(t.value->rows(), t.value->cols());
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.value->size();
  return n;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& t : tensors()) out.insert(out.end(), t.value->data().begin(), t.value->data().end());
  return out;
}

void ModelParams::assign_flat(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw ShapeError("flat parameter vector has " + std::to_string(values.size()) +
                     " entries, model has " + std::to_string(parameter_count()));
  }
  std::size_t offset = 0;
  for (auto& t : tensors()) {
    auto dst = t.value->data();
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(offset),
              values.begin() + static_cast<std::ptrdiff_t>(offset + dst.size()), dst.begin());
    offset += dst.size();
  }
}

ForwardTrace model_forward(GradTape& tape, const ModelParams& params, const Matrix& propagator,
                           const Matrix& x, const ForwardOptions& options) {
  if (x.cols() != params.shape.in_features || x.rows() != propagator.rows()) {
    throw ShapeError("model input " + x.shape_str() + " incompatible with propagator " +
                     propagator.shape_str() + " and " + std::to_string(params.shape.in_features) +
                     " input feature(s)");
  }
  const bool stochastic = options.training && options.dropout_rate > 0.0;
  if (stochastic && options.rng == nullptr) throw UsageError("training dropout needs an rng");
  Rng unused_rng;
  Rng& rng = options.rng ? *options.rng : unused_rng;

  const auto tensors = params.tensors();
  std::vector<Var> slot;
  slot.reserve(tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) slot.push_back(tape.parameter(i, *tensors[i].value));

  ForwardTrace trace;
  const Var prop = tape.constant(propagator);
  Var h = tape.constant(x);
  h = gcn_forward(tape, slot[0], prop, h);
  h = gcn_forward(tape, slot[1], prop, h);

  std::size_t head_slot = 0;
  if (params.kind == ModelKind::gcn_kan) {
    if (options.frozen_stats && options.frozen_stats->size() != 2) {
      throw UsageError("frozen statistics must hold one entry per KAN layer");
    }
    const KanLayer* kans[2] = {&params.kan1, &params.kan2};
    for (std::size_t layer = 0; layer < 2; ++layer) {
      const ColumnStats* frozen = options.frozen_stats ? &(*options.frozen_stats)[layer] : nullptr;
      auto [normalized, stats] = kan_normalize(tape, h, kans[layer]->epsilon, frozen);
      trace.kan_stats.push_back(std::move(stats));
      h = kan_forward(tape, slot[2 + layer], normalized, kans[layer]->grid_size);
      h = dropout(tape, h, options.dropout_rate, options.training, rng);
    }
    head_slot = 4;
  } else {
    h = affine_relu_forward(tape, slot[2], slot[3], h);
    h = dropout(tape, h, options.dropout_rate, options.training, rng);
    h = affine_relu_forward(tape, slot[4], slot[5], h);
    h = dropout(tape, h, options.dropout_rate, options.training, rng);
    head_slot = 6;
  }
  trace.pre_pool = h;
  const Var pooled = global_max_pool(tape, h);
  trace.logits = classify(tape, slot[head_slot], slot[head_slot + 1], pooled);
  require_finite(tape.value(trace.logits), "model logits");
  return trace;
}

Matrix model_logits(const ModelParams& params, const RoiGraph& graph, const Matrix& x) {
  GradTape tape(params.slot_shapes());
  ForwardOptions options;
  options.training = false;
  const ForwardTrace trace = model_forward(tape, params, graph.norm_propagator, x, options);
  return tape.value(trace.logits);
}

double positive_probability(const Matrix& logits) {
  if (logits.rows() != 1 || logits.cols() != 2) {
    throw ShapeError("expected 1x2 logits, got " + logits.shape_str());
  }
  // sigmoid of the logit difference, written to stay finite for large gaps
  const double d = logits(0, 1) - logits(0, 0);
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

}  // namespace gkan
