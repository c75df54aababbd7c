#include "gkan/tape.hpp"

#include <cmath>

#include "gkan/errors.hpp"
#include "gkan/kernels.hpp"

namespace gkan {

GradTape::GradTape(std::vector<std::pair<std::size_t, std::size_t>> slot_shapes)
    : slot_shapes_(std::move(slot_shapes)) {}

const GradTape::Node& GradTape::node(Var v) const {
  if (v.tape != this || v.index >= nodes_.size()) {
    throw UsageError("variable was not recorded on this tape");
  }
  return nodes_[v.index];
}

Var GradTape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

const Matrix& GradTape::value(Var v) const { return node(v).value; }

Var GradTape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var GradTape::parameter(std::size_t slot, const Matrix& value) {
  if (slot >= slot_shapes_.size()) {
    throw UsageError("parameter slot " + std::to_string(slot) + " out of range (" +
                     std::to_string(slot_shapes_.size()) + " slots)");
  }
  const auto [r, c] = slot_shapes_[slot];
  if (value.rows() != r || value.cols() != c) {
    throw ShapeError("parameter slot " + std::to_string(slot) + " expects " + shape_str(r, c) +
                     ", got " + value.shape_str());
  }
  Node n;
  n.slot = static_cast<long>(slot);
  n.value = value;
  return push(std::move(n));
}

Var GradTape::matmul(Var a, Var b) {
  const Matrix& av = node(a).value;
  const Matrix& bv = node(b).value;
  Node n;
  n.op = Op::matmul;
  n.lhs = a.index;
  n.rhs = b.index;
  n.value = gkan::matmul(av, bv);
  return push(std::move(n));
}

Var GradTape::add(Var a, Var b) {
  Node n;
  n.op = Op::add;
  n.lhs = a.index;
  n.rhs = b.index;
  n.value = gkan::add(node(a).value, node(b).value);
  return push(std::move(n));
}

Var GradTape::add_row(Var a, Var bias) {
  const Matrix& av = node(a).value;
  const Matrix& bv = node(bias).value;
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw ShapeError("add_row shape mismatch: " + av.shape_str() + " plus row " + bv.shape_str());
  }
  Node n;
  n.op = Op::add_row;
  n.lhs = a.index;
  n.rhs = bias.index;
  n.value = av;
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) n.value(r, c) += bv(0, c);
  return push(std::move(n));
}

Var GradTape::relu(Var a) {
  Node n;
  n.op = Op::relu;
  n.lhs = a.index;
  n.value = node(a).value;
  for (double& v : n.value.data()) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

Var GradTape::normalize_columns(Var a, std::vector<double> shift, std::vector<double> denom) {
  const Matrix& av = node(a).value;
  if (shift.size() != av.cols() || denom.size() != av.cols()) {
    throw ShapeError("normalize_columns: statistics for " + std::to_string(shift.size()) +
                     " columns applied to " + av.shape_str());
  }
  Node n;
  n.op = Op::normalize_columns;
  n.lhs = a.index;
  n.value = av;
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c)
      n.value(r, c) = (av(r, c) - shift[c]) / denom[c];
  n.shift = std::move(shift);
  n.denom = std::move(denom);
  return push(std::move(n));
}

Var GradTape::mul_const(Var a, Matrix mask) {
  const Matrix& av = node(a).value;
  if (mask.rows() != av.rows() || mask.cols() != av.cols()) {
    throw ShapeError("mul_const shape mismatch: " + av.shape_str() + " and " + mask.shape_str());
  }
  Node n;
  n.op = Op::mul_const;
  n.lhs = a.index;
  n.value = av;
  auto out = n.value.data();
  auto m = mask.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= m[i];
  n.aux = std::move(mask);
  return push(std::move(n));
}

Var GradTape::relu_grid(Var a, std::size_t grid) {
  if (grid == 0) throw ConfigError("grid size must be at least 1");
  const Matrix& av = node(a).value;
  Node n;
  n.op = Op::relu_grid;
  n.lhs = a.index;
  n.grid = grid;
  n.value = Matrix(av.rows(), av.cols() * grid);
  kernels::serial::relu_grid_expand(av.data(), n.value.data(), av.rows(), av.cols(), grid);
  return push(std::move(n));
}

Var GradTape::column_max(Var a) {
  const Matrix& av = node(a).value;
  if (av.rows() == 0) throw ShapeError("column_max of an empty matrix " + av.shape_str());
  Node n;
  n.op = Op::column_max;
  n.lhs = a.index;
  n.value = Matrix(1, av.cols());
  n.index.assign(av.cols(), 0);
  for (std::size_t c = 0; c < av.cols(); ++c) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < av.rows(); ++r)
      if (av(r, c) > av(best, c)) best = r;
    n.index[c] = best;
    n.value(0, c) = av(best, c);
  }
  return push(std::move(n));
}

Var GradTape::sum(Var a) {
  Node n;
  n.op = Op::sum;
  n.lhs = a.index;
  double s = 0.0;
  for (double v : node(a).value.data()) s += v;
  n.value = Matrix(1, 1, s);
  return push(std::move(n));
}

Var GradTape::softmax_cross_entropy(Var logits, std::size_t label) {
  const Matrix& lv = node(logits).value;
  if (lv.rows() != 1 || label >= lv.cols()) {
    throw ShapeError("cross entropy expects 1xC logits with label < C, got " + lv.shape_str() +
                     " and label " + std::to_string(label));
  }
  double top = lv(0, 0);
  for (double v : lv.data()) top = std::max(top, v);
  double z = 0.0;
  for (double v : lv.data()) z += std::exp(v - top);
  const double log_z = std::log(z) + top;
  Node n;
  n.op = Op::softmax_xent;
  n.lhs = logits.index;
  n.grid = label;
  n.aux = Matrix(1, lv.cols());
  for (std::size_t c = 0; c < lv.cols(); ++c) n.aux(0, c) = std::exp(lv(0, c) - log_z);
  n.value = Matrix(1, 1, log_z - lv(0, label));
  return push(std::move(n));
}

Gradients GradTape::backward(Var loss) const {
  const Node& root = node(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw UsageError("backward expects a 1x1 loss, got " + root.value.shape_str());
  }

  std::vector<Matrix> grad(loss.index + 1);
  auto grad_of = [&](std::size_t i) -> Matrix& {
    if (grad[i].empty() && !nodes_[i].value.empty()) {
      grad[i] = Matrix(nodes_[i].value.rows(), nodes_[i].value.cols());
    }
    return grad[i];
  };
  grad_of(loss.index)(0, 0) = 1.0;

  for (std::size_t idx = loss.index + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    if (grad[idx].empty() || n.op == Op::leaf) continue;
    const Matrix& g = grad[idx];

    switch (n.op) {
      case Op::leaf:
        break;
      case Op::matmul: {
        const Matrix& a = nodes_[n.lhs].value;
        const Matrix& b = nodes_[n.rhs].value;
        // dA += G B^T ; dB += A^T G
        kernels::serial::matmul_a_bt_acc(g.data(), b.data(), grad_of(n.lhs).data(), g.rows(),
                                         g.cols(), b.rows());
        kernels::serial::matmul_at_b_acc(a.data(), g.data(), grad_of(n.rhs).data(), a.rows(),
                                         a.cols(), g.cols());
        break;
      }
      case Op::add: {
        Matrix& ga = grad_of(n.lhs);
        Matrix& gb = grad_of(n.rhs);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data()[i] += g.data()[i];
          gb.data()[i] += g.data()[i];
        }
        break;
      }
      case Op::add_row: {
        Matrix& ga = grad_of(n.lhs);
        Matrix& gb = grad_of(n.rhs);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) {
            ga(r, c) += g(r, c);
            gb(0, c) += g(r, c);
          }
        break;
      }
      case Op::relu: {
        Matrix& ga = grad_of(n.lhs);
        const auto in = nodes_[n.lhs].value.data();
        for (std::size_t i = 0; i < g.size(); ++i)
          if (in[i] > 0.0) ga.data()[i] += g.data()[i];
        break;
      }
      case Op::normalize_columns: {
        Matrix& ga = grad_of(n.lhs);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) += g(r, c) / n.denom[c];
        break;
      }
      case Op::mul_const: {
        Matrix& ga = grad_of(n.lhs);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * n.aux.data()[i];
        break;
      }
      case Op::relu_grid: {
        Matrix& ga = grad_of(n.lhs);
        const Matrix& in = nodes_[n.lhs].value;
        const double gsize = static_cast<double>(n.grid);
        for (std::size_t e = 0; e < in.size(); ++e) {
          const double t = in.data()[e];
          const double* ge = g.data().data() + e * n.grid;
          double acc = ge[0];
          for (std::size_t k = 1; k < n.grid; ++k)
            if (t - static_cast<double>(k) / gsize > 0.0) acc += ge[k];
          ga.data()[e] += acc;
        }
        break;
      }
      case Op::column_max: {
        Matrix& ga = grad_of(n.lhs);
        for (std::size_t c = 0; c < g.cols(); ++c) ga(n.index[c], c) += g(0, c);
        break;
      }
      case Op::sum: {
        Matrix& ga = grad_of(n.lhs);
        const double s = g(0, 0);
        for (double& v : ga.data()) v += s;
        break;
      }
      case Op::softmax_xent: {
        Matrix& ga = grad_of(n.lhs);
        const double s = g(0, 0);
        for (std::size_t c = 0; c < n.aux.cols(); ++c)
          ga(0, c) += s * (n.aux(0, c) - (c == n.grid ? 1.0 : 0.0));
        break;
      }
    }
  }

  Gradients out;
  out.reserve(slot_shapes_.size());
  for (const auto& [r, c] : slot_shapes_) out.emplace_back(r, c);
  for (std::size_t idx = 0; idx <= loss.index; ++idx) {
    const Node& n = nodes_[idx];
    if (n.slot < 0 || grad[idx].empty()) continue;
    Matrix& dst = out[static_cast<std::size_t>(n.slot)];
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += grad[idx].data()[i];
  }
  return out;
}

}  // namespace gkan
