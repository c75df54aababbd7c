#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gkan/matrix.hpp"

namespace gkan {

class GradTape;

// Handle to a value recorded on a GradTape. Only meaningful for the tape that
// created it.
struct Var {
  const GradTape* tape = nullptr;
  std::size_t index = 0;
};

// Gradients indexed by parameter slot. Slots never registered on the tape, or
// registered but not reaching the loss, hold exact zeros.
using Gradients = std::vector<Matrix>;

// Reverse-mode recorder for the fixed operation set the model needs. Nodes are
// appended in evaluation order, so the record is already topologically sorted
// and backward is a single reverse sweep.
//
// Confined to one thread; values are held by copy.
class GradTape {
 public:
  // `slot_shapes` fixes how many parameter slots exist and their shapes, so
  // the gradient map always has one entry per slot.
  explicit GradTape(std::vector<std::pair<std::size_t, std::size_t>> slot_shapes = {});

  Var constant(Matrix value);
  Var parameter(std::size_t slot, const Matrix& value);

  const Matrix& value(Var v) const;
  std::size_t node_count() const noexcept { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  // Adds the 1 x C row `bias` to every row of `a`.
  Var add_row(Var a, Var bias);
  Var relu(Var a);
  // (a[r][c] - shift[c]) / denom[c] with shift and denom held constant.
  Var normalize_columns(Var a, std::vector<double> shift, std::vector<double> denom);
  // Elementwise product with a constant mask of the same shape.
  Var mul_const(Var a, Matrix mask);
  // N x J -> N x (J*grid) shifted-ReLU basis, see kernels::serial::relu_grid_expand.
  Var relu_grid(Var a, std::size_t grid);
  // Column-wise maximum over rows, N x C -> 1 x C. Ties go to the lowest row.
  Var column_max(Var a);
  Var sum(Var a);
  // Softmax over the 1 x C logits followed by -log p[label]; returns 1 x 1.
  Var softmax_cross_entropy(Var logits, std::size_t label);

  // Reverse sweep from a 1 x 1 loss. Deterministic given the same record.
  Gradients backward(Var loss) const;

 private:
  enum class Op : std::uint8_t {
    leaf,
    matmul,
    add,
    add_row,
    relu,
    normalize_columns,
    mul_const,
    relu_grid,
    column_max,
    sum,
    softmax_xent,
  };

  struct Node {
    Op op = Op::leaf;
    std::size_t lhs = 0;
    std::size_t rhs = 0;
    long slot = -1;
    Matrix value;
    // Op-specific saved state.
    Matrix aux;
    std::vector<double> shift;
    std::vector<double> denom;
    std::vector<std::size_t> index;
    std::size_t grid = 0;
  };

  const Node& node(Var v) const;
  Var push(Node n);

  std::vector<std::pair<std::size_t, std::size_t>> slot_shapes_;
  std::vector<Node> nodes_;
};

}  // namespace gkan
