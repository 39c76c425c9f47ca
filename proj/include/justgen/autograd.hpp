#pragma once

#include <vector>

#include "justgen/matrix.hpp"

namespace justgen::ad {

// Handle into a Tape; cheap to copy, valid only for the tape that made it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Per-parameter gradient accumulator, indexed by ParamStore parameter id.
// Matrices stay empty until a backward pass touches them.
struct GradVec {
  std::vector<Matrix> g;

  void ensure(int param_id, int rows, int cols);
  void add(int param_id, const Matrix& grad);
  // this += scale * other, in fixed parameter order (deterministic merges).
  void accumulate(const GradVec& other, double scale = 1.0);
  double max_abs(int param_id) const;
};

// Reverse-mode autodiff tape over dense double matrices.  One tape per
// forward pass; nodes are appended in evaluation order and walked backwards.
// Parameter leaves hold pointers into the caller's storage (no copies), so
// parameters must outlive the tape.
class Tape {
 public:
  Tape();
  ~Tape();  // defined where Node is complete
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Var constant(Matrix value);
  Var constant_view(const Matrix* value);            // caller keeps ownership
  Var param(int param_id, const Matrix* value);      // differentiable leaf
  Var scalar_const(double v);

  const Matrix& val(Var v) const;
  double scalar(Var v) const;  // value of a 1x1 node

  // Elementwise / shape ops.
  Var add(Var a, Var b);
  Var add_bias(Var a, Var b);  // [m,n] + [1,n], broadcast over rows
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var neg(Var a);
  Var log_elem(Var a);
  Var exp_elem(Var a);
  Var gelu(Var a);

  // Linear algebra.
  Var matmul(Var a, bool trans_a, Var b, bool trans_b);

  // Shape manipulation.
  Var slice_rows(Var a, int r0, int r1);
  Var slice_cols(Var a, int c0, int c1);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);

  // Reductions and row ops.
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  Var rmsnorm(Var a, Var gain);  // per-row x / sqrt(mean(x^2)+eps) * gain
  Var mean_all(Var a);
  Var sum_all(Var a);
  Var mean_rows(Var a);  // [m,n] -> [1,n] column means

  // Gathers.
  Var embed(Var table, const std::vector<int>& ids);          // rows of [V,d]
  Var pick_entries(Var a, const std::vector<int>& cols);      // [m,n] -> [m,1], a[i, cols[i]]

  // Identity with zero gradient; teacher branches hang off this.
  Var stop_grad(Var a);

  // Accumulates dLoss/dParam into `sink` for every parameter leaf reachable
  // from `loss` (a 1x1 node).  May be called once per tape.
  void backward(Var loss, GradVec& sink);

  size_t node_count() const;

 private:
  struct Node;
  std::vector<Node> nodes_;

  Var push(Node n);
  Matrix& grad_of(int id);
};

}  // namespace justgen::ad
