#ifndef INTERMODE_TAPE_HPP
#define INTERMODE_TAPE_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "intermode/array.hpp"

namespace intermode {

// Probabilities are clamped to [kProbEps, 1 - kProbEps] before any logarithm.
inline constexpr double kProbEps = 1e-7;

struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over Array values. Nodes are recorded in evaluation
// order, which is a topological order, so backward() is a single reverse
// sweep that touches each node exactly once. A tape is single-owner: build a
// fresh one per forward/backward pass.
class Tape {
 public:
  Var leaf(Array value);

  const Array& value(Var v) const { return nodes_[v.id].value; }
  const Array& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t num_nodes() const { return nodes_.size(); }

  // --- primitives -------------------------------------------------------
  // x:[B,n] w:[n,m] b:[m] -> [B,m]; bias broadcast over rows.
  Var linear(Var x, Var w, Var b);
  Var matmul(Var a, Var b);
  Var tanh(Var x);
  Var relu(Var x);
  Var softmax(Var x);      // row-wise, max-shifted
  Var log_softmax(Var x);  // row-wise
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var affine(Var x, double k, double c);  // k*x + c elementwise
  Var exp(Var x);
  Var log(Var x);  // argument clamped at kProbEps
  Var reduce_sum(Var x);
  Var reduce_mean(Var x);
  Var row_sum(Var x);                  // [B,n] -> [B]
  Var concat_cols(Var a, Var b);       // [B,n],[B,m] -> [B,n+m]
  Var reshape(Var x, std::vector<std::size_t> shape);  // same element count
  Var column(Var x, std::size_t j);    // [B,n] -> [B]
  Var pick(Var x, std::vector<std::size_t> cols);  // [B,n] -> [B], x[i,cols[i]]

  // Row-wise binary cross-entropy: -sum_j [t log p + (1-t) log(1-p)],
  // p clamped; gradients flow to both arguments. [B,n],[B,n] -> [B].
  Var bce_rows(Var pred, Var target);

  // Row-wise KL(q || p) = sum_j q log(q/p) with 0 log 0 := 0 and p clamped.
  Var kl_rows(Var q, Var p);

  // Seeds d(loss) = 1 and propagates through every recorded node once.
  // `loss` must be scalar (or single-element).
  void backward(Var loss);

 private:
  struct Node {
    Array value;
    Array grad;
    std::function<void(Tape&, std::int32_t)> back;  // adds into parents' grads
  };

  Var push(Array value, std::function<void(Tape&, std::int32_t)> back);
  Array& grad_mut(Var v) { return nodes_[v.id].grad; }

  std::vector<Node> nodes_;
};

}  // namespace intermode

#endif
