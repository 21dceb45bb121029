#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "harmonic/tensor.hpp"

namespace harmonic {

/// Handle to a node of a Graph. Only valid for the graph that produced it.
struct Var {
  std::size_t index = static_cast<std::size_t>(-1);
};

/// Arguments handed to a node's backward rule.
///
/// `grads[k]` points at the accumulated gradient of input k, or is null when
/// input k does not lead to any parameter. Rules must accumulate (+=), never
/// overwrite.
struct BackwardArgs {
  std::span<const Tensor* const> inputs;
  const Tensor& output;
  const Tensor& upstream;
  std::span<Tensor* const> grads;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

class Gradients;

/// Tape of primitive operations recorded in topological order.
///
/// Every primitive validates shapes eagerly, computes its value and rejects
/// non-finite results with a NumericError naming the node. All primitives
/// operate on rank-2 tensors; vectors are 1 x n rows.
class Graph {
 public:
  /// Leaf that receives a gradient in backward().
  Var parameter(Tensor value);
  /// Leaf without a gradient (data, targets, fixed weights).
  Var constant(Tensor value);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t node_count() const noexcept { return nodes_.size(); }
  const std::string& op_name(Var v) const;

  /// (m x k) * (k x n).
  Var matmul(Var a, Var b);
  /// Elementwise sum; a dimension of size 1 in either operand is broadcast.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  /// Elementwise product, same shapes only.
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  /// Horizontal concatenation of matrices with equal row counts.
  Var concat(std::span<const Var> parts);
  /// out[i] = a[indices[i]]; repeated indices accumulate in backward.
  Var gather_rows(Var a, std::span<const std::size_t> indices);
  Var reshape(Var a, Shape shape);
  Var silu(Var a);
  Var square(Var a);
  Var sqrt(Var a);
  Var log(Var a);
  /// Sum of every element, as a 1 x 1 tensor.
  Var sum(Var a);
  /// Per-row sums, m x n -> m x 1.
  Var row_sum(Var a);
  /// Per-column sums, m x n -> 1 x n.
  Var col_sum(Var a);
  /// Per-row max-shifted log-sum-exp, m x n -> m x 1.
  Var logsumexp(Var a);
  /// out[i] = a[i, columns[i]], m x n -> m x 1.
  Var pick(Var a, std::span<const std::size_t> columns);

  /// Records a node whose value was computed by the caller. Used by fused
  /// operations (the classification heads) that supply an analytic backward.
  Var custom(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  /// Reverse sweep from a 1 x 1 loss node. Every parameter leaf gets a
  /// gradient; leaves the loss does not depend on get zeros.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor value;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_parameter = false;
  };

  Var record(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

/// Gradients of a scalar with respect to each parameter leaf of a graph.
class Gradients {
 public:
  const Tensor& operator[](Var parameter) const;
  std::size_t size() const noexcept { return leaves_.size(); }

 private:
  friend class Graph;
  std::vector<std::size_t> leaves_;
  std::vector<Tensor> grads_;
};

/// Scalar function of a list of parameter tensors, expressed on a graph.
using GraphFunction = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_parameter = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients against central differences.
///
/// Relative error per coordinate is |g_analytic - g_numeric| /
/// (|g_numeric| + 1e-8); the maximum over all coordinates is returned.
GradCheckResult finite_diff_check(const GraphFunction& f, const std::vector<Tensor>& params,
                                  double step = 1e-5);

/// Single-tensor convenience form.
double finite_diff_check(const std::function<Var(Graph&, Var)>& f, const Tensor& theta,
                         double step = 1e-5);

/// Evaluates f without recording gradients.
double evaluate_scalar(const GraphFunction& f, const std::vector<Tensor>& params);

}  // namespace harmonic
