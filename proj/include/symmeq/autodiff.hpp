#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "symmeq/tensor.hpp"

namespace symmeq::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  const char* tag = "leaf";
  Tensor value;
  Tensor adjoint;
  std::vector<NodePtr> inputs;
  // Distributes this node's adjoint into the inputs' adjoints.
  std::function<void(Node&)> pull;
  bool requires_grad = false;
};

// Handle to a node in a computation graph. Copy is cheap (shared pointer).
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  static Var leaf(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->adjoint; }
  const NodePtr& node() const { return node_; }
  bool valid() const { return node_ != nullptr; }

 private:
  NodePtr node_;
};

// Sparse linear map used to realize shared-parameter weights:
// out[out_index[k]] += coeff[k] * src[src_index[k]].
struct ScatterPlan {
  std::vector<std::size_t> out_shape;
  std::vector<std::size_t> out_index;
  std::vector<std::size_t> src_index;
  std::vector<double> coeff;
};

// Elementwise and reduction primitives. All check output finiteness and
// report the offending op tag on failure.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var relu(const Var& a);
Var elu(const Var& a);
Var vtanh(const Var& a);
Var vexp(const Var& a);
Var vlog(const Var& a);
Var clip(const Var& a, double lo, double hi);
Var min2(const Var& a, const Var& b);
Var sum(const Var& a);
Var mean(const Var& a);

// Matrix primitives.
Var matmul(const Var& a, const Var& b);
// y = x * W^T + b with x [batch, in], W [out, in], b [out].
Var linear(const Var& x, const Var& w, const Var& b);
Var concat_cols(const Var& a, const Var& b);
Var row_sum(const Var& x);                      // [batch, n] -> [batch]
Var add_rowvec(const Var& x, const Var& v);     // broadcast v over rows
Var mul_rowvec(const Var& x, const Var& v);
// out = x + c * s (s scalar, broadcast over all elements of x).
Var add_broadcast_scalar(const Var& x, const Var& s, double c);
Var scatter(const Var& src, std::shared_ptr<const ScatterPlan> plan);
// Applies out[target[i]] = sign[i] * row[i] to every row of x.
Var signed_permute_rows(const Var& x, const std::vector<std::size_t>& target,
                        const std::vector<double>& sign);

// Reverse pass from a scalar root. Resets adjoints of all reachable nodes
// first, so repeated calls produce identical gradients.
void backward(const Var& root);

// Central-difference check: returns max_i |analytic_i - central_i| / max(1, |central_i|).
double finite_difference_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                               const Tensor& analytic, double epsilon);

// Leaf cache keyed by parameter tensor identity, so a network forward pass
// binds each parameter to exactly one graph leaf.
class Tape {
 public:
  Var param(Tensor& t);
  Var constant(const Tensor& t) { return Var::leaf(t, false); }
  const Tensor* grad_of(const Tensor& t) const;
  const std::unordered_map<const Tensor*, Var>& leaves() const { return leaves_; }

 private:
  std::unordered_map<const Tensor*, Var> leaves_;
};

}  // namespace symmeq::ad
