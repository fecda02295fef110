#include "symmeq/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace symmeq::ad {

namespace {

NodePtr make_node(const char* tag, Tensor value, std::vector<NodePtr> inputs,
                  std::function<void(Node&)> pull) {
  auto n = std::make_shared<Node>();
  n->tag = tag;
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  n->pull = std::move(pull);
  for (const auto& in : n->inputs)
    if (in->requires_grad) n->requires_grad = true;
  if (!n->value.all_finite())
    throw std::runtime_error(std::string("non-finite value produced by op '") + tag + "'");
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* tag) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument(std::string(tag) + ": shape mismatch");
}

Var unary_map(const char* tag, const Var& a, double (*f)(double), double (*df)(double)) {
  Tensor out = a.value();
  for (double& v : out.data()) v = f(v);
  return Var(make_node(tag, std::move(out), {a.node()}, [df](Node& n) {
    Node& in = *n.inputs[0];
    for (std::size_t i = 0; i < in.value.size(); ++i)
      in.adjoint[i] += n.adjoint[i] * df(in.value[i]);
  }));
}

}  // namespace

Var Var::leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->tag = "leaf";
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(n);
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return Var(make_node("add", std::move(out), {a.node(), b.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.value.size(); ++i) {
      n.inputs[0]->adjoint[i] += n.adjoint[i];
      n.inputs[1]->adjoint[i] += n.adjoint[i];
    }
  }));
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return Var(make_node("sub", std::move(out), {a.node(), b.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.value.size(); ++i) {
      n.inputs[0]->adjoint[i] += n.adjoint[i];
      n.inputs[1]->adjoint[i] -= n.adjoint[i];
    }
  }));
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return Var(make_node("mul", std::move(out), {a.node(), b.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.value.size(); ++i) {
      n.inputs[0]->adjoint[i] += n.adjoint[i] * n.inputs[1]->value[i];
      n.inputs[1]->adjoint[i] += n.adjoint[i] * n.inputs[0]->value[i];
    }
  }));
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double c) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= c;
  return Var(make_node("scale", std::move(out), {a.node()}, [c](Node& n) {
    for (std::size_t i = 0; i < n.value.size(); ++i) n.inputs[0]->adjoint[i] += c * n.adjoint[i];
  }));
}

Var add_scalar(const Var& a, double c) {
  Tensor out = a.value();
  for (double& v : out.data()) v += c;
  return Var(make_node("add_scalar", std::move(out), {a.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.value.size(); ++i) n.inputs[0]->adjoint[i] += n.adjoint[i];
  }));
}

Var relu(const Var& a) {
  // Subgradient 0 at the kink.
  return unary_map(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var elu(const Var& a) {
  return unary_map(
      "elu", a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x) { return x > 0.0 ? 1.0 : std::exp(x); });
}

Var vtanh(const Var& a) {
  return unary_map(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double x) {
        double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Var vexp(const Var& a) {
  return unary_map(
      "exp", a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var vlog(const Var& a) {
  return unary_map(
      "log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var clip(const Var& a, double lo, double hi) {
  Tensor out = a.value();
  for (double& v : out.data()) v = std::min(hi, std::max(lo, v));
  // Pass-through inside [lo, hi], zero outside.
  return Var(make_node("clip", std::move(out), {a.node()}, [lo, hi](Node& n) {
    Node& in = *n.inputs[0];
    for (std::size_t i = 0; i < in.value.size(); ++i) {
      double x = in.value[i];
      if (x >= lo && x <= hi) in.adjoint[i] += n.adjoint[i];
    }
  }));
}

Var min2(const Var& a, const Var& b) {
  check_same_shape(a, b, "min2");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], b.value()[i]);
  return Var(make_node("min2", std::move(out), {a.node(), b.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.value.size(); ++i) {
      if (n.inputs[0]->value[i] <= n.inputs[1]->value[i])
        n.inputs[0]->adjoint[i] += n.adjoint[i];
      else
        n.inputs[1]->adjoint[i] += n.adjoint[i];
    }
  }));
}

Var sum(const Var& a) {
  Tensor out = Tensor::scalar(a.value().sum());
  return Var(make_node("sum", std::move(out), {a.node()}, [](Node& n) {
    for (std::size_t i = 0; i < n.inputs[0]->value.size(); ++i)
      n.inputs[0]->adjoint[i] += n.adjoint[0];
  }));
}

Var mean(const Var& a) {
  std::size_t count = a.value().size();
  if (count == 0) throw std::invalid_argument("mean: empty tensor");
  Tensor out = Tensor::scalar(a.value().sum() / static_cast<double>(count));
  return Var(make_node("mean", std::move(out), {a.node()}, [count](Node& n) {
    double g = n.adjoint[0] / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) n.inputs[0]->adjoint[i] += g;
  }));
}

namespace {

// C[m,n] += A[m,k] * B[k,n]
void gemm_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = a.at(i, p);
      if (av == 0.0) continue;
      const double* brow = &b.data()[p * n];
      double* crow = &c.data()[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

// C[m,n] += A^T[m,k_rows] ... specifically C += A^T * B with A [k,m], B [k,n]
void gemm_at_b_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i) {
      double av = a.at(p, i);
      if (av == 0.0) continue;
      const double* brow = &b.data()[p * n];
      double* crow = &c.data()[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

// C[m,n] += A[m,k] * B^T with B [n,k]
void gemm_a_bt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double* arow = &a.data()[i * k];
      const double* brow = &b.data()[j * k];
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c.at(i, j) += s;
    }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.value().cols() != b.value().rows())
    throw std::invalid_argument("matmul: incompatible shapes");
  Tensor out = Tensor::matrix(a.value().rows(), b.value().cols());
  gemm_acc(a.value(), b.value(), out);
  return Var(make_node("matmul", std::move(out), {a.node(), b.node()}, [](Node& n) {
    // gA += gY * B^T ; gB += A^T * gY
    gemm_a_bt_acc(n.adjoint, n.inputs[1]->value, n.inputs[0]->adjoint);
    gemm_at_b_acc(n.inputs[0]->value, n.adjoint, n.inputs[1]->adjoint);
  }));
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.cols() != wv.cols())
    throw std::invalid_argument("linear: incompatible shapes");
  if (bv.size() != wv.rows()) throw std::invalid_argument("linear: bias length mismatch");
  std::size_t batch = xv.rows(), in = xv.cols(), out_dim = wv.rows();
  Tensor out = Tensor::matrix(batch, out_dim);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* xr = &xv.data()[r * in];
      const double* wr = &wv.data()[o * in];
      double s = bv[o];
      for (std::size_t j = 0; j < in; ++j) s += xr[j] * wr[j];
      out.at(r, o) = s;
    }
  return Var(make_node("linear", std::move(out), {x.node(), w.node(), b.node()}, [](Node& n) {
    const Tensor& gy = n.adjoint;
    const Tensor& xv = n.inputs[0]->value;
    const Tensor& wv = n.inputs[1]->value;
    // gX += gY * W
    gemm_acc(gy, wv, n.inputs[0]->adjoint);
    // gW += gY^T * X
    gemm_at_b_acc(gy, xv, n.inputs[1]->adjoint);
    // gb += column sums of gY
    Tensor& gb = n.inputs[2]->adjoint;
    for (std::size_t r = 0; r < gy.rows(); ++r)
      for (std::size_t o = 0; o < gy.cols(); ++o) gb[o] += gy.at(r, o);
  }));
}

Var concat_cols(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.rows() != bv.rows())
    throw std::invalid_argument("concat_cols: row count mismatch");
  std::size_t batch = av.rows(), m = av.cols(), n = bv.cols();
  Tensor out = Tensor::matrix(batch, m + n);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t j = 0; j < m; ++j) out.at(r, j) = av.at(r, j);
    for (std::size_t j = 0; j < n; ++j) out.at(r, m + j) = bv.at(r, j);
  }
  return Var(make_node("concat_cols", std::move(out), {a.node(), b.node()}, [m, n](Node& nd) {
    for (std::size_t r = 0; r < nd.value.rows(); ++r) {
      for (std::size_t j = 0; j < m; ++j) nd.inputs[0]->adjoint.at(r, j) += nd.adjoint.at(r, j);
      for (std::size_t j = 0; j < n; ++j) nd.inputs[1]->adjoint.at(r, j) += nd.adjoint.at(r, m + j);
    }
  }));
}

Var row_sum(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw std::invalid_argument("row_sum: expects a matrix");
  std::size_t batch = xv.rows(), n = xv.cols();
  Tensor out({batch});
  for (std::size_t r = 0; r < batch; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += xv.at(r, j);
    out[r] = s;
  }
  return Var(make_node("row_sum", std::move(out), {x.node()}, [n](Node& nd) {
    for (std::size_t r = 0; r < nd.value.size(); ++r)
      for (std::size_t j = 0; j < n; ++j) nd.inputs[0]->adjoint.at(r, j) += nd.adjoint[r];
  }));
}

Var add_rowvec(const Var& x, const Var& v) {
  const Tensor& xv = x.value();
  const Tensor& vv = v.value();
  if (xv.rank() != 2 || vv.size() != xv.cols())
    throw std::invalid_argument("add_rowvec: length mismatch");
  Tensor out = xv;
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t j = 0; j < xv.cols(); ++j) out.at(r, j) += vv[j];
  return Var(make_node("add_rowvec", std::move(out), {x.node(), v.node()}, [](Node& nd) {
    const Tensor& g = nd.adjoint;
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        nd.inputs[0]->adjoint.at(r, j) += g.at(r, j);
        nd.inputs[1]->adjoint[j] += g.at(r, j);
      }
  }));
}

Var mul_rowvec(const Var& x, const Var& v) {
  const Tensor& xv = x.value();
  const Tensor& vv = v.value();
  if (xv.rank() != 2 || vv.size() != xv.cols())
    throw std::invalid_argument("mul_rowvec: length mismatch");
  Tensor out = xv;
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t j = 0; j < xv.cols(); ++j) out.at(r, j) *= vv[j];
  return Var(make_node("mul_rowvec", std::move(out), {x.node(), v.node()}, [](Node& nd) {
    const Tensor& g = nd.adjoint;
    const Tensor& xin = nd.inputs[0]->value;
    const Tensor& vin = nd.inputs[1]->value;
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        nd.inputs[0]->adjoint.at(r, j) += g.at(r, j) * vin[j];
        nd.inputs[1]->adjoint[j] += g.at(r, j) * xin.at(r, j);
      }
  }));
}

Var add_broadcast_scalar(const Var& x, const Var& s, double c) {
  if (s.value().size() != 1) throw std::invalid_argument("add_broadcast_scalar: s not scalar");
  Tensor out = x.value();
  double sv = c * s.value()[0];
  for (double& v : out.data()) v += sv;
  return Var(make_node("add_broadcast_scalar", std::move(out), {x.node(), s.node()}, [c](Node& nd) {
    double gsum = 0.0;
    for (std::size_t i = 0; i < nd.value.size(); ++i) {
      nd.inputs[0]->adjoint[i] += nd.adjoint[i];
      gsum += nd.adjoint[i];
    }
    nd.inputs[1]->adjoint[0] += c * gsum;
  }));
}

Var scatter(const Var& src, std::shared_ptr<const ScatterPlan> plan) {
  Tensor out(plan->out_shape);
  const Tensor& sv = src.value();
  for (std::size_t k = 0; k < plan->out_index.size(); ++k)
    out[plan->out_index[k]] += plan->coeff[k] * sv[plan->src_index[k]];
  return Var(make_node("scatter", std::move(out), {src.node()}, [plan](Node& nd) {
    for (std::size_t k = 0; k < plan->out_index.size(); ++k)
      nd.inputs[0]->adjoint[plan->src_index[k]] += plan->coeff[k] * nd.adjoint[plan->out_index[k]];
  }));
}

Var signed_permute_rows(const Var& x, const std::vector<std::size_t>& target,
                        const std::vector<double>& sign) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != target.size())
    throw std::invalid_argument("signed_permute_rows: width mismatch");
  std::size_t batch = xv.rows(), n = xv.cols();
  Tensor out = Tensor::matrix(batch, n);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t j = 0; j < n; ++j) out.at(r, target[j]) = sign[j] * xv.at(r, j);
  return Var(
      make_node("signed_permute_rows", std::move(out), {x.node()}, [target, sign](Node& nd) {
        for (std::size_t r = 0; r < nd.value.rows(); ++r)
          for (std::size_t j = 0; j < target.size(); ++j)
            nd.inputs[0]->adjoint.at(r, j) += sign[j] * nd.adjoint.at(r, target[j]);
      }));
}

void backward(const Var& root) {
  if (!root.valid()) throw std::invalid_argument("backward: invalid root");
  if (root.value().size() != 1) throw std::invalid_argument("backward: root is not a scalar");

  // Iterative post-order DFS for a topological ordering.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* child = node->inputs[idx++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    n->adjoint = Tensor(n->value.shape());
  }
  root.node()->adjoint[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->pull && n->requires_grad) n->pull(*n);
  }
}

double finite_difference_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                               const Tensor& analytic, double epsilon) {
  if (analytic.size() != x.size())
    throw std::invalid_argument("finite_difference_check: gradient length mismatch");
  Tensor probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = probe[i];
    probe[i] = orig + epsilon;
    double fp = f(probe);
    probe[i] = orig - epsilon;
    double fm = f(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_difference_check: non-finite function value");
    double central = (fp - fm) / (2.0 * epsilon);
    double err = std::abs(analytic[i] - central) / std::max(1.0, std::abs(central));
    worst = std::max(worst, err);
  }
  return worst;
}

Var Tape::param(Tensor& t) {
  auto it = leaves_.find(&t);
  if (it != leaves_.end()) return it->second;
  Var v = Var::leaf(t, true);
  leaves_.emplace(&t, v);
  return v;
}

const Tensor* Tape::grad_of(const Tensor& t) const {
  auto it = leaves_.find(&t);
  if (it == leaves_.end()) return nullptr;
  const Tensor& g = it->second.grad();
  return g.size() == t.size() ? &g : nullptr;
}

}  // namespace symmeq::ad
