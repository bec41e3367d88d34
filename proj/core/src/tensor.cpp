// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>

#include "dnas/error.hpp"

namespace dnas {

namespace detail {

struct Node {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

class TensorAccess {
 public:
  static const NodePtr& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }
};

namespace {

std::atomic<std::uint64_t> g_next_id{1};

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::size_t product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

void check_finite(std::span<const double> v, const char* op, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw EngineError(std::string("non-finite ") + what + " produced by " + op);
    }
  }
}

const NodePtr& node_of(const Tensor& t, const char* op) {
  const NodePtr& n = TensorAccess::node(t);
  if (!n) throw InvariantError(std::string(op) + ": undefined tensor operand");
  return n;
}

NodePtr make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape.empty() || shape.size() > 2) {
    throw DimensionError("tensor rank must be 1 or 2, got " + shape_str(shape));
  }
  if (product(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  check_finite(values, "leaf construction", "value");
  auto n = std::make_shared<Node>();
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

// Builds an op result. The graph edge is only retained when some parent
// requires a gradient.
Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                   std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward) {
  check_finite(values, op, "value");
  auto n = std::make_shared<Node>();
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = std::any_of(parents.begin(), parents.end(),
                                 [](const NodePtr& p) { return p->requires_grad; });
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return TensorAccess::wrap(std::move(n));
}

void require_rank2(const Node& n, const char* op) {
  if (n.shape.size() != 2) {
    throw DimensionError(std::string(op) + ": expected [rows, cols], got " + shape_str(n.shape));
  }
}

void require_same_shape(const Node& a, const Node& b, const char* op) {
  if (a.shape != b.shape) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                         " vs " + shape_str(b.shape));
  }
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_leaf({1}, {value}, requires_grad));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = product(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

const Shape& Tensor::shape() const { return node_of(*this, "shape")->shape; }
std::size_t Tensor::numel() const { return node_of(*this, "numel")->value.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  return s.back();
}

std::span<const double> Tensor::values() const { return node_of(*this, "values")->value; }

std::span<const double> Tensor::grad() const {
  const auto& n = node_of(*this, "grad");
  if (n->grad.size() != n->value.size()) return {};
  return n->grad;
}

bool Tensor::has_grad() const { return !grad().empty(); }
bool Tensor::requires_grad() const { return node_of(*this, "requires_grad")->requires_grad; }
bool Tensor::is_leaf() const { return !node_of(*this, "is_leaf")->backward; }

double Tensor::item() const {
  const auto& n = node_of(*this, "item");
  if (n->value.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(n->shape));
  }
  return n->value[0];
}

std::span<double> Tensor::mutable_values() {
  const auto& n = node_of(*this, "mutable_values");
  if (n->backward) throw InvariantError("mutable_values() on a non-leaf tensor");
  return n->value;
}

void Tensor::zero_grad() {
  auto& n = node_of(*this, "zero_grad");
  n->grad.clear();
}

std::uint64_t Tensor::id() const { return node_of(*this, "id")->id; }

Tensor Tensor::clone() const {
  const auto& n = node_of(*this, "clone");
  return Tensor(make_leaf(n->shape, n->value, n->requires_grad));
}

void Tensor::backward() const {
  const NodePtr& root = node_of(*this, "backward");
  if (root->value.size() != 1) {
    throw DimensionError("backward() requires a single-element tensor, got " + shape_str(root->shape));
  }
  if (!root->requires_grad) return;

  // Collect every node reachable through gradient-carrying edges.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen{root.get()};
  std::vector<Node*> pending{root.get()};
  while (!pending.empty()) {
    Node* n = pending.back();
    pending.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) pending.push_back(p.get());
    }
  }
  // Reverse creation order is a valid reverse topological order.
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });

  for (Node* n : order) {
    if (n->backward) {
      n->grad.assign(n->value.size(), 0.0);
    } else {
      n->grad_buffer();
    }
  }
  root->grad[0] += 1.0;
  for (Node* n : order) {
    if (n->backward) n->backward(*n);
  }
  for (Node* n : order) {
    if (!n->backward) check_finite(n->grad, "backward", "gradient");
  }
}

// ---------------------------------------------------------------------------
// Operations

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "swish") return Activation::kSwish;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation kind) {
  switch (kind) {
    case Activation::kRelu: return "relu";
    case Activation::kSwish: return "swish";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "unknown";
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const NodePtr& xn = node_of(x, "linear");
  const NodePtr& wn = node_of(w, "linear");
  const NodePtr& bn = node_of(b, "linear");
  require_rank2(*xn, "linear(x)");
  require_rank2(*wn, "linear(w)");
  const std::size_t batch = xn->shape[0], in = xn->shape[1], out = wn->shape[1];
  if (wn->shape[0] != in) {
    throw DimensionError("linear: inner dimensions disagree, x " + shape_str(xn->shape) +
                         " vs w " + shape_str(wn->shape));
  }
  if (bn->value.size() != out) {
    throw DimensionError("linear: bias " + shape_str(bn->shape) + " does not match w " +
                         shape_str(wn->shape));
  }
  std::vector<double> y(batch * out);
  const double* X = xn->value.data();
  const double* W = wn->value.data();
  const double* B = bn->value.data();
  for (std::size_t r = 0; r < batch; ++r) {
    double* yr = y.data() + r * out;
    std::copy(B, B + out, yr);
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = X[r * in + k];
      if (xv == 0.0) continue;
      const double* wk = W + k * out;
      for (std::size_t c = 0; c < out; ++c) yr[c] += xv * wk[c];
    }
  }
  return make_result("linear", {batch, out}, std::move(y), {xn, wn, bn},
                     [batch, in, out](Node& self) {
                       Node& xn = *self.parents[0];
                       Node& wn = *self.parents[1];
                       Node& bn = *self.parents[2];
                       const double* G = self.grad.data();
                       if (xn.requires_grad) {
                         auto& gx = xn.grad_buffer();
                         const double* W = wn.value.data();
                         for (std::size_t r = 0; r < batch; ++r) {
                           for (std::size_t k = 0; k < in; ++k) {
                             const double* wk = W + k * out;
                             const double* gr = G + r * out;
                             double acc = 0.0;
                             for (std::size_t c = 0; c < out; ++c) acc += gr[c] * wk[c];
                             gx[r * in + k] += acc;
                           }
                         }
                       }
                       if (wn.requires_grad) {
                         auto& gw = wn.grad_buffer();
                         const double* X = xn.value.data();
                         for (std::size_t r = 0; r < batch; ++r) {
                           const double* gr = G + r * out;
                           for (std::size_t k = 0; k < in; ++k) {
                             const double xv = X[r * in + k];
                             if (xv == 0.0) continue;
                             double* gwk = gw.data() + k * out;
                             for (std::size_t c = 0; c < out; ++c) gwk[c] += xv * gr[c];
                           }
                         }
                       }
                       if (bn.requires_grad) {
                         auto& gb = bn.grad_buffer();
                         for (std::size_t r = 0; r < batch; ++r) {
                           for (std::size_t c = 0; c < out; ++c) gb[c] += G[r * out + c];
                         }
                       }
                     });
}

Tensor activation(const Tensor& x, Activation kind) {
  const NodePtr& xn = node_of(x, "activation");
  std::vector<double> y(xn->value.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = xn->value[i];
    switch (kind) {
      case Activation::kRelu: y[i] = v > 0 ? v : 0.0; break;
      case Activation::kSwish: y[i] = v * sigmoid(v); break;
      case Activation::kSigmoid: y[i] = sigmoid(v); break;
    }
  }
  return make_result("activation", xn->shape, std::move(y), {xn}, [kind](Node& self) {
    Node& xn = *self.parents[0];
    auto& gx = xn.grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double v = xn.value[i];
      double d = 0.0;
      switch (kind) {
        case Activation::kRelu: d = v > 0 ? 1.0 : 0.0; break;
        case Activation::kSwish: {
          const double s = sigmoid(v);
          d = s + v * s * (1.0 - s);
          break;
        }
        case Activation::kSigmoid: {
          const double s = sigmoid(v);
          d = s * (1.0 - s);
          break;
        }
      }
      gx[i] += self.grad[i] * d;
    }
  });
}

Tensor channel_mask(const Tensor& x, std::size_t mask_width) {
  const NodePtr& xn = node_of(x, "channel_mask");
  require_rank2(*xn, "channel_mask");
  const std::size_t rows = xn->shape[0], cols = xn->shape[1];
  if (mask_width == 0 || mask_width > cols) {
    throw DimensionError("channel_mask: width " + std::to_string(mask_width) +
                         " outside (0, " + std::to_string(cols) + "]");
  }
  // Multiplication by a 0/1 column pattern; both Prunode candidates read the
  // same upstream buffer.
  std::vector<double> y(xn->value.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xn->value.data() + r * cols, mask_width, y.data() + r * cols);
  }
  return make_result("channel_mask", xn->shape, std::move(y), {xn},
                     [rows, cols, mask_width](Node& self) {
                       auto& gx = self.parents[0]->grad_buffer();
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < mask_width; ++c) {
                           gx[r * cols + c] += self.grad[r * cols + c];
                         }
                       }
                     });
}

Tensor masked_row_mean(const Tensor& x, std::size_t width) {
  const NodePtr& xn = node_of(x, "masked_row_mean");
  require_rank2(*xn, "masked_row_mean");
  const std::size_t rows = xn->shape[0], cols = xn->shape[1];
  if (width == 0 || width > cols) {
    throw DimensionError("masked_row_mean: width " + std::to_string(width) +
                         " outside (0, " + std::to_string(cols) + "]");
  }
  std::vector<double> y(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < width; ++c) acc += xn->value[r * cols + c];
    y[r] = acc / static_cast<double>(width);
  }
  return make_result("masked_row_mean", {rows, 1}, std::move(y), {xn},
                     [rows, cols, width](Node& self) {
                       auto& gx = self.parents[0]->grad_buffer();
                       const double inv = 1.0 / static_cast<double>(width);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < width; ++c) {
                           gx[r * cols + c] += self.grad[r] * inv;
                         }
                       }
                     });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const NodePtr& ln = node_of(logits, "softmax_cross_entropy");
  require_rank2(*ln, "softmax_cross_entropy");
  const std::size_t batch = ln->shape[0], classes = ln->shape[1];
  if (labels.size() != batch) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(batch));
  }
  std::vector<double> probs(batch * classes);
  double loss = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw DataError("label " + std::to_string(label) + " outside [0, " +
                      std::to_string(classes) + ") at batch row " + std::to_string(r));
    }
    const double* row = ln->value.data() + r * classes;
    const double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    const double log_z = std::log(z) + mx;
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(row[c] - log_z);
    loss += log_z - row[label];
  }
  loss /= static_cast<double>(batch);
  std::vector<int> owned(labels.begin(), labels.end());
  return make_result("softmax_cross_entropy", {1}, {loss}, {ln},
                     [batch, classes, probs = std::move(probs),
                      owned = std::move(owned)](Node& self) {
                       auto& g = self.parents[0]->grad_buffer();
                       const double scale = self.grad[0] / static_cast<double>(batch);
                       for (std::size_t r = 0; r < batch; ++r) {
                         for (std::size_t c = 0; c < classes; ++c) {
                           double d = probs[r * classes + c];
                           if (static_cast<int>(c) == owned[r]) d -= 1.0;
                           g[r * classes + c] += scale * d;
                         }
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const NodePtr& an = node_of(a, "add");
  const NodePtr& bn = node_of(b, "add");
  require_same_shape(*an, *bn, "add");
  std::vector<double> y(an->value.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = an->value[i] + bn->value[i];
  return make_result("add", an->shape, std::move(y), {an, bn}, [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      Node& n = *self.parents[p];
      if (!n.requires_grad) continue;
      auto& g = n.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const NodePtr& an = node_of(a, "sub");
  const NodePtr& bn = node_of(b, "sub");
  require_same_shape(*an, *bn, "sub");
  std::vector<double> y(an->value.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = an->value[i] - bn->value[i];
  return make_result("sub", an->shape, std::move(y), {an, bn}, [](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    if (a.requires_grad) {
      auto& g = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b.requires_grad) {
      auto& g = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const NodePtr& an = node_of(a, "mul");
  const NodePtr& bn = node_of(b, "mul");
  require_same_shape(*an, *bn, "mul");
  std::vector<double> y(an->value.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = an->value[i] * bn->value[i];
  return make_result("mul", an->shape, std::move(y), {an, bn}, [](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    if (a.requires_grad) {
      auto& g = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b.value[i];
    }
    if (b.requires_grad) {
      auto& g = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  const NodePtr& an = node_of(a, "scale");
  std::vector<double> y(an->value.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = an->value[i] * factor;
  return make_result("scale", an->shape, std::move(y), {an}, [factor](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor add_scalar(const Tensor& a, double offset) {
  const NodePtr& an = node_of(a, "add_scalar");
  std::vector<double> y(an->value.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = an->value[i] + offset;
  return make_result("add_scalar", an->shape, std::move(y), {an}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  const NodePtr& xn = node_of(x, "scale_by");
  const NodePtr& sn = node_of(s, "scale_by");
  if (sn->value.size() != 1) {
    throw DimensionError("scale_by: scale must hold one element, got " + shape_str(sn->shape));
  }
  const double k = sn->value[0];
  std::vector<double> y(xn->value.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xn->value[i] * k;
  return make_result("scale_by", xn->shape, std::move(y), {xn, sn}, [](Node& self) {
    Node& x = *self.parents[0];
    Node& s = *self.parents[1];
    if (x.requires_grad) {
      auto& g = x.grad_buffer();
      const double k = s.value[0];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * k;
    }
    if (s.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.value.size(); ++i) acc += self.grad[i] * x.value[i];
      s.grad_buffer()[0] += acc;
    }
  });
}

Tensor log(const Tensor& x) {
  const NodePtr& xn = node_of(x, "log");
  std::vector<double> y(xn->value.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = xn->value[i];
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
    y[i] = std::log(v);
  }
  return make_result("log", xn->shape, std::move(y), {xn}, [](Node& self) {
    Node& x = *self.parents[0];
    auto& g = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / x.value[i];
  });
}

Tensor pow(const Tensor& x, double exponent) {
  const NodePtr& xn = node_of(x, "pow");
  const bool integral = std::floor(exponent) == exponent;
  std::vector<double> y(xn->value.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = xn->value[i];
    if (v < 0.0 && !integral) {
      throw DomainError("pow of negative base " + std::to_string(v) +
                        " with non-integer exponent");
    }
    y[i] = std::pow(v, exponent);
  }
  return make_result("pow", xn->shape, std::move(y), {xn}, [exponent](Node& self) {
    Node& x = *self.parents[0];
    auto& g = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * exponent * std::pow(x.value[i], exponent - 1.0);
    }
  });
}

Tensor softmax(const Tensor& v) {
  const NodePtr& vn = node_of(v, "softmax");
  if (vn->shape.size() != 1) {
    throw DimensionError("softmax: expected a 1-D tensor, got " + shape_str(vn->shape));
  }
  const double mx = *std::max_element(vn->value.begin(), vn->value.end());
  std::vector<double> y(vn->value.size());
  double z = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = std::exp(vn->value[i] - mx);
    z += y[i];
  }
  for (double& e : y) e /= z;
  return make_result("softmax", vn->shape, y, {vn}, [y](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += self.grad[i] * y[i];
    for (std::size_t i = 0; i < y.size(); ++i) g[i] += y[i] * (self.grad[i] - dot);
  });
}

Tensor stack(std::span<const Tensor> scalars) {
  if (scalars.empty()) throw DimensionError("stack: no operands");
  std::vector<NodePtr> parents;
  std::vector<double> y;
  parents.reserve(scalars.size());
  y.reserve(scalars.size());
  for (const Tensor& s : scalars) {
    const NodePtr& n = node_of(s, "stack");
    if (n->value.size() != 1) {
      throw DimensionError("stack: operand of shape " + shape_str(n->shape) + " is not a scalar");
    }
    parents.push_back(n);
    y.push_back(n->value[0]);
  }
  const std::size_t n = y.size();
  return make_result("stack", {n}, std::move(y), std::move(parents), [](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      Node& p = *self.parents[i];
      if (p.requires_grad) p.grad_buffer()[0] += self.grad[i];
    }
  });
}

Tensor select(const Tensor& v, std::size_t index) {
  const NodePtr& vn = node_of(v, "select");
  if (index >= vn->value.size()) {
    throw DimensionError("select: index " + std::to_string(index) + " outside tensor of shape " +
                         shape_str(vn->shape));
  }
  return make_result("select", {1}, {vn->value[index]}, {vn}, [index](Node& self) {
    self.parents[0]->grad_buffer()[index] += self.grad[0];
  });
}

Tensor sum(const Tensor& x) {
  const NodePtr& xn = node_of(x, "sum");
  const double s = std::accumulate(xn->value.begin(), xn->value.end(), 0.0);
  return make_result("sum", {1}, {s}, {xn}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (double& e : g) e += self.grad[0];
  });
}

Tensor weighted_sum(const Tensor& v, std::span<const double> weights) {
  const NodePtr& vn = node_of(v, "weighted_sum");
  if (weights.size() != vn->value.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) +
                         " weights for tensor of shape " + shape_str(vn->shape));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += vn->value[i] * weights[i];
  std::vector<double> w(weights.begin(), weights.end());
  return make_result("weighted_sum", {1}, {s}, {vn}, [w = std::move(w)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < w.size(); ++i) g[i] += self.grad[0] * w[i];
  });
}

Tensor detach(const Tensor& x) {
  const NodePtr& xn = node_of(x, "detach");
  return Tensor::constant(xn->shape, xn->value);
}

}  // namespace dnas
