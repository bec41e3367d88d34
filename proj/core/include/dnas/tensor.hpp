// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal dense reverse-mode automatic differentiation.
//
// A Tensor is a cheap, shareable handle to a node of a dynamically built
// compute graph. Every operation below creates a new node that remembers its
// parents; `backward()` on a scalar walks the reachable nodes in reverse
// creation order exactly once and accumulates gradients into every node that
// requires them. Values are row-major doubles; shapes are either [n] or
// [rows, cols]. Any NaN/Inf produced by an operation raises EngineError.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace dnas {

using Shape = std::vector<std::size_t>;

namespace detail {
struct Node;
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  // Leaf with requires_grad = false.
  static Tensor constant(Shape shape, std::vector<double> values);
  // Leaf with requires_grad = true.
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  // Empty until a backward pass reached this tensor.
  std::span<const double> grad() const;
  bool has_grad() const;
  bool requires_grad() const;
  bool is_leaf() const;
  double item() const;

  // In-place update of a leaf's values (optimizer steps). Throws
  // InvariantError on non-leaves.
  std::span<double> mutable_values();
  // Drops the gradient; optimizers skip tensors without one.
  void zero_grad();

  // Seeds d(self)/d(self) = 1 and propagates. Requires numel() == 1.
  void backward() const;

  // Deep copy into a fresh leaf carrying the same requires_grad flag.
  Tensor clone() const;

  // Creation sequence number; strictly increasing per process.
  std::uint64_t id() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend class TensorAccess;
  std::shared_ptr<detail::Node> node_;
};

enum class Activation { kRelu, kSwish, kSigmoid };

// Throws ConfigError on an unknown name.
Activation parse_activation(std::string_view name);
std::string_view to_string(Activation kind);

// y = x * w + b with x:[batch,in], w:[in,out], b:[out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor activation(const Tensor& x, Activation kind);

// Columns [0, mask_width) pass through, the rest are zero in both directions.
Tensor channel_mask(const Tensor& x, std::size_t mask_width);
// Per-row mean of the first `width` columns: [batch, C] -> [batch, 1].
Tensor masked_row_mean(const Tensor& x, std::size_t width);

// Mean negative log-likelihood over the batch.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// Elementwise arithmetic on equally shaped tensors.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
// x * s where s holds exactly one element.
Tensor scale_by(const Tensor& x, const Tensor& s);

// Throws DomainError on a non-positive argument.
Tensor log(const Tensor& x);
// Elementwise x^exponent; a negative base with a non-integer exponent is a
// DomainError.
Tensor pow(const Tensor& x, double exponent);

// Softmax over a 1-D tensor.
Tensor softmax(const Tensor& v);
// Concatenates single-element tensors into a 1-D tensor.
Tensor stack(std::span<const Tensor> scalars);
Tensor select(const Tensor& v, std::size_t index);
Tensor sum(const Tensor& x);
// Sum_i v[i] * weights[i], weights constant.
Tensor weighted_sum(const Tensor& v, std::span<const double> weights);

// Same values, no gradient path.
Tensor detach(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace dnas
