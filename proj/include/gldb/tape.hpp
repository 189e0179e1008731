#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <vector>

#include "gldb/tensor.hpp"

namespace gldb {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return tape->value(*this).shape(); }
  bool valid() const noexcept { return tape != nullptr; }
};

/// Ordered record of primitive applications for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so reverse id order is a valid
/// topological order for the backward sweep. A tape with gradients disabled
/// keeps values only and never stores adjoint closures.
template <typename T>
class Tape {
 public:
  /// Receives the node's own value and adjoint and pushes contributions into
  /// parent grads.
  using Backward = std::function<void(Tape&, const Tensor<T>& value, const Tensor<T>& grad)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }

  Var<T> leaf(Tensor<T> value, bool requires_grad = false);
  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, Backward backward);
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& parents, Backward backward);

  const Tensor<T>& value(Var<T> v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var<T> v) const { return nodes_.at(v.id).requires_grad; }

  /// Adjoint of v after backward(); zeros when nothing reached it.
  Tensor<T> grad(Var<T> v) const;

  /// Mutable adjoint buffer, allocated as zeros on first use. Only valid for
  /// nodes that require grad.
  Tensor<T>& grad_buffer(Var<T> v);

  void accumulate(Var<T> v, const Tensor<T>& g);

  /// Seeds d(out)/d(out) = 1; out must hold a single scalar.
  void backward(Var<T> out);
  void backward(Var<T> out, const Tensor<T>& seed);

  void zero_grad();

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Total scalars held by node values with id >= first. Used for
  /// auxiliary-memory accounting.
  std::size_t value_elements(std::size_t first = 0) const;

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Backward backward;
  };

  template <typename Range>
  Var<T> record_impl(Tensor<T> value, const Range& parents, Backward backward);

  bool grad_enabled_;
  // deque keeps references to earlier values valid while recording.
  std::deque<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace gldb
