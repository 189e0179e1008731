#include "gldb/tape.hpp"

#include <stdexcept>

namespace gldb {

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(node));
  return Var<T>{this, nodes_.size() - 1};
}

template <typename T>
template <typename Range>
Var<T> Tape<T>::record_impl(Tensor<T> value, const Range& parents, Backward backward) {
  Node node;
  node.value = std::move(value);
  if (grad_enabled_) {
    for (const auto& p : parents) {
      if (p.tape != this) throw std::logic_error("tape: parent recorded on a different tape");
      if (nodes_[p.id].requires_grad) node.requires_grad = true;
    }
    if (node.requires_grad) node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var<T>{this, nodes_.size() - 1};
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> parents, Backward backward) {
  return record_impl(std::move(value), parents, std::move(backward));
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, const std::vector<Var<T>>& parents, Backward backward) {
  return record_impl(std::move(value), parents, std::move(backward));
}

template <typename T>
Tensor<T> Tape<T>::grad(Var<T> v) const {
  const auto& node = nodes_.at(v.id);
  if (node.grad.empty()) return Tensor<T>(node.value.shape());
  return node.grad;
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(Var<T> v) {
  auto& node = nodes_.at(v.id);
  if (node.grad.empty()) node.grad = Tensor<T>(node.value.shape());
  return node.grad;
}

template <typename T>
void Tape<T>::accumulate(Var<T> v, const Tensor<T>& g) {
  auto& node = nodes_.at(v.id);
  if (!node.requires_grad) return;
  require_same_shape(node.value.shape(), g.shape(), "tape accumulate");
  if (node.grad.empty()) {
    node.grad = g;
    return;
  }
  auto dst = node.grad.mutable_data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void Tape<T>::backward(Var<T> out) {
  if (value(out).numel() != 1) {
    throw ShapeError("backward without a seed needs a scalar output, got " + to_string(value(out).shape()));
  }
  backward(out, Tensor<T>(value(out).shape(), T(1)));
}

template <typename T>
void Tape<T>::backward(Var<T> out, const Tensor<T>& seed) {
  if (!grad_enabled_) throw std::logic_error("tape: backward on a tape with gradients disabled");
  accumulate(out, seed);
  for (std::size_t id = out.id + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
    node.backward(*this, node.value, node.grad);
  }
}

template <typename T>
void Tape<T>::zero_grad() {
  for (auto& node : nodes_) node.grad = Tensor<T>();
}

template <typename T>
std::size_t Tape<T>::value_elements(std::size_t first) const {
  std::size_t total = 0;
  for (std::size_t id = first; id < nodes_.size(); ++id) total += nodes_[id].value.numel();
  return total;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace gldb
