#pragma once

#include <functional>
#include <vector>

#include "mosaic/core/tensor.hpp"

namespace mosaic {

using Var = int32_t;

// Reverse-mode tape. Ops append nodes via emit() and, when the node needs a
// gradient, attach their backward with set_backward(); backward() walks the
// tape in reverse. With recording off (target-network and rollout passes)
// ops still produce values but no node needs a gradient, so closures are
// never attached and no gradient state is retained.
template <class T>
class Graph {
 public:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // lazily allocated on first accumulation
    bool needs_grad = false;
    std::function<void(Graph&)> backward;
  };

  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  Var leaf(Tensor<T> value, bool needs_grad = false) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = recording_ && needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
  }

  Var emit(Tensor<T> value, std::initializer_list<Var> parents) {
    Node n;
    n.value = std::move(value);
    if (recording_) {
      for (Var p : parents) n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
    }
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
  }

  template <class Bw>
  void set_backward(Var v, Bw&& bw) {
    if (nodes_[v].needs_grad) nodes_[v].backward = std::forward<Bw>(bw);
  }

  const Tensor<T>& value(Var v) const { return nodes_[v].value; }
  bool needs_grad(Var v) const { return nodes_[v].needs_grad; }
  bool has_grad(Var v) const { return nodes_[v].grad.defined(); }

  // Gradient buffer, allocated as zeros on demand.
  Tensor<T>& grad(Var v) {
    Node& n = nodes_[v];
    if (!n.grad.defined()) n.grad = Tensor<T>::zeros(n.value.shape());
    return n.grad;
  }

  void add_grad(Var v, const Tensor<T>& g) {
    if (!nodes_[v].needs_grad) return;
    grad(v).add_(g);
  }

  void backward(Var loss) {
    check(value(loss).numel() == 1, "backward expects a scalar loss");
    check(nodes_[loss].needs_grad, "loss does not depend on any trainable leaf");
    grad(loss).fill_(T(1));
    for (Var v = loss; v >= 0; --v) {
      Node& n = nodes_[v];
      if (n.backward && n.grad.defined()) n.backward(*this);
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  bool recording_;
};

}  // namespace mosaic
