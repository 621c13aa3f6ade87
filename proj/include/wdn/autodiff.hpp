#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "wdn/tensor.hpp"

namespace wdn {

/// One vertex of the reverse-mode graph. Leaves are inputs or parameters;
/// interior nodes carry a closure that pushes `grad` into their parents.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  /// Zero-filled gradient buffer, allocated on first use.
  Tensor<T>& grad_buffer() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> constant(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  return node;
}

template <typename T>
Var<T> variable(Tensor<T> value) {
  auto node = constant(std::move(value));
  node->requires_grad = true;
  node->grad_buffer();
  return node;
}

/// Creates an interior node. `backward` is only kept when some parent needs
/// gradients, so graphs over frozen parameters carry no closures.
template <typename T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> parents, const char* op,
                 std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = op;
  for (const auto& p : parents) node->requires_grad = node->requires_grad || p->requires_grad;
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward);
  }
  return node;
}

/// Seeds d(loss)/d(loss) = 1 and propagates in reverse topological order.
/// Gradients accumulate into leaf buffers; callers zero them between steps.
template <typename T>
void backward(const Var<T>& loss);

extern template void backward<float>(const Var<float>&);
extern template void backward<double>(const Var<double>&);

}  // namespace wdn
