#include "wdn/autodiff.hpp"

#include <unordered_set>
#include <utility>

namespace wdn {

template <typename T>
void backward(const Var<T>& loss) {
  if (!loss || loss->value.size() != 1)
    throw ContractError("backward: loss must be a scalar, got " +
                        (loss ? shape_str(loss->value.shape()) : std::string("null")));
  if (!loss->requires_grad) return;

  // Iterative post-order DFS; reversed, it is a topological order from the loss.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{loss.get(), 0}};
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->grad_buffer()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn) {
      node->grad_buffer();
      for (auto& p : node->parents)
        if (p->requires_grad) p->grad_buffer();
      node->backward_fn(*node);
      // interior gradients are not needed once propagated
      if (!node->parents.empty()) node->grad = Tensor<T>();
    }
  }
}

template void backward<float>(const Var<float>&);
template void backward<double>(const Var<double>&);

}  // namespace wdn
