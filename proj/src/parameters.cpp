#include "wdn/parameters.hpp"

#include <cmath>

namespace wdn {

template <typename T>
Var<T> ParameterStore<T>::add(const std::string& name, Tensor<T> init, const std::string& group, bool trainable) {
  if (contains(name)) throw ContractError("parameter '" + name + "' already registered");
  Parameter<T> p;
  p.name = name;
  p.group = group;
  p.trainable = trainable;
  p.m = Tensor<T>(init.shape());
  p.v = Tensor<T>(init.shape());
  p.node = trainable ? variable(std::move(init)) : constant(std::move(init));
  p.frozen = group_frozen(group);
  if (p.frozen) p.node->requires_grad = false;
  auto node = p.node;
  entries_.emplace(name, std::move(p));
  return node;
}

template <typename T>
Parameter<T>& ParameterStore<T>::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
const Parameter<T>& ParameterStore<T>::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
std::vector<Parameter<T>*> ParameterStore<T>::select(const std::string& prefix) {
  std::vector<Parameter<T>*> out;
  for (auto it = entries_.lower_bound(prefix); it != entries_.end() && it->first.starts_with(prefix); ++it)
    out.push_back(&it->second);
  return out;
}

template <typename T>
void ParameterStore<T>::freeze_group(const std::string& group) {
  for (auto& [name, p] : entries_)
    if (p.group == group) {
      p.frozen = true;
      p.node->requires_grad = false;
    }
}

template <typename T>
void ParameterStore<T>::unfreeze_group(const std::string& group) {
  for (auto& [name, p] : entries_)
    if (p.group == group) {
      p.frozen = false;
      p.node->requires_grad = p.trainable;
      if (p.trainable) p.node->grad_buffer();
    }
}

template <typename T>
bool ParameterStore<T>::group_frozen(const std::string& group) const {
  bool any = false;
  for (const auto& [name, p] : entries_)
    if (p.group == group) {
      if (!p.frozen) return false;
      any = true;
    }
  return any;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& [name, p] : entries_)
    if (p.trainable) p.node->grad_buffer().fill(T{0});
}

template <typename T>
std::size_t ParameterStore<T>::trainable_count() const {
  std::size_t total = 0;
  for (const auto& [name, p] : entries_)
    if (p.trainable) total += p.node->value.size();
  return total;
}

template <typename T>
void adam_step(std::span<Parameter<T>* const> params, const AdamConfig& config) {
  for (Parameter<T>* p : params) {
    if (p->frozen || !p->trainable) continue;
    Tensor<T>& theta = p->node->value;
    const Tensor<T>& grad = p->node->grad_buffer();
    ++p->step;
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(p->step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(p->step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      const double m = config.beta1 * p->m[i] + (1.0 - config.beta1) * g;
      const double v = config.beta2 * p->v[i] + (1.0 - config.beta2) * g * g;
      p->m[i] = static_cast<T>(m);
      p->v[i] = static_cast<T>(v);
      const double update = config.lr * (m / c1) / (std::sqrt(v / c2) + config.eps);
      theta[i] = static_cast<T>(theta[i] - update);
    }
  }
}

template <typename T>
void adam_step(ParameterStore<T>& store, const AdamConfig& config) {
  std::vector<Parameter<T>*> all;
  for (auto& [name, p] : store.entries()) all.push_back(&p);
  adam_step<T>(std::span<Parameter<T>* const>(all), config);
}

template <typename T>
void backward(const Var<T>& loss, ParameterStore<T>& store) {
  store.zero_grad();
  backward(loss);
}

double glorot_limit(const Shape& shape) {
  if (shape.size() < 2) throw ContractError("glorot: need at least 2 dims, got " + shape_str(shape));
  std::size_t receptive = 1;
  for (std::size_t i = 2; i < shape.size(); ++i) receptive *= shape[i];
  const double fan_in = static_cast<double>(shape[1] * receptive);
  const double fan_out = static_cast<double>(shape[0] * receptive);
  return std::sqrt(6.0 / (fan_in + fan_out));
}

template <typename T>
Tensor<T> glorot_uniform(const Shape& shape, Rng& rng) {
  const double limit = glorot_limit(shape);
  Tensor<T> out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(rng.uniform(-limit, limit));
  return out;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template void adam_step<float>(std::span<Parameter<float>* const>, const AdamConfig&);
template void adam_step<double>(std::span<Parameter<double>* const>, const AdamConfig&);
template void adam_step<float>(ParameterStore<float>&, const AdamConfig&);
template void adam_step<double>(ParameterStore<double>&, const AdamConfig&);
template void backward<float>(const Var<float>&, ParameterStore<float>&);
template void backward<double>(const Var<double>&, ParameterStore<double>&);
template Tensor<float> glorot_uniform<float>(const Shape&, Rng&);
template Tensor<double> glorot_uniform<double>(const Shape&, Rng&);

}  // namespace wdn
