#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wdn/autodiff.hpp"
#include "wdn/rng.hpp"

namespace wdn {

template <typename T>
struct Parameter {
  std::string name;
  std::string group;
  Var<T> node;
  /// Buffers (batch-norm running statistics) are persisted but never optimised.
  bool trainable = true;
  bool frozen = false;
  Tensor<T> m;
  Tensor<T> v;
  std::int64_t step = 0;
};

/// Named trainable tensors, grouped (one group per stage) for freezing.
/// Entries are node-stable: references stay valid while the store lives.
template <typename T>
class ParameterStore {
 public:
  Var<T> add(const std::string& name, Tensor<T> init, const std::string& group, bool trainable = true);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Parameter<T>& at(const std::string& name);
  const Parameter<T>& at(const std::string& name) const;

  std::vector<Parameter<T>*> select(const std::string& prefix);
  std::map<std::string, Parameter<T>>& entries() { return entries_; }
  const std::map<std::string, Parameter<T>>& entries() const { return entries_; }

  void freeze_group(const std::string& group);
  void unfreeze_group(const std::string& group);
  bool group_frozen(const std::string& group) const;

  void zero_grad();
  std::size_t trainable_count() const;

 private:
  std::map<std::string, Parameter<T>> entries_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

/// Bias-corrected Adam on the given parameters. Frozen parameters and
/// buffers are skipped and stay bitwise unchanged.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, const AdamConfig& config);

template <typename T>
void adam_step(ParameterStore<T>& store, const AdamConfig& config);

/// Zeros every gradient in `store`, then back-propagates from `loss`.
template <typename T>
void backward(const Var<T>& loss, ParameterStore<T>& store);

/// Uniform Glorot draw in +-sqrt(6 / (fan_in + fan_out)). For conv kernels
/// [Cout, Cin, kh, kw] fan_in = Cin*kh*kw and fan_out = Cout*kh*kw.
template <typename T>
Tensor<T> glorot_uniform(const Shape& shape, Rng& rng);

double glorot_limit(const Shape& shape);

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace wdn
