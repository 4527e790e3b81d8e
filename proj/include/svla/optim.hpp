#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "svla/tensor.hpp"

namespace svla {

// Named trainable tensors. Order of registration is the canonical order for
// serialization and optimizer iteration.
class ParamRegistry {
 public:
  Tensor add(const std::string& name, Tensor t) {
    t.set_requires_grad(true);
    names_.push_back(name);
    params_.push_back(t);
    index_[name] = params_.size() - 1;
    return t;
  }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Tensor>& tensors() const { return params_; }
  Tensor get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return params_[it->second];
  }
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  size_t size() const { return params_.size(); }
  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }
  int64_t total_scalars() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> params_;
  std::unordered_map<std::string, size_t> index_;
};

// Adaptive-moment optimizer state: per-parameter first/second moments plus a
// strictly increasing step counter.
struct OptimState {
  real_t lr = real_t(1.6e-4);
  real_t beta1 = real_t(0.9);
  real_t beta2 = real_t(0.999);
  real_t eps = real_t(1e-8);
  int64_t step = 0;
  std::vector<std::vector<real_t>> m, v;  // parallel to the registry

  void init(const ParamRegistry& params);
  bool initialized() const { return !m.empty(); }
};

// One update over all registered parameters using their accumulated grads.
// Throws on a non-finite gradient, naming the offending parameter.
void adam_step(ParamRegistry& params, OptimState& state);

}  // namespace svla
