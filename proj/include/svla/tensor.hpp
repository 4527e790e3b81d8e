#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "svla/real.hpp"
#include "svla/rng.hpp"

namespace svla {

class Tensor;

namespace detail {

struct TensorImpl {
  std::vector<int> shape;
  std::shared_ptr<std::vector<real_t>> data;  // shared so reshape is zero-copy
  std::vector<real_t> grad;                   // allocated lazily, same numel
  bool requires_grad = false;
  uint64_t node_id = 0;  // creation order; gives a stable topological tie-break
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Propagates this node's grad into parents' grads.
  std::function<void(TensorImpl&)> backward_fn;

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.size() != static_cast<size_t>(numel())) grad.assign(numel(), real_t(0));
  }
};

uint64_t next_node_id();
bool grad_enabled();

}  // namespace detail

// RAII guard that disables graph recording (inference / oracle evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Dense multi-dimensional array participating in reverse-mode autodiff.
// Value-semantic handle over a shared node; data is immutable after
// construction except through optimizer updates.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, real_t value, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<real_t> data,
                          bool requires_grad = false);
  static Tensor randn(std::vector<int> shape, Rng& rng, real_t stddev = real_t(1),
                      bool requires_grad = false);
  static Tensor scalar(real_t value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const { return impl_->shape; }
  int dim(int axis) const { return impl_->shape.at(axis); }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int64_t numel() const { return impl_->numel(); }

  std::vector<real_t>& data() { return *impl_->data; }
  const std::vector<real_t>& data() const { return *impl_->data; }
  real_t item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }

  // Grad of the last backward pass; zeros if never touched.
  std::vector<real_t> grad() const;
  const std::vector<real_t>& grad_ref() const;
  bool has_grad() const { return !impl_->grad.empty(); }
  void zero_grad() { impl_->grad.clear(); }

  // Reverse-mode sweep from a scalar. `scale` seeds d(loss)/d(loss).
  void backward(real_t scale = real_t(1)) const;

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Ordered op records of everything `loss` depends on; parents precede children.
struct ComputeGraph {
  std::vector<Tensor> nodes;  // topological order, loss last
};

// Materializes the graph reachable from `loss`.
ComputeGraph trace(const Tensor& loss);

// Gradient map keyed by parameter node; each gradient has the shape of its
// parameter.
using GradMap = std::unordered_map<const detail::TensorImpl*, Tensor>;

// Exact reverse-mode gradients of a scalar loss w.r.t. every requires_grad
// tensor in the graph. Disconnected parameters simply do not appear; callers
// treat absence as a zero gradient.
GradMap backward(const ComputeGraph& graph, const Tensor& loss);

// Shared helper for op implementations.
Tensor make_node(std::vector<int> shape, std::vector<Tensor> parents,
                 std::function<void(detail::TensorImpl&)> backward_fn);

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

}  // namespace svla
