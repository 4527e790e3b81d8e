#include "svla/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace svla {
namespace detail {

namespace {
std::atomic<uint64_t> g_node_counter{1};
thread_local bool g_grad_enabled = true;
}  // namespace

uint64_t next_node_id() { return g_node_counter.fetch_add(1); }
bool grad_enabled() { return g_grad_enabled; }

}  // namespace detail

NoGradGuard::NoGradGuard() : prev_(detail::g_grad_enabled) { detail::g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { detail::g_grad_enabled = prev_; }

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative axis length");
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

static std::shared_ptr<detail::TensorImpl> new_impl(std::vector<int> shape) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->node_id = detail::next_node_id();
  return impl;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  auto impl = new_impl(shape);
  impl->data = std::make_shared<std::vector<real_t>>(shape_numel(shape), real_t(0));
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::full(std::vector<int> shape, real_t value, bool requires_grad) {
  auto impl = new_impl(shape);
  impl->data = std::make_shared<std::vector<real_t>>(shape_numel(shape), value);
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<real_t> data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("from_data: shape " + shape_str(shape) +
                                " does not match data length " + std::to_string(data.size()));
  auto impl = new_impl(shape);
  impl->data = std::make_shared<std::vector<real_t>>(std::move(data));
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, real_t stddev, bool requires_grad) {
  auto impl = new_impl(shape);
  impl->data = std::make_shared<std::vector<real_t>>(shape_numel(shape));
  for (auto& v : *impl->data) v = static_cast<real_t>(rng.normal(0.0, stddev));
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::scalar(real_t value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

real_t Tensor::item() const {
  if (numel() != 1) throw std::logic_error("item() on non-scalar tensor " + shape_str(shape()));
  return (*impl_->data)[0];
}

std::vector<real_t> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<real_t>(numel(), real_t(0));
  return impl_->grad;
}

const std::vector<real_t>& Tensor::grad_ref() const {
  const_cast<detail::TensorImpl*>(impl_.get())->ensure_grad();
  return impl_->grad;
}

Tensor make_node(std::vector<int> shape, std::vector<Tensor> parents,
                 std::function<void(detail::TensorImpl&)> backward_fn) {
  auto impl = new_impl(std::move(shape));
  impl->data = std::make_shared<std::vector<real_t>>(impl->numel(), real_t(0));
  if (detail::grad_enabled()) {
    bool any = false;
    for (const auto& p : parents)
      if (p.defined() && (p.requires_grad() || p.impl()->backward_fn || !p.impl()->parents.empty()))
        any = true;
    if (any) {
      impl->parents.reserve(parents.size());
      for (auto& p : parents) impl->parents.push_back(p.impl_ptr());
      impl->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(impl);
}

ComputeGraph trace(const Tensor& loss) {
  ComputeGraph g;
  if (!loss.defined()) return g;
  // Iterative DFS post-order; creation-order ids make the order deterministic.
  std::unordered_map<const detail::TensorImpl*, int> state;  // 0 new, 1 open, 2 done
  std::vector<std::shared_ptr<detail::TensorImpl>> stack{loss.impl_ptr()};
  while (!stack.empty()) {
    auto node = stack.back();
    int& st = state[node.get()];
    if (st == 0) {
      st = 1;
      for (auto& p : node->parents)
        if (state[p.get()] == 0) stack.push_back(p);
    } else {
      stack.pop_back();
      if (st == 1) {
        st = 2;
        g.nodes.emplace_back(node);
      }
    }
  }
  return g;
}

GradMap backward(const ComputeGraph& graph, const Tensor& loss) {
  if (loss.numel() != 1)
    throw std::logic_error("backward: loss must be scalar, got " + shape_str(loss.shape()));
  for (const auto& n : graph.nodes) n.impl()->grad.clear();
  loss.impl()->ensure_grad();
  loss.impl()->grad[0] = real_t(1);
  for (auto it = graph.nodes.rbegin(); it != graph.nodes.rend(); ++it) {
    auto* impl = it->impl();
    if (impl->backward_fn && !impl->grad.empty()) impl->backward_fn(*impl);
  }
  GradMap grads;
  for (const auto& n : graph.nodes)
    if (n.requires_grad()) grads.emplace(n.impl(), Tensor::from_data(n.shape(), n.grad()));
  return grads;
}

void Tensor::backward(real_t scale) const {
  if (numel() != 1)
    throw std::logic_error("backward: loss must be scalar, got " + shape_str(shape()));
  ComputeGraph g = trace(*this);
  // Accumulating variant: leaves (parameters) keep grads across calls so a
  // batch can be processed as a loop of per-sample graphs; interior nodes are
  // per-call scratch.
  for (const auto& n : g.nodes) {
    auto* impl = n.impl();
    bool is_leaf = impl->requires_grad && !impl->backward_fn;
    if (!is_leaf) impl->grad.clear();
  }
  impl_->ensure_grad();
  impl_->grad[0] += scale;
  for (auto it = g.nodes.rbegin(); it != g.nodes.rend(); ++it) {
    auto* impl = it->impl();
    if (impl->backward_fn && !impl->grad.empty()) impl->backward_fn(*impl);
  }
  for (const auto& n : g.nodes) {
    auto* impl = n.impl();
    bool is_leaf = impl->requires_grad && !impl->backward_fn;
    if (!is_leaf) impl->grad.clear();
  }
}

}  // namespace svla
