#include "svla/optim.hpp"

#include <cmath>

namespace svla {

void OptimState::init(const ParamRegistry& params) {
  m.clear();
  v.clear();
  for (const auto& p : params.tensors()) {
    m.emplace_back(p.numel(), real_t(0));
    v.emplace_back(p.numel(), real_t(0));
  }
  step = 0;
}

void adam_step(ParamRegistry& params, OptimState& state) {
  if (!state.initialized()) state.init(params);
  if (state.m.size() != params.size())
    throw std::logic_error("adam_step: state does not match parameter registry");
  state.step += 1;
  const real_t bc1 = real_t(1) - std::pow(state.beta1, static_cast<real_t>(state.step));
  const real_t bc2 = real_t(1) - std::pow(state.beta2, static_cast<real_t>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor p = params.tensors()[i];
    const auto& g = p.grad_ref();
    auto& m = state.m[i];
    auto& v = state.v[i];
    auto& w = p.data();
    for (int64_t j = 0; j < p.numel(); ++j) {
      if (!std::isfinite(g[j]))
        throw std::runtime_error("adam_step: non-finite gradient in parameter '" +
                                 params.names()[i] + "'");
      m[j] = state.beta1 * m[j] + (real_t(1) - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (real_t(1) - state.beta2) * g[j] * g[j];
      real_t mh = m[j] / bc1;
      real_t vh = v[j] / bc2;
      w[j] -= state.lr * mh / (std::sqrt(vh) + state.eps);
    }
  }
}

}  // namespace svla
