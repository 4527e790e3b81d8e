#include "svla/fdcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace svla {

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double eps, int coord_budget, uint64_t subset_seed) {
  if (eps <= 0) throw std::invalid_argument("finite_diff_check: eps must be positive");

  Tensor probe = Tensor::from_data(x.shape(), x.data(), /*requires_grad=*/true);
  Tensor y = f(probe);
  if (y.numel() != 1) throw std::logic_error("finite_diff_check: f must return a scalar");
  if (!std::isfinite(static_cast<double>(y.item())))
    throw std::runtime_error("finite_diff_check: f(x) is not finite");
  ComputeGraph g = trace(y);
  GradMap grads = backward(g, y);
  auto it = grads.find(probe.impl());
  std::vector<real_t> analytic =
      it == grads.end() ? std::vector<real_t>(x.numel(), real_t(0)) : it->second.data();

  std::vector<int64_t> coords(x.numel());
  std::iota(coords.begin(), coords.end(), 0);
  if (coord_budget > 0 && static_cast<int64_t>(coords.size()) > coord_budget) {
    Rng rng(subset_seed);
    for (int i = 0; i < coord_budget; ++i) {
      int64_t j = rng.uniform_int(i, static_cast<int64_t>(coords.size()) - 1);
      std::swap(coords[i], coords[j]);
    }
    coords.resize(coord_budget);
  }

  NoGradGuard ng;
  std::vector<real_t> base = x.data();
  double worst = 0;
  for (int64_t c : coords) {
    auto eval = [&](double delta) {
      std::vector<real_t> perturbed = base;
      perturbed[c] = static_cast<real_t>(static_cast<double>(base[c]) + delta);
      Tensor xp = Tensor::from_data(x.shape(), std::move(perturbed));
      return static_cast<double>(f(xp).item());
    };
    double central = (eval(eps) - eval(-eps)) / (2.0 * eps);
    double rel = std::abs(static_cast<double>(analytic[c]) - central) /
                 (std::abs(central) + 1e-12);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace svla
