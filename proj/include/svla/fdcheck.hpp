#pragma once

#include <functional>

#include "svla/tensor.hpp"

namespace svla {

// Central-difference gradient check of a scalar function at x.
// Returns max over coordinates of |analytic - central| / (|central| + 1e-12).
// When coord_budget > 0 and x has more coordinates than the budget, a seeded
// random subset is checked (used for large composed graphs).
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double eps, int coord_budget = 0, uint64_t subset_seed = 0);

}  // namespace svla
