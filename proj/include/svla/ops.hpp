#pragma once

#include <vector>

#include "svla/tensor.hpp"

namespace svla {
namespace ops {

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real_t s);
Tensor add_scalar(const Tensor& a, real_t s);
Tensor gelu(const Tensor& a);

// 2-D matrix product: [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
// Affine map over rows: x [n,di], w [di,do], b [do] -> [n,do].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Softmax along `axis`; entries in (0,1), sums to 1 along the axis.
Tensor softmax(const Tensor& a, int axis);
// Per-row normalization over the last axis with learned gain/shift.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  real_t eps = real_t(1e-5));

// input [ci,h,w], weight [co,ci,kh,kw], bias [co]; zero padding.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int pad);
Tensor mean_pool2d(const Tensor& input, int k);  // [c,h,w] -> [c,h/k,w/k]
Tensor max_pool2d(const Tensor& input, int k);

Tensor concat(const std::vector<Tensor>& parts, int axis);
// Copies `len` indices starting at `start` along `axis`.
Tensor slice(const Tensor& a, int axis, int start, int len);
Tensor permute(const Tensor& a, const std::vector<int>& dims);
Tensor reshape(const Tensor& a, std::vector<int> shape);  // zero-copy

// table [v,d], ids (row indices) -> [n,d]; backward scatter-adds.
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

Tensor sum(const Tensor& a);       // scalar
Tensor mean(const Tensor& a);      // scalar
Tensor sum_axis(const Tensor& a, int axis);
Tensor mse(const Tensor& a, const Tensor& b);  // scalar mean squared error

// Mean negative log-likelihood of targets under softmax(logits).
// logits [n,k] (or [k] with a single target).
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);

}  // namespace ops
}  // namespace svla
