#include "svla/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace svla {
namespace ops {

using EMat = Eigen::Matrix<real_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

// ---------------------------------------------------------------------------
// elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = make_node(a.shape(), {a, b}, [a, b](detail::TensorImpl& self) {
    if (a.requires_grad() || a.impl()->backward_fn || !a.impl()->parents.empty()) {
      a.impl()->ensure_grad();
      for (int64_t i = 0; i < a.numel(); ++i) a.impl()->grad[i] += self.grad[i];
    }
    if (b.requires_grad() || b.impl()->backward_fn || !b.impl()->parents.empty()) {
      b.impl()->ensure_grad();
      for (int64_t i = 0; i < b.numel(); ++i) b.impl()->grad[i] += self.grad[i];
    }
  });
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = make_node(a.shape(), {a, b}, [a, b](detail::TensorImpl& self) {
    a.impl()->ensure_grad();
    b.impl()->ensure_grad();
    for (int64_t i = 0; i < a.numel(); ++i) {
      a.impl()->grad[i] += self.grad[i];
      b.impl()->grad[i] -= self.grad[i];
    }
  });
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = make_node(a.shape(), {a, b}, [a, b](detail::TensorImpl& self) {
    a.impl()->ensure_grad();
    b.impl()->ensure_grad();
    for (int64_t i = 0; i < a.numel(); ++i) {
      a.impl()->grad[i] += self.grad[i] * b.data()[i];
      b.impl()->grad[i] += self.grad[i] * a.data()[i];
    }
  });
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

Tensor scale(const Tensor& a, real_t s) {
  Tensor out = make_node(a.shape(), {a}, [a, s](detail::TensorImpl& self) {
    a.impl()->ensure_grad();
    for (int64_t i = 0; i < a.numel(); ++i) a.impl()->grad[i] += self.grad[i] * s;
  });
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] * s;
  return out;
}

Tensor add_scalar(const Tensor& a, real_t s) {
  Tensor out = make_node(a.shape(), {a}, [a](detail::TensorImpl& self) {
    a.impl()->ensure_grad();
    for (int64_t i = 0; i < a.numel(); ++i) a.impl()->grad[i] += self.grad[i];
  });
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] + s;
  return out;
}

Tensor gelu(const Tensor& a) {
  // tanh approximation; backward uses the analytic derivative of the same form.
  const real_t c = real_t(0.7978845608028654);  // sqrt(2/pi)
  const real_t k = real_t(0.044715);
  Tensor out = make_node(a.shape(), {a}, [a, c, k](detail::TensorImpl& self) {
    a.impl()->ensure_grad();
    for (int64_t i = 0; i < a.numel(); ++i) {
      real_t x = a.data()[i];
      real_t u = c * (x + k * x * x * x);
      real_t t = std::tanh(u);
      real_t du = c * (real_t(1) + real_t(3) * k * x * x);
      real_t d = real_t(0.5) * (real_t(1) + t) + real_t(0.5) * x * (real_t(1) - t * t) * du;
      a.impl()->grad[i] += self.grad[i] * d;
    }
  });
  for (int64_t i = 0; i < a.numel(); ++i) {
    real_t x = a.data()[i];
    out.data()[i] = real_t(0.5) * x * (real_t(1) + std::tanh(c * (x + k * x * x * x)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// dense algebra

static void check_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw std::invalid_argument(std::string(op) + ": expected rank-2, got " +
                                shape_str(t.shape()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_matrix(a, "matmul");
  check_matrix(b, "matmul");
  int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw std::invalid_argument("matmul: inner dims " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  Tensor out = make_node({m, n}, {a, b}, [a, b, m, k, n](detail::TensorImpl& self) {
    ECMap ga(self.grad.data(), m, n);
    a.impl()->ensure_grad();
    b.impl()->ensure_grad();
    EMap(a.impl()->grad.data(), m, k).noalias() += ga * ECMap(b.data().data(), k, n).transpose();
    EMap(b.impl()->grad.data(), k, n).noalias() += ECMap(a.data().data(), m, k).transpose() * ga;
  });
  EMap(out.data().data(), m, n).noalias() =
      ECMap(a.data().data(), m, k) * ECMap(b.data().data(), k, n);
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_matrix(x, "linear");
  check_matrix(w, "linear");
  int n = x.dim(0), di = x.dim(1), dout = w.dim(1);
  if (w.dim(0) != di || b.rank() != 1 || b.dim(0) != dout)
    throw std::invalid_argument("linear: got x" + shape_str(x.shape()) + " w" +
                                shape_str(w.shape()) + " b" + shape_str(b.shape()));
  Tensor out = make_node({n, dout}, {x, w, b}, [x, w, b, n, di, dout](detail::TensorImpl& self) {
    ECMap gy(self.grad.data(), n, dout);
    x.impl()->ensure_grad();
    w.impl()->ensure_grad();
    b.impl()->ensure_grad();
    EMap(x.impl()->grad.data(), n, di).noalias() +=
        gy * ECMap(w.data().data(), di, dout).transpose();
    EMap(w.impl()->grad.data(), di, dout).noalias() +=
        ECMap(x.data().data(), n, di).transpose() * gy;
    Eigen::Map<Eigen::Matrix<real_t, Eigen::Dynamic, 1>>(b.impl()->grad.data(), dout) +=
        gy.colwise().sum().transpose();
  });
  EMap y(out.data().data(), n, dout);
  y.noalias() = ECMap(x.data().data(), n, di) * ECMap(w.data().data(), di, dout);
  y.rowwise() += Eigen::Map<const Eigen::Matrix<real_t, 1, Eigen::Dynamic>>(b.data().data(), dout);
  return out;
}

// ---------------------------------------------------------------------------
// normalization / softmax

static std::vector<int64_t> strides_of(const std::vector<int>& shape) {
  std::vector<int64_t> st(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    st[i] = st[i + 1] * shape[i + 1];
  return st;
}

Tensor softmax(const Tensor& a, int axis) {
  if (axis < 0) axis += a.rank();
  if (axis < 0 || axis >= a.rank()) throw std::invalid_argument("softmax: bad axis");
  auto shape = a.shape();
  auto st = strides_of(shape);
  int64_t len = shape[axis], stride = st[axis];
  int64_t outer = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  int64_t inner = stride;
  int64_t block = len * stride;

  Tensor out = make_node(shape, {a}, [a, outer, inner, block, len, stride](detail::TensorImpl& self) {
    a.impl()->ensure_grad();
    const auto& y = *self.data;
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t in = 0; in < inner; ++in) {
        int64_t base = o * block + in;
        real_t dot = 0;
        for (int64_t j = 0; j < len; ++j) {
          int64_t idx = base + j * stride;
          dot += self.grad[idx] * y[idx];
        }
        for (int64_t j = 0; j < len; ++j) {
          int64_t idx = base + j * stride;
          a.impl()->grad[idx] += y[idx] * (self.grad[idx] - dot);
        }
      }
  });
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t in = 0; in < inner; ++in) {
      int64_t base = o * block + in;
      real_t mx = -std::numeric_limits<real_t>::infinity();
      for (int64_t j = 0; j < len; ++j) mx = std::max(mx, a.data()[base + j * stride]);
      real_t z = 0;
      for (int64_t j = 0; j < len; ++j) {
        real_t e = std::exp(a.data()[base + j * stride] - mx);
        out.data()[base + j * stride] = e;
        z += e;
      }
      real_t inv = real_t(1) / z;
      for (int64_t j = 0; j < len; ++j) out.data()[base + j * stride] *= inv;
    }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, real_t eps) {
  int d = x.shape().back();
  if (gamma.rank() != 1 || gamma.dim(0) != d || beta.rank() != 1 || beta.dim(0) != d)
    throw std::invalid_argument("layer_norm: gain/shift must be [" + std::to_string(d) + "]");
  int64_t rows = x.numel() / d;
  Tensor out = make_node(x.shape(), {x, gamma, beta}, [x, gamma, beta, rows, d,
                                                       eps](detail::TensorImpl& self) {
    x.impl()->ensure_grad();
    gamma.impl()->ensure_grad();
    beta.impl()->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const real_t* xi = x.data().data() + r * d;
      const real_t* go = self.grad.data() + r * d;
      real_t mean = 0, var = 0;
      for (int i = 0; i < d; ++i) mean += xi[i];
      mean /= d;
      for (int i = 0; i < d; ++i) var += (xi[i] - mean) * (xi[i] - mean);
      var /= d;
      real_t inv = real_t(1) / std::sqrt(var + eps);
      // dL/dxhat, plus reductions for the mean/var terms
      real_t sum_gxh = 0, sum_gxh_xh = 0;
      for (int i = 0; i < d; ++i) {
        real_t xh = (xi[i] - mean) * inv;
        real_t g = go[i] * gamma.data()[i];
        sum_gxh += g;
        sum_gxh_xh += g * xh;
        gamma.impl()->grad[i] += go[i] * xh;
        beta.impl()->grad[i] += go[i];
      }
      for (int i = 0; i < d; ++i) {
        real_t xh = (xi[i] - mean) * inv;
        real_t g = go[i] * gamma.data()[i];
        x.impl()->grad[r * d + i] += inv * (g - sum_gxh / d - xh * sum_gxh_xh / d);
      }
    }
  });
  for (int64_t r = 0; r < rows; ++r) {
    const real_t* xi = x.data().data() + r * d;
    real_t* yo = out.data().data() + r * d;
    real_t mean = 0, var = 0;
    for (int i = 0; i < d; ++i) mean += xi[i];
    mean /= d;
    for (int i = 0; i < d; ++i) var += (xi[i] - mean) * (xi[i] - mean);
    var /= d;
    real_t inv = real_t(1) / std::sqrt(var + eps);
    for (int i = 0; i < d; ++i)
      yo[i] = (xi[i] - mean) * inv * gamma.data()[i] + beta.data()[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// convolution / pooling

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int pad) {
  if (input.rank() != 3 || weight.rank() != 4)
    throw std::invalid_argument("conv2d: input [c,h,w], weight [co,ci,kh,kw]");
  int ci = input.dim(0), h = input.dim(1), w = input.dim(2);
  int co = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != ci) throw std::invalid_argument("conv2d: channel mismatch");
  if (bias.rank() != 1 || bias.dim(0) != co) throw std::invalid_argument("conv2d: bias [co]");
  int ho = (h + 2 * pad - kh) / stride + 1;
  int wo = (w + 2 * pad - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv2d: empty output");

  const int cols = ho * wo, rows = ci * kh * kw;
  // im2col built in forward and rebuilt in backward; trades memory for clarity.
  auto build_col = [=](const std::vector<real_t>& in, std::vector<real_t>& col) {
    col.assign(static_cast<size_t>(rows) * cols, real_t(0));
    for (int c = 0; c < ci; ++c)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          real_t* dst = col.data() + (static_cast<int64_t>(c) * kh * kw + ky * kw + kx) * cols;
          for (int oy = 0; oy < ho; ++oy) {
            int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            const real_t* src = in.data() + (static_cast<int64_t>(c) * h + iy) * w;
            for (int ox = 0; ox < wo; ++ox) {
              int ix = ox * stride + kx - pad;
              if (ix >= 0 && ix < w) dst[oy * wo + ox] = src[ix];
            }
          }
        }
  };

  Tensor out = make_node({co, ho, wo}, {input, weight, bias}, [=](detail::TensorImpl& self) {
    input.impl()->ensure_grad();
    weight.impl()->ensure_grad();
    bias.impl()->ensure_grad();
    std::vector<real_t> col;
    build_col(input.data(), col);
    ECMap gy(self.grad.data(), co, cols);
    // dW = gy * col^T ; db = row sums ; dcol = W^T * gy
    EMap(weight.impl()->grad.data(), co, rows).noalias() +=
        gy * ECMap(col.data(), rows, cols).transpose();
    for (int c = 0; c < co; ++c) bias.impl()->grad[c] += gy.row(c).sum();
    EMat dcol = ECMap(weight.data().data(), co, rows).transpose() * gy;
    // col2im scatter
    for (int c = 0; c < ci; ++c)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          const real_t* src = dcol.data() + (static_cast<int64_t>(c) * kh * kw + ky * kw + kx) * cols;
          for (int oy = 0; oy < ho; ++oy) {
            int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            real_t* dst = input.impl()->grad.data() + (static_cast<int64_t>(c) * h + iy) * w;
            for (int ox = 0; ox < wo; ++ox) {
              int ix = ox * stride + kx - pad;
              if (ix >= 0 && ix < w) dst[ix] += src[oy * wo + ox];
            }
          }
        }
  });
  std::vector<real_t> col;
  build_col(input.data(), col);
  EMap y(out.data().data(), co, cols);
  y.noalias() = ECMap(weight.data().data(), co, rows) * ECMap(col.data(), rows, cols);
  for (int c = 0; c < co; ++c) y.row(c).array() += bias.data()[c];
  return out;
}

Tensor mean_pool2d(const Tensor& input, int k) {
  if (input.rank() != 3) throw std::invalid_argument("mean_pool2d: input [c,h,w]");
  int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % k || w % k) throw std::invalid_argument("mean_pool2d: size not divisible by kernel");
  int ho = h / k, wo = w / k;
  real_t inv = real_t(1) / real_t(k * k);
  Tensor out = make_node({c, ho, wo}, {input}, [=](detail::TensorImpl& self) {
    input.impl()->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          real_t g = self.grad[(static_cast<int64_t>(ch) * ho + oy) * wo + ox] * inv;
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx)
              input.impl()->grad[(static_cast<int64_t>(ch) * h + oy * k + dy) * w + ox * k + dx] += g;
        }
  });
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        real_t s = 0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            s += input.data()[(static_cast<int64_t>(ch) * h + oy * k + dy) * w + ox * k + dx];
        out.data()[(static_cast<int64_t>(ch) * ho + oy) * wo + ox] = s * inv;
      }
  return out;
}

Tensor max_pool2d(const Tensor& input, int k) {
  if (input.rank() != 3) throw std::invalid_argument("max_pool2d: input [c,h,w]");
  int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % k || w % k) throw std::invalid_argument("max_pool2d: size not divisible by kernel");
  int ho = h / k, wo = w / k;
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(c) * ho * wo);
  Tensor out = make_node({c, ho, wo}, {input}, [=](detail::TensorImpl& self) {
    input.impl()->ensure_grad();
    for (size_t i = 0; i < argmax->size(); ++i)
      input.impl()->grad[(*argmax)[i]] += self.grad[i];
  });
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        real_t best = -std::numeric_limits<real_t>::infinity();
        int64_t bi = 0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx) {
            int64_t idx = (static_cast<int64_t>(ch) * h + oy * k + dy) * w + ox * k + dx;
            if (input.data()[idx] > best) {
              best = input.data()[idx];
              bi = idx;
            }
          }
        int64_t oidx = (static_cast<int64_t>(ch) * ho + oy) * wo + ox;
        out.data()[oidx] = best;
        (*argmax)[oidx] = bi;
      }
  return out;
}

// ---------------------------------------------------------------------------
// shape ops

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  int rank = parts[0].rank();
  if (axis < 0) axis += rank;
  auto shape = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank) throw std::invalid_argument("concat: rank mismatch");
    for (int i = 0; i < rank; ++i)
      if (i != axis && p.dim(i) != shape[i])
        throw std::invalid_argument("concat: shape mismatch off-axis");
    total += p.dim(axis);
  }
  shape[axis] = total;
  auto st = strides_of(shape);
  int64_t outer = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  int64_t inner = st[axis];

  Tensor out = make_node(shape, parts, [parts, axis, outer, inner](detail::TensorImpl& self) {
    int64_t off = 0;
    int64_t block_out = 0;
    for (const auto& p : parts) block_out += static_cast<int64_t>(p.dim(axis)) * inner;
    for (const auto& p : parts) {
      p.impl()->ensure_grad();
      int64_t blk = static_cast<int64_t>(p.dim(axis)) * inner;
      for (int64_t o = 0; o < outer; ++o) {
        const real_t* src = self.grad.data() + o * block_out + off;
        real_t* dst = p.impl()->grad.data() + o * blk;
        for (int64_t i = 0; i < blk; ++i) dst[i] += src[i];
      }
      off += blk;
    }
  });
  int64_t off = 0;
  int64_t block_out = static_cast<int64_t>(total) * inner;
  for (const auto& p : parts) {
    int64_t blk = static_cast<int64_t>(p.dim(axis)) * inner;
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(out.data().data() + o * block_out + off, p.data().data() + o * blk,
                  blk * sizeof(real_t));
    off += blk;
  }
  return out;
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  int rank = a.rank();
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw std::invalid_argument("slice: bad axis");
  if (start < 0 || len < 0 || start + len > a.dim(axis))
    throw std::invalid_argument("slice: out of range");
  auto shape = a.shape();
  auto st = strides_of(shape);
  int64_t inner = st[axis];
  int64_t outer = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  int64_t in_block = static_cast<int64_t>(shape[axis]) * inner;
  int64_t out_block = static_cast<int64_t>(len) * inner;
  shape[axis] = len;

  Tensor out = make_node(shape, {a}, [a, outer, inner, in_block, out_block, start](detail::TensorImpl& self) {
    a.impl()->ensure_grad();
    for (int64_t o = 0; o < outer; ++o) {
      real_t* dst = a.impl()->grad.data() + o * in_block + start * inner;
      const real_t* src = self.grad.data() + o * out_block;
      for (int64_t i = 0; i < out_block; ++i) dst[i] += src[i];
    }
  });
  for (int64_t o = 0; o < outer; ++o)
    std::memcpy(out.data().data() + o * out_block, a.data().data() + o * in_block + start * inner,
                out_block * sizeof(real_t));
  return out;
}

Tensor permute(const Tensor& a, const std::vector<int>& dims) {
  int rank = a.rank();
  if (static_cast<int>(dims.size()) != rank) throw std::invalid_argument("permute: rank mismatch");
  std::vector<int> seen(rank, 0), shape(rank);
  for (int i = 0; i < rank; ++i) {
    if (dims[i] < 0 || dims[i] >= rank || seen[dims[i]]++)
      throw std::invalid_argument("permute: bad dims");
    shape[i] = a.dim(dims[i]);
  }
  auto in_st = strides_of(a.shape());
  auto out_st = strides_of(shape);
  int64_t n = a.numel();

  // out[i0,...] = in at the permuted index; per-output-axis input strides.
  std::vector<int64_t> gather(rank);
  for (int i = 0; i < rank; ++i) gather[i] = in_st[dims[i]];

  Tensor out = make_node(shape, {a}, [a, out_st_ = out_st, gather, n, rank](detail::TensorImpl& self) {
    a.impl()->ensure_grad();
    for (int64_t o = 0; o < n; ++o) {
      int64_t rem = o, src = 0;
      for (int i = 0; i < rank; ++i) {
        int64_t q = rem / out_st_[i];
        rem -= q * out_st_[i];
        src += q * gather[i];
      }
      a.impl()->grad[src] += self.grad[o];
    }
  });
  for (int64_t o = 0; o < n; ++o) {
    int64_t rem = o, src = 0;
    for (int i = 0; i < rank; ++i) {
      int64_t q = rem / out_st[i];
      rem -= q * out_st[i];
      src += q * gather[i];
    }
    out.data()[o] = a.data()[src];
  }
  return out;
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (shape_numel(shape) != a.numel())
    throw std::invalid_argument("reshape: numel mismatch " + shape_str(a.shape()) + " -> " +
                                shape_str(shape));
  // Shares the data buffer; only the grad pass copies.
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = a.impl_ptr()->data;
  impl->node_id = detail::next_node_id();
  if (detail::grad_enabled() &&
      (a.requires_grad() || a.impl()->backward_fn || !a.impl()->parents.empty())) {
    impl->parents.push_back(a.impl_ptr());
    impl->backward_fn = [a](detail::TensorImpl& self) {
      a.impl()->ensure_grad();
      for (int64_t i = 0; i < a.numel(); ++i) a.impl()->grad[i] += self.grad[i];
    };
  }
  return Tensor(impl);
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  check_matrix(table, "embedding");
  int v = table.dim(0), d = table.dim(1);
  for (int id : ids)
    if (id < 0 || id >= v)
      throw std::out_of_range("embedding: id " + std::to_string(id) + " outside [0," +
                              std::to_string(v) + ")");
  int n = static_cast<int>(ids.size());
  Tensor out = make_node({n, d}, {table}, [table, ids, d](detail::TensorImpl& self) {
    table.impl()->ensure_grad();
    for (size_t r = 0; r < ids.size(); ++r) {
      real_t* dst = table.impl()->grad.data() + static_cast<int64_t>(ids[r]) * d;
      const real_t* src = self.grad.data() + r * d;
      for (int i = 0; i < d; ++i) dst[i] += src[i];
    }
  });
  for (size_t r = 0; r < ids.size(); ++r)
    std::memcpy(out.data().data() + r * d, table.data().data() + static_cast<int64_t>(ids[r]) * d,
                d * sizeof(real_t));
  return out;
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& a) {
  Tensor out = make_node({1}, {a}, [a](detail::TensorImpl& self) {
    a.impl()->ensure_grad();
    for (int64_t i = 0; i < a.numel(); ++i) a.impl()->grad[i] += self.grad[0];
  });
  real_t s = 0;
  for (int64_t i = 0; i < a.numel(); ++i) s += a.data()[i];
  out.data()[0] = s;
  return out;
}

Tensor mean(const Tensor& a) {
  real_t inv = real_t(1) / real_t(a.numel());
  Tensor out = make_node({1}, {a}, [a, inv](detail::TensorImpl& self) {
    a.impl()->ensure_grad();
    for (int64_t i = 0; i < a.numel(); ++i) a.impl()->grad[i] += self.grad[0] * inv;
  });
  real_t s = 0;
  for (int64_t i = 0; i < a.numel(); ++i) s += a.data()[i];
  out.data()[0] = s * inv;
  return out;
}

Tensor sum_axis(const Tensor& a, int axis) {
  int rank = a.rank();
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw std::invalid_argument("sum_axis: bad axis");
  auto shape = a.shape();
  auto st = strides_of(shape);
  int64_t len = shape[axis], stride = st[axis];
  int64_t outer = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  int64_t block = len * stride;
  std::vector<int> out_shape;
  for (int i = 0; i < rank; ++i)
    if (i != axis) out_shape.push_back(shape[i]);
  if (out_shape.empty()) out_shape.push_back(1);

  Tensor out = make_node(out_shape, {a}, [a, outer, stride, len, block](detail::TensorImpl& self) {
    a.impl()->ensure_grad();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t in = 0; in < stride; ++in) {
        real_t g = self.grad[o * stride + in];
        for (int64_t j = 0; j < len; ++j)
          a.impl()->grad[o * block + j * stride + in] += g;
      }
  });
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t in = 0; in < stride; ++in) {
      real_t s = 0;
      for (int64_t j = 0; j < len; ++j) s += a.data()[o * block + j * stride + in];
      out.data()[o * stride + in] = s;
    }
  return out;
}

Tensor mse(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse");
  real_t inv = real_t(1) / real_t(a.numel());
  Tensor out = make_node({1}, {a, b}, [a, b, inv](detail::TensorImpl& self) {
    a.impl()->ensure_grad();
    b.impl()->ensure_grad();
    real_t g = self.grad[0] * inv * real_t(2);
    for (int64_t i = 0; i < a.numel(); ++i) {
      real_t d = a.data()[i] - b.data()[i];
      a.impl()->grad[i] += g * d;
      b.impl()->grad[i] -= g * d;
    }
  });
  real_t s = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    real_t d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  out.data()[0] = s * inv;
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
  Tensor l2 = logits.rank() == 1 ? reshape(logits, {1, logits.dim(0)}) : logits;
  check_matrix(l2, "cross_entropy");
  int n = l2.dim(0), k = l2.dim(1);
  if (static_cast<int>(targets.size()) != n)
    throw std::invalid_argument("cross_entropy: targets size mismatch");
  for (int t : targets)
    if (t < 0 || t >= k) throw std::out_of_range("cross_entropy: target outside logit range");
  real_t inv = real_t(1) / real_t(n);
  Tensor out = make_node({1}, {l2}, [l2, targets, n, k, inv](detail::TensorImpl& self) {
    l2.impl()->ensure_grad();
    real_t g = self.grad[0] * inv;
    for (int r = 0; r < n; ++r) {
      const real_t* row = l2.data().data() + static_cast<int64_t>(r) * k;
      real_t mx = row[0];
      for (int i = 1; i < k; ++i) mx = std::max(mx, row[i]);
      real_t z = 0;
      for (int i = 0; i < k; ++i) z += std::exp(row[i] - mx);
      for (int i = 0; i < k; ++i) {
        real_t p = std::exp(row[i] - mx) / z;
        l2.impl()->grad[static_cast<int64_t>(r) * k + i] +=
            g * (p - (i == targets[r] ? real_t(1) : real_t(0)));
      }
    }
  });
  real_t loss = 0;
  for (int r = 0; r < n; ++r) {
    const real_t* row = l2.data().data() + static_cast<int64_t>(r) * k;
    real_t mx = row[0];
    for (int i = 1; i < k; ++i) mx = std::max(mx, row[i]);
    real_t z = 0;
    for (int i = 0; i < k; ++i) z += std::exp(row[i] - mx);
    loss += std::log(z) - (row[targets[r]] - mx);
  }
  out.data()[0] = loss * inv;
  return out;
}

}  // namespace ops
}  // namespace svla
