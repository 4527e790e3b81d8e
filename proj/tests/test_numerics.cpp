#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "svla/ops.hpp"
#include "svla/optim.hpp"
#include "svla/serialize.hpp"

using namespace svla;

namespace {

// Independent conv oracle: direct triple loop, no im2col.
std::vector<real_t> conv2d_naive(const std::vector<real_t>& x, int ci, int h, int w,
                                 const std::vector<real_t>& wt, int co, int kh, int kw,
                                 const std::vector<real_t>& b, int stride, int pad) {
  int ho = (h + 2 * pad - kh) / stride + 1;
  int wo = (w + 2 * pad - kw) / stride + 1;
  std::vector<real_t> y(static_cast<size_t>(co) * ho * wo, real_t(0));
  for (int oc = 0; oc < co; ++oc)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        double acc = b[oc];
        for (int ic = 0; ic < ci; ++ic)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              int iy = oy * stride + ky - pad;
              int ix = ox * stride + kx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += double(x[(static_cast<size_t>(ic) * h + iy) * w + ix]) *
                     double(wt[((static_cast<size_t>(oc) * ci + ic) * kh + ky) * kw + kx]);
            }
        y[(static_cast<size_t>(oc) * ho + oy) * wo + ox] = real_t(acc);
      }
  return y;
}

}  // namespace

TEST_CASE("square function gradient at x=3 is 6") {
  Tensor x = Tensor::scalar(real_t(3), true);
  Tensor y = ops::mul(x, x);
  y.backward();
  CHECK(y.item() == doctest::Approx(9.0));
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("sum of elementwise square at (1,2) has gradient (2,4)") {
  Tensor x = Tensor::from_data({2}, {real_t(1), real_t(2)}, true);
  Tensor y = ops::sum(ops::mul(x, x));
  y.backward();
  CHECK(y.item() == doctest::Approx(5.0));
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("softmax rows sum to one and sum-of-softmax has vanishing gradient") {
  Rng rng(7);
  Tensor z = Tensor::randn({4, 9}, rng, real_t(2), true);
  Tensor p = ops::softmax(z, 1);
  for (int r = 0; r < 4; ++r) {
    double s = 0;
    for (int c = 0; c < 9; ++c) {
      double v = p.data()[r * 9 + c];
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  Tensor total = ops::sum(p);
  total.backward();
  for (auto g : z.grad()) CHECK(std::abs(double(g)) < 1e-5);
}

TEST_CASE("matmul matches hand-computed product") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({2, 2}, {5, 6, 7, 8});
  Tensor c = ops::matmul(a, b);
  CHECK(c.data()[0] == doctest::Approx(19));
  CHECK(c.data()[1] == doctest::Approx(22));
  CHECK(c.data()[2] == doctest::Approx(43));
  CHECK(c.data()[3] == doctest::Approx(50));
}

TEST_CASE("linear equals matmul plus bias broadcast") {
  Rng rng(11);
  Tensor x = Tensor::randn({5, 3}, rng);
  Tensor w = Tensor::randn({3, 4}, rng);
  Tensor b = Tensor::from_data({4}, {real_t(0.5), real_t(-1), real_t(2), real_t(0)});
  Tensor y = ops::linear(x, w, b);
  Tensor y2 = ops::matmul(x, w);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(double(y.data()[r * 4 + c]) ==
            doctest::Approx(double(y2.data()[r * 4 + c]) + double(b.data()[c])).epsilon(1e-5));
}

TEST_CASE("conv2d matches direct-loop oracle") {
  Rng rng(23);
  for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{4, 0}}) {
    int ci = 3, h = 8, w = 8, co = 4, k = 3;
    if (stride == 4) k = 4;
    Tensor x = Tensor::randn({ci, h, w}, rng);
    Tensor wt = Tensor::randn({co, ci, k, k}, rng, real_t(0.5));
    Tensor b = Tensor::randn({co}, rng);
    Tensor y = ops::conv2d(x, wt, b, stride, pad);
    auto ref = conv2d_naive(x.data(), ci, h, w, wt.data(), co, k, k, b.data(), stride, pad);
    REQUIRE(y.numel() == static_cast<int64_t>(ref.size()));
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(double(y.data()[i]) == doctest::Approx(double(ref[i])).epsilon(1e-4));
  }
}

TEST_CASE("pooling on a hand case") {
  Tensor x = Tensor::from_data({1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  Tensor m = ops::mean_pool2d(x, 2);
  Tensor mx = ops::max_pool2d(x, 2);
  REQUIRE(m.shape() == std::vector<int>{1, 1, 2});
  CHECK(m.data()[0] == doctest::Approx(3.5));   // mean(1,2,5,6)
  CHECK(m.data()[1] == doctest::Approx(5.5));   // mean(3,4,7,8)
  CHECK(mx.data()[0] == doctest::Approx(6));
  CHECK(mx.data()[1] == doctest::Approx(8));
}

TEST_CASE("layer_norm standardizes each row") {
  Rng rng(3);
  Tensor x = Tensor::randn({6, 16}, rng, real_t(3));
  Tensor gamma = Tensor::full({16}, real_t(1));
  Tensor beta = Tensor::zeros({16});
  Tensor y = ops::layer_norm(x, gamma, beta);
  for (int r = 0; r < 6; ++r) {
    double mu = 0, var = 0;
    for (int c = 0; c < 16; ++c) mu += y.data()[r * 16 + c];
    mu /= 16;
    for (int c = 0; c < 16; ++c) {
      double d = y.data()[r * 16 + c] - mu;
      var += d * d;
    }
    var /= 16;
    CHECK(std::abs(mu) < 1e-4);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("concat and slice invert each other") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({2, 3}, {5, 6, 7, 8, 9, 10});
  Tensor c = ops::concat({a, b}, 1);
  REQUIRE(c.shape() == std::vector<int>{2, 5});
  Tensor a2 = ops::slice(c, 1, 0, 2);
  Tensor b2 = ops::slice(c, 1, 2, 3);
  for (int i = 0; i < 4; ++i) CHECK(a2.data()[i] == a.data()[i]);
  for (int i = 0; i < 6; ++i) CHECK(b2.data()[i] == b.data()[i]);
}

TEST_CASE("permute round trip and reshape is zero-copy") {
  Rng rng(5);
  Tensor x = Tensor::randn({2, 3, 4}, rng);
  Tensor p = ops::permute(x, {2, 0, 1});
  REQUIRE(p.shape() == std::vector<int>{4, 2, 3});
  Tensor back = ops::permute(p, {1, 2, 0});
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(back.data()[i] == x.data()[i]);
  // Spot-check one transposed entry: x[1,2,3] == p[3,1,2].
  CHECK(p.data()[(3 * 2 + 1) * 3 + 2] == x.data()[(1 * 3 + 2) * 4 + 3]);

  Tensor r = ops::reshape(x, {6, 4});
  CHECK(&r.data() == &x.data());
}

TEST_CASE("embedding gathers rows") {
  Tensor table = Tensor::from_data({3, 2}, {10, 11, 20, 21, 30, 31});
  Tensor e = ops::embedding(table, {2, 0, 2});
  REQUIRE(e.shape() == std::vector<int>{3, 2});
  CHECK(e.data()[0] == 30);
  CHECK(e.data()[1] == 31);
  CHECK(e.data()[2] == 10);
  CHECK(e.data()[5] == 31);
}

TEST_CASE("cross entropy of uniform logits is log k") {
  Tensor logits = Tensor::zeros({4, 32});
  Tensor loss = ops::cross_entropy(logits, {0, 7, 31, 15});
  CHECK(loss.item() == doctest::Approx(std::log(32.0)).epsilon(1e-5));
}

TEST_CASE("adam leaves parameters untouched under zero gradient") {
  ParamRegistry reg;
  Tensor p = reg.add("p", Tensor::from_data({3}, {1, 2, 3}));
  OptimState opt;
  opt.init(reg);
  reg.zero_grad();
  adam_step(reg, opt);
  CHECK(p.data()[0] == real_t(1));
  CHECK(p.data()[1] == real_t(2));
  CHECK(p.data()[2] == real_t(3));
  CHECK(opt.step == 1);
}

TEST_CASE("adam first step under constant gradient moves by -lr sign(g)") {
  ParamRegistry reg;
  Tensor p = reg.add("p", Tensor::from_data({2}, {real_t(0.5), real_t(-0.25)}));
  OptimState opt;
  opt.lr = real_t(1e-3);
  opt.init(reg);
  Tensor loss = ops::sum(ops::mul(p, Tensor::from_data({2}, {1, -2})));
  loss.backward();  // grad = (1, -2)
  adam_step(reg, opt);
  CHECK(double(p.data()[0]) == doctest::Approx(0.5 - 1e-3).epsilon(1e-5));
  CHECK(double(p.data()[1]) == doctest::Approx(-0.25 + 1e-3).epsilon(1e-5));
}

TEST_CASE("adam descends a quadratic bowl") {
  ParamRegistry reg;
  Tensor p = reg.add("p", Tensor::from_data({2}, {real_t(0.5), real_t(-0.3)}));
  OptimState opt;
  opt.lr = real_t(0.01);
  opt.init(reg);
  double first = 0, mid = 0, last = 0;
  for (int i = 0; i < 200; ++i) {
    reg.zero_grad();
    Tensor loss = ops::sum(ops::mul(p, p));
    if (i == 0) first = loss.item();
    if (i == 100) mid = loss.item();
    last = loss.item();
    loss.backward();
    adam_step(reg, opt);
  }
  CHECK(mid < first);
  CHECK(last < mid);
  CHECK(last < 1e-2);
}

TEST_CASE("adam rejects non-finite gradients by name") {
  ParamRegistry reg;
  Tensor p = reg.add("layers.0.w", Tensor::from_data({1}, {1}));
  OptimState opt;
  opt.init(reg);
  Tensor bad = ops::mul(p, Tensor::scalar(std::numeric_limits<real_t>::quiet_NaN()));
  bad.backward();
  try {
    adam_step(reg, opt);
    FAIL("expected throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("layers.0.w") != std::string::npos);
  }
}

TEST_CASE("rng streams are deterministic and seed_combine separates streams") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 16; ++i) {
    double va = a.uniform(), vb = b.uniform();
    CHECK(va == vb);
    CHECK(va != c.uniform());
  }
  CHECK(seed_combine(1, 2) != seed_combine(2, 1));
  CHECK(seed_combine(1, 2, 3) != seed_combine(1, 3, 2));
}

TEST_CASE("checkpoint round trip is bit exact") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "svla_ser_test";
  fs::create_directories(dir);
  std::string path = (dir / "params.svla").string();

  Rng rng(99);
  std::vector<NamedArrayF32> arrays;
  arrays.push_back({"enc.w", {4, 3}, {}});
  arrays.push_back({"enc.b", {3}, {}});
  for (auto& a : arrays) {
    int64_t n = 1;
    for (int d : a.shape) n *= d;
    for (int64_t i = 0; i < n; ++i) a.data.push_back(float(rng.normal()));
  }
  write_param_file(path, arrays);
  auto back = read_param_file(path);
  REQUIRE(back.size() == arrays.size());
  for (size_t i = 0; i < arrays.size(); ++i) {
    CHECK(back[i].name == arrays[i].name);
    CHECK(back[i].shape == arrays[i].shape);
    REQUIRE(back[i].data.size() == arrays[i].data.size());
    CHECK(std::memcmp(back[i].data.data(), arrays[i].data.data(),
                      arrays[i].data.size() * sizeof(float)) == 0);
  }

  SUBCASE("version mismatch is rejected") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    uint32_t bogus = 999;
    f.write(reinterpret_cast<const char*>(&bogus), 4);
    f.close();
    CHECK_THROWS_WITH_AS(read_param_file(path), doctest::Contains("version"),
                         std::runtime_error);
  }

  SUBCASE("truncation is rejected") {
    auto sz = fs::file_size(path);
    fs::resize_file(path, sz - 7);
    CHECK_THROWS_AS(read_param_file(path), std::runtime_error);
  }
}

TEST_CASE("blob container round trips u8 and i32 payloads") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "svla_ser_test";
  fs::create_directories(dir);
  std::string path = (dir / "ep.svlb").string();

  BlobArray img{"left_rgb", BlobDType::U8, {2, 3, 3}, {}, {}, {}};
  for (int i = 0; i < 18; ++i) img.u8.push_back(uint8_t(i * 13));
  BlobArray ids{"frame_ids", BlobDType::I32, {4}, {}, {}, {0, 1, 2, 9}};
  BlobArray act{"actions", BlobDType::F32, {2, 2}, {0.1f, -0.2f, 0.3f, 1.5f}, {}, {}};
  write_blob_file(path, {img, ids, act});
  auto back = read_blob_file(path);
  REQUIRE(back.size() == 3);
  CHECK(back[0].u8 == img.u8);
  CHECK(back[1].i32 == ids.i32);
  CHECK(back[2].f32 == act.f32);
  CHECK(back[0].shape == img.shape);
}

TEST_CASE("registry pack/unpack restores parameters and optimizer moments") {
  ParamRegistry reg;
  Rng rng(5);
  reg.add("a", Tensor::randn({2, 2}, rng));
  reg.add("b", Tensor::randn({3}, rng));
  OptimState opt;
  opt.init(reg);
  for (int i = 0; i < 3; ++i) {
    reg.zero_grad();
    Tensor loss = ops::sum(ops::mul(reg.get("a"), reg.get("a")));
    loss = ops::add(loss, ops::sum(ops::mul(reg.get("b"), reg.get("b"))));
    loss.backward();
    adam_step(reg, opt);
  }

  auto params = pack_params(reg);
  auto moments = pack_optim(reg, opt);

  ParamRegistry reg2;
  reg2.add("a", Tensor::zeros({2, 2}));
  reg2.add("b", Tensor::zeros({3}));
  OptimState opt2;
  unpack_params(params, reg2);
  unpack_optim(moments, reg2, opt2);

  CHECK(opt2.step == opt.step);
  for (size_t i = 0; i < reg.size(); ++i) {
    for (int64_t j = 0; j < reg.tensors()[i].numel(); ++j)
      CHECK(reg2.tensors()[i].data()[j] == reg.tensors()[i].data()[j]);
    CHECK(opt2.m[i] == opt.m[i]);
    CHECK(opt2.v[i] == opt.v[i]);
  }

  SUBCASE("shape mismatch is rejected") {
    ParamRegistry reg3;
    reg3.add("a", Tensor::zeros({2, 2}));
    reg3.add("b", Tensor::zeros({4}));
    CHECK_THROWS_AS(unpack_params(params, reg3), std::runtime_error);
  }
}
