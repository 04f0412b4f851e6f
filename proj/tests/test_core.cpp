#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support/testing.hpp"
#include "vamark/core/checkpoint.hpp"
#include "vamark/core/graph.hpp"
#include "vamark/core/kernels.hpp"
#include "vamark/core/params.hpp"
#include "vamark/core/tensor.hpp"

using namespace vamark;

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK_THROWS(t.reshaped({5, 5}));
  Tensor r = t.reshaped({6, 4});
  CHECK(r.dim(0) == 6);
  CHECK_THROWS(Tensor({2, 2}, std::vector<float>{1.0f, 2.0f, 3.0f}));
}

TEST_CASE("gemm parallel variants match serial reference") {
  std::mt19937_64 rng(11);
  const int M = 17, N = 23, K = 9;
  auto A = testing::random_tensor<float>({M, K}, rng);
  auto B = testing::random_tensor<float>({K, N}, rng);
  auto Bt = testing::random_tensor<float>({N, K}, rng);
  auto At = testing::random_tensor<float>({K, M}, rng);

  Tensor c_ref({M, N}), c_par({M, N});
  kernels::ref::gemm_nn(A.data(), B.data(), c_ref.data(), M, N, K);
  kernels::par::gemm_nn(A.data(), B.data(), c_par.data(), M, N, K);
  CHECK(max_abs_diff(c_ref, c_par) < 1e-5f);

  kernels::ref::gemm_nt(A.data(), Bt.data(), c_ref.data(), M, N, K);
  kernels::par::gemm_nt(A.data(), Bt.data(), c_par.data(), M, N, K);
  CHECK(max_abs_diff(c_ref, c_par) < 1e-5f);

  kernels::ref::gemm_tn(At.data(), B.data(), c_ref.data(), M, N, K);
  kernels::par::gemm_tn(At.data(), B.data(), c_par.data(), M, N, K);
  CHECK(max_abs_diff(c_ref, c_par) < 1e-5f);
}

TEST_CASE("attention kernel matches serial double-loop reference") {
  std::mt19937_64 rng(5);
  const int P = 37, Pk = 29, D = 7;
  auto Q = testing::random_tensor<float>({P, D}, rng);
  auto K = testing::random_tensor<float>({Pk, D}, rng);
  auto V = testing::random_tensor<float>({Pk, D}, rng);
  Tensor o_ref({P, D}), o_fast({P, D});
  kernels::ref::attention_forward(Q.data(), K.data(), V.data(), o_ref.data(), P, Pk, D, D);
  kernels::attention_forward(Q.data(), K.data(), V.data(), o_fast.data(), P, Pk, D, D);
  CHECK(max_abs_diff(o_ref, o_fast) < 1e-5f);
}

TEST_CASE("im2col/col2im adjoint identity") {
  // <col2im(c), x> == <c, im2col(x)> for random c, x
  std::mt19937_64 rng(3);
  kernels::ConvGeom g{3, 6, 5, 3, 3, 2, 1};
  auto x = testing::random_tensor<double>({g.C, g.H, g.W}, rng);
  auto c = testing::random_tensor<double>({g.Ho() * g.Wo(), g.cols()}, rng);
  TensorD colx({g.Ho() * g.Wo(), g.cols()});
  kernels::im2col(x.data(), g, colx.data());
  TensorD xc({g.C, g.H, g.W});
  kernels::col2im(c.data(), g, xc.data(), false);
  double lhs = 0, rhs = 0;
  for (std::int64_t i = 0; i < xc.numel(); ++i) lhs += xc[i] * x[i];
  for (std::int64_t i = 0; i < c.numel(); ++i) rhs += c[i] * colx[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("graph: conv2d gradients match finite differences") {
  std::mt19937_64 rng(17);
  auto x0 = testing::random_tensor<double>({1, 2, 4, 4}, rng);
  auto w0 = testing::random_tensor<double>({3, 2, 3, 3}, rng, -0.5, 0.5);
  auto b0 = testing::random_tensor<double>({3}, rng, -0.1, 0.1);
  auto fn = [](const std::vector<TensorD>& in, std::vector<TensorD>* grads) {
    GraphD g;
    Var x = g.leaf(in[0]), w = g.leaf(in[1]), b = g.leaf(in[2]);
    Var y = g.conv2d(x, w, b, 1, 1);
    Var t = g.constant(TensorD(g.val(y).shape(), 0.3));
    Var loss = g.mse(y, t);
    if (grads) {
      g.backward(loss);
      *grads = {g.grad(x), g.grad(w), g.grad(b)};
    }
    return static_cast<double>(g.val(loss)[0]);
  };
  auto res = testing::grad_check(fn, {x0, w0, b0});
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("graph: attention gradients match finite differences") {
  std::mt19937_64 rng(23);
  auto q0 = testing::random_tensor<double>({1, 2, 2, 3}, rng);
  auto k0 = testing::random_tensor<double>({1, 2, 2, 3}, rng);
  auto v0 = testing::random_tensor<double>({1, 2, 2, 3}, rng);
  auto fn = [](const std::vector<TensorD>& in, std::vector<TensorD>* grads) {
    GraphD g;
    Var q = g.leaf(in[0]), k = g.leaf(in[1]), v = g.leaf(in[2]);
    Var y = g.attention_nchw(q, k, v);
    Var t = g.constant(TensorD(g.val(y).shape(), -0.2));
    Var loss = g.mse(y, t);
    if (grads) {
      g.backward(loss);
      *grads = {g.grad(q), g.grad(k), g.grad(v)};
    }
    return static_cast<double>(g.val(loss)[0]);
  };
  auto res = testing::grad_check(fn, {q0, k0, v0});
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("graph: layernorm/dense/gap/softmax gradients") {
  std::mt19937_64 rng(29);
  auto x0 = testing::random_tensor<double>({2, 3, 2, 2}, rng);
  auto g0 = testing::random_tensor<double>({3}, rng, 0.5, 1.5);
  auto b0 = testing::random_tensor<double>({3}, rng, -0.2, 0.2);
  auto w0 = testing::random_tensor<double>({4, 3}, rng, -0.5, 0.5);
  auto bb0 = testing::random_tensor<double>({4}, rng, -0.2, 0.2);
  auto fn = [](const std::vector<TensorD>& in, std::vector<TensorD>* grads) {
    GraphD g;
    Var x = g.leaf(in[0]), ga = g.leaf(in[1]), be = g.leaf(in[2]), w = g.leaf(in[3]), b = g.leaf(in[4]);
    Var y = g.layernorm_channels(x, ga, be);
    Var pooled = g.gap(y);
    Var d = g.dense(pooled, w, b);
    Var sm = g.softmax_rows(d);
    Var t = g.constant(TensorD(g.val(sm).shape(), 0.25));
    Var loss = g.mse(sm, t);
    if (grads) {
      g.backward(loss);
      *grads = {g.grad(x), g.grad(ga), g.grad(be), g.grad(w), g.grad(b)};
    }
    return static_cast<double>(g.val(loss)[0]);
  };
  auto res = testing::grad_check(fn, {x0, g0, b0, w0, bb0});
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("graph: pooling, resize, concat, slice, mix gradients") {
  std::mt19937_64 rng(31);
  auto x0 = testing::random_tensor<double>({1, 2, 4, 4}, rng);
  auto p0 = testing::random_tensor<double>({2, 2, 2, 2}, rng);
  auto w0 = testing::random_tensor<double>({1, 2}, rng);
  auto fn = [](const std::vector<TensorD>& in, std::vector<TensorD>* grads) {
    GraphD g;
    Var x = g.leaf(in[0]), pool = g.leaf(in[1]), wts = g.leaf(in[2]);
    Var down = g.avgpool2(x);
    Var up = g.upsample_nearest(down, 2, 2);
    Var mixed = g.mix_pool(g.softmax_rows(wts), pool);
    Var big = g.resize_bilinear(mixed, 4, 4);
    Var cat = g.concat_channels({up, big});
    Var sl = g.slice_channels(cat, 1, 3);
    Var t = g.constant(TensorD(g.val(sl).shape(), 0.1));
    Var loss = g.mse(sl, t);
    if (grads) {
      g.backward(loss);
      *grads = {g.grad(x), g.grad(pool), g.grad(wts)};
    }
    return static_cast<double>(g.val(loss)[0]);
  };
  auto res = testing::grad_check(fn, {x0, p0, w0});
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("adam converges on a quadratic") {
  ParamSet<float> params;
  Param<float>& p = params.add("x", Tensor({4}, {4.0f, -3.0f, 2.0f, -1.0f}));
  Adam<float> opt(AdamConfig{0.05, 0.9, 0.999, 1e-8});
  for (int step = 0; step < 400; ++step) {
    GraphF g;
    Binding<float> bind(g);
    Var x = bind.bind(p);
    Var loss = g.mse(x, g.constant(Tensor({4}, 0.0f)));
    g.backward(loss);
    opt.step(bind, 0.05);
  }
  for (int i = 0; i < 4; ++i) CHECK(std::abs(p.value[i]) < 1e-2f);
}

TEST_CASE("lr schedule halves at the configured interval") {
  CHECK(scheduled_lr(1e-4, 0, 30000) == doctest::Approx(1e-4));
  CHECK(scheduled_lr(1e-4, 29999, 30000) == doctest::Approx(1e-4));
  CHECK(scheduled_lr(1e-4, 30000, 30000) == doctest::Approx(5e-5));
  CHECK(scheduled_lr(1e-4, 60000, 30000) == doctest::Approx(2.5e-5));
}

TEST_CASE("checkpoint round trip with named arrays and version field") {
  std::mt19937_64 rng(41);
  auto t = testing::random_tensor<float>({3, 2, 2}, rng);
  CheckpointWriter w;
  w.put("module.weight", t);
  w.put_scalar("format_extra", 2.0);
  const std::string path = "ckpt_roundtrip_test.bin";
  w.save(path);
  CheckpointReader r(path);
  CHECK(r.has("module.weight"));
  CHECK(max_abs_diff(r.get("module.weight"), t) == 0.0f);
  CHECK(r.get_scalar("format_extra") == doctest::Approx(2.0));
  std::remove(path.c_str());
  CHECK_THROWS(CheckpointReader("does_not_exist.bin"));
}
