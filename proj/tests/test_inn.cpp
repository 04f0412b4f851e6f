#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support/testing.hpp"
#include "vamark/inn/video_codec.hpp"

using namespace vamark;

namespace {

// Perturbation sized like trained weights: the subnet output layer stays
// small so the coupling scales do not saturate.
template <typename T>
void randomize_stack(CouplingStack<T>& stack, std::mt19937_64& rng, double scale = 0.05) {
  std::normal_distribution<double> d(0.0, scale);
  for (auto* p : stack.params().all())
    for (std::int64_t i = 0; i < p->value.numel(); ++i) p->value[i] += static_cast<T>(d(rng));
}

VideoCodecOptions small_opts(int blocks = 16, bool tafm = true, bool dpl = true) {
  VideoCodecOptions o;
  o.inn_blocks = blocks;
  o.inn_hidden = 8;
  o.rpm_hidden = 12;
  o.prompt_video = PromptShape{4, 4, 12, 2};
  o.use_tafm = tafm;
  o.use_dpl = dpl;
  return o;
}

}  // namespace

TEST_CASE("coupling stack: inverse of forward is the identity (init and perturbed)") {
  // The 1e-4 bijectivity bound is checked in the decode-path precision
  // (double); the float32 training path carries its own arithmetic noise and
  // gets a separate regression bound below.
  std::mt19937_64 rng(3);
  CouplingStack<double> stack(9, 8, 16, 5);
  for (int trial = 0; trial < 2; ++trial) {
    GraphD g;
    Binding<double> bind(g);
    Var a = g.constant(testing::random_tensor<double>({2, 9, 8, 8}, rng));
    Var b = g.constant(testing::random_tensor<double>({2, 9, 8, 8}, rng));
    auto [ao, bo] = stack.forward(g, bind, a, b);
    auto [ai, bi] = stack.inverse(g, bind, ao, bo);
    CHECK(max_abs_diff(g.val(ai), g.val(a)) <= 1e-4);
    CHECK(max_abs_diff(g.val(bi), g.val(b)) <= 1e-4);
    // identity at init: outputs equal inputs before perturbation
    if (trial == 0) {
      CHECK(max_abs_diff(g.val(ao), g.val(a)) == 0.0);
      CHECK(max_abs_diff(g.val(bo), g.val(b)) == 0.0);
    }
    randomize_stack(stack, rng);  // trained-like weights for the second round
  }
}

TEST_CASE("coupling stack: float32 training path stays within its noise bound") {
  std::mt19937_64 rng(3);
  CouplingStack<float> stack(9, 8, 16, 5);
  randomize_stack(stack, rng);
  GraphF g;
  Binding<float> bind(g);
  Var a = g.constant(testing::random_tensor<float>({2, 9, 8, 8}, rng));
  Var b = g.constant(testing::random_tensor<float>({2, 9, 8, 8}, rng));
  auto [ao, bo] = stack.forward(g, bind, a, b);
  auto [ai, bi] = stack.inverse(g, bind, ao, bo);
  CHECK(max_abs_diff(g.val(ai), g.val(a)) <= 1e-3f);
  CHECK(max_abs_diff(g.val(bi), g.val(b)) <= 1e-3f);
}

TEST_CASE("coupling stack: whole-stack output equals composing blocks one at a time") {
  std::mt19937_64 rng(7);
  CouplingStack<float> stack(9, 8, 16, 9);
  randomize_stack(stack, rng);
  GraphF g;
  Binding<float> bind(g);
  Var a = g.constant(testing::random_tensor<float>({1, 9, 8, 8}, rng));
  Var b = g.constant(testing::random_tensor<float>({1, 9, 8, 8}, rng));
  auto [ao, bo] = stack.forward(g, bind, a, b);
  Var a2 = a, b2 = b;
  for (int i = 0; i < stack.blocks(); ++i) std::tie(a2, b2) = stack.forward_block(g, bind, i, a2, b2);
  CHECK(max_abs_diff(g.val(ao), g.val(a2)) <= 1e-6f);
  CHECK(max_abs_diff(g.val(bo), g.val(b2)) <= 1e-6f);
}

TEST_CASE("coupling stack: determinism and shape errors") {
  std::mt19937_64 rng(11);
  CouplingStack<float> stack(9, 8, 4, 13);
  randomize_stack(stack, rng);
  Tensor a0 = testing::random_tensor<float>({1, 9, 4, 4}, rng);
  Tensor b0 = testing::random_tensor<float>({1, 9, 4, 4}, rng);
  Tensor first;
  for (int run = 0; run < 2; ++run) {
    GraphF g;
    Binding<float> bind(g);
    auto [ao, bo] = stack.forward(g, bind, g.constant(a0), g.constant(b0));
    (void)bo;
    if (run == 0)
      first = g.val(ao);
    else
      CHECK(max_abs_diff(first, g.val(ao)) == 0.0f);  // bit-identical
  }
  GraphF g;
  Binding<float> bind(g);
  CHECK_THROWS(stack.forward(g, bind, g.constant(Tensor({1, 9, 4, 4})), g.constant(Tensor({1, 9, 2, 2}))));
  CHECK_THROWS(stack.forward(g, bind, g.constant(Tensor({1, 6, 4, 4})), g.constant(Tensor({1, 6, 4, 4}))));
}

TEST_CASE("hide/reveal: shape contracts and exact round trip with the true by-product") {
  std::mt19937_64 rng(17);
  VideoCodec<double> codec(small_opts(8), 19);
  randomize_stack(codec.stack(), rng, 0.05);
  GraphD g;
  Binding<double> bind(g);
  Var cover = g.constant(testing::random_tensor<double>({2, 9, 8, 8}, rng, 0.0, 1.0));
  Var wm = g.constant(testing::random_tensor<double>({2, 9, 8, 8}, rng, 0.0, 1.0));
  auto hidden = codec.hide(g, bind, cover, wm);
  CHECK(g.val(hidden.i_med).shape() == Shape{2, 3, 8, 8});
  CHECK(g.val(hidden.z_v).shape() == Shape{2, 15, 8, 8});
  for (std::int64_t i = 0; i < g.val(hidden.z_v).numel(); ++i) CHECK(std::isfinite(g.val(hidden.z_v)[i]));

  // feeding back the exact forward outputs recovers the watermark center frame
  auto revealed = codec.reveal(g, bind, hidden.i_med, hidden.z_v);
  TensorD wm_center({2, 3, 8, 8});
  for (int n = 0; n < 2; ++n)
    std::copy(g.val(wm).data() + (n * 9 + 3) * 64, g.val(wm).data() + (n * 9 + 6) * 64, wm_center.data() + n * 3 * 64);
  CHECK(max_abs_diff(g.val(revealed.i_loc), wm_center) <= 1e-4);
}

TEST_CASE("predict_residual: shape contract and determinism") {
  std::mt19937_64 rng(23);
  VideoCodec<float> codec(small_opts(4), 29);
  Tensor frame = testing::random_tensor<float>({1, 3, 8, 8}, rng, 0.0, 1.0);
  Tensor triple({1, 9, 8, 8});
  for (int j = 0; j < 3; ++j) std::copy(frame.data(), frame.data() + frame.numel(), triple.data() + j * frame.numel());
  Tensor out1, out2;
  for (int run = 0; run < 2; ++run) {
    GraphF g;
    Binding<float> bind(g);
    Var z = codec.predict_residual(g, bind, g.constant(triple));
    (run == 0 ? out1 : out2) = g.val(z);
  }
  CHECK(out1.shape() == Shape{1, 15, 8, 8});
  CHECK(max_abs_diff(out1, out2) == 0.0f);
  GraphF g;
  Binding<float> bind(g);
  CHECK_THROWS(codec.predict_residual(g, bind, g.constant(Tensor({1, 3, 8, 8}))));
}

TEST_CASE("gradients flow through forward_hide to a scalar loss (4x4, toy)") {
  // finite differences on the hiding path: cover group leaf -> i_med loss
  VideoCodec<double> codec(small_opts(2), 31);
  std::mt19937_64 rng(37);
  randomize_stack(codec.stack(), rng, 0.05);
  auto cover0 = testing::random_tensor<double>({1, 9, 4, 4}, rng, 0.0, 1.0);
  auto wm0 = testing::random_tensor<double>({1, 9, 4, 4}, rng, 0.0, 1.0);
  auto fn = [&](const std::vector<TensorD>& in, std::vector<TensorD>* grads) {
    GraphD g;
    Binding<double> bind(g);
    Var cover = g.leaf(in[0]), wm = g.leaf(in[1]);
    auto hidden = codec.hide(g, bind, cover, wm);
    Var loss = g.weighted_sum({g.mse(hidden.i_med, g.constant(TensorD({1, 3, 4, 4}, 0.5))),
                               g.mse(hidden.z_v, g.constant(TensorD({1, 15, 4, 4}, 0.0)))},
                              {1.0, 0.1});
    if (grads) {
      g.backward(loss);
      *grads = {g.grad(cover), g.grad(wm)};
    }
    return g.val(loss)[0];
  };
  auto res = testing::grad_check(fn, {cover0, wm0}, 1e-4);
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("stack parameter gradients match finite differences on one subnet weight") {
  VideoCodec<double> codec(small_opts(2, /*tafm=*/false), 41);
  std::mt19937_64 rng(43);
  randomize_stack(codec.stack(), rng, 0.05);
  auto cover0 = testing::random_tensor<double>({1, 9, 4, 4}, rng, 0.0, 1.0);
  auto wm0 = testing::random_tensor<double>({1, 9, 4, 4}, rng, 0.0, 1.0);
  Param<double>& w = codec.stack().params().at("block0.w2");
  auto fn = [&](const std::vector<TensorD>& in, std::vector<TensorD>* grads) {
    w.value = in[0];
    GraphD g;
    Binding<double> bind(g);
    auto hidden = codec.hide(g, bind, g.constant(cover0), g.constant(wm0));
    auto revealed = codec.reveal(g, bind, hidden.i_med, codec.predict_residual(g, bind, g.constant(cover0)));
    Var loss = g.l1(revealed.i_loc, g.constant(TensorD({1, 3, 4, 4}, 0.25)));
    if (grads) {
      g.backward(loss);
      for (auto& [p, var] : bind.bound())
        if (p == &w) *grads = {g.grad(var)};
    }
    return g.val(loss)[0];
  };
  auto res = testing::grad_check(fn, {w.value}, 1e-4);
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("codec checkpoints round trip through the archive") {
  VideoCodec<float> codec(small_opts(3), 47);
  std::mt19937_64 rng(53);
  randomize_stack(codec.stack(), rng);
  CheckpointWriter w;
  codec.save(w, "video.");
  w.save("codec_ckpt_test.bin");
  VideoCodec<float> other(small_opts(3), 99);
  CheckpointReader r("codec_ckpt_test.bin");
  other.load(r, "video.");
  CHECK(max_abs_diff(other.stack().params().at("block0.w1").value, codec.stack().params().at("block0.w1").value) == 0.0f);
  std::remove("codec_ckpt_test.bin");
}
