#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support/testing.hpp"
#include "vamark/bits/bit_codec.hpp"
#include "vamark/bits/prompt.hpp"

using namespace vamark;

namespace {

BitCodecOptions small_opts(bool dpl = true) {
  BitCodecOptions o;
  o.payload_bits = 8;
  o.base_channels = 4;
  o.brm_channels = 8;
  o.prompt_bits = PromptShape{4, 4, 6, 3};
  o.use_dpl = dpl;
  return o;
}

}  // namespace

TEST_CASE("prompt_fuse: e=1 pool puts all weight on the single prompt") {
  PromptPool<double> pool(PromptShape{4, 4, 5, 1}, 6, 3);
  std::mt19937_64 rng(5);
  GraphD g;
  Binding<double> bind(g);
  Var f = g.constant(testing::random_tensor<double>({2, 6, 8, 8}, rng));
  auto fused = pool.fuse(g, bind, f);
  CHECK(g.val(fused.weights).shape() == Shape{2, 1});
  CHECK(g.val(fused.weights)[0] == doctest::Approx(1.0));
  CHECK(g.val(fused.weights)[1] == doctest::Approx(1.0));
  CHECK(g.val(fused.out).shape() == Shape{2, 6, 8, 8});
  // the mixed prompt equals the single pool entry for every sample
  const TensorD& pv = pool.params().at("pool").value;
  for (int n = 0; n < 2; ++n)
    for (std::int64_t i = 0; i < pv.numel(); ++i)
      CHECK(g.val(fused.prompt)[n * pv.numel() + i] == doctest::Approx(pv[i]).epsilon(1e-12));
}

TEST_CASE("prompt_fuse: weights are a softmax (nonnegative, sum to one)") {
  PromptPool<double> pool(PromptShape{4, 4, 3, 5}, 4, 7);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    GraphD g;
    Binding<double> bind(g);
    Var f = g.constant(testing::random_tensor<double>({3, 4, 6, 6}, rng, -2.0, 2.0));
    auto fused = pool.fuse(g, bind, f);
    for (int n = 0; n < 3; ++n) {
      double sum = 0.0;
      for (int e = 0; e < 5; ++e) {
        const double w = g.val(fused.weights).at2(n, e);
        CHECK(w >= 0.0);
        sum += w;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("prompt_fuse: hand-set logits (0, ln 3) give weights (0.25, 0.75) and the matching mix") {
  PromptPool<double> pool(PromptShape{2, 2, 3, 2}, 4, 11);
  // force the attention projection to produce logits (0, ln 3) regardless of input
  pool.params().at("attn_w").value.fill(0.0);
  pool.params().at("attn_b").value = TensorD({2}, {0.0, std::log(3.0)});
  std::mt19937_64 rng(13);
  GraphD g;
  Binding<double> bind(g);
  Var f = g.constant(testing::random_tensor<double>({1, 4, 2, 2}, rng));
  auto fused = pool.fuse(g, bind, f);
  CHECK(g.val(fused.weights).at2(0, 0) == doctest::Approx(0.25));
  CHECK(g.val(fused.weights).at2(0, 1) == doctest::Approx(0.75));
  const TensorD& pv = pool.params().at("pool").value;
  for (std::int64_t i = 0; i < 3 * 2 * 2; ++i)
    CHECK(g.val(fused.prompt)[i] == doctest::Approx(0.25 * pv[i] + 0.75 * pv[3 * 2 * 2 + i]));
}

TEST_CASE("separate pools: video and bit prompts share no parameters") {
  PromptPool<float> pv(PromptShape{4, 4, 12, 2}, 15, 3);
  PromptPool<float> pb(PromptShape{4, 4, 6, 6}, 8, 4);
  for (auto* a : pv.params().all())
    for (auto* b : pb.params().all()) CHECK(a != b);
  // and their pool tensors are distinct objects with independent storage
  pv.params().at("pool").value.fill(1.0f);
  CHECK(pb.params().at("pool").value[0] != 1.0f);
}

TEST_CASE("embed_bits: shape contract and zero-residual initialization") {
  BitHider<float> hider(small_opts(), 17);
  std::mt19937_64 rng(19);
  GraphF g;
  Binding<float> bind(g);
  Tensor frame0 = testing::random_tensor<float>({2, 3, 16, 16}, rng, 0.0, 1.0);
  Var frame = g.constant(frame0);
  Var bits = g.constant(bits_to_tensor<float>({BitString::random(8, 1), BitString::random(8, 2)}));
  Var container = hider.embed(g, bind, frame, bits);
  CHECK(g.val(container).shape() == frame0.shape());
  CHECK(max_abs_diff(g.val(container), frame0) == 0.0f);  // residual starts at zero
  CHECK_THROWS(hider.embed(g, bind, frame, g.constant(Tensor({2, 5})))); // wrong bit length
}

TEST_CASE("extract_bits: determinism and the inclusive 0.5 threshold") {
  BitRecoverer<float> rec(small_opts(), 23);
  std::mt19937_64 rng(29);
  Tensor frame = testing::random_tensor<float>({1, 3, 16, 16}, rng, 0.0, 1.0);
  Tensor s1, s2;
  for (int run = 0; run < 2; ++run) {
    GraphF g;
    Binding<float> bind(g);
    Var scores = rec.extract(g, bind, g.constant(frame));
    (run == 0 ? s1 : s2) = g.val(scores);
  }
  CHECK(max_abs_diff(s1, s2) == 0.0f);
  for (std::int64_t i = 0; i < s1.numel(); ++i) {
    CHECK(s1[i] > 0.0f);
    CHECK(s1[i] < 1.0f);
  }
  // tie rule: scores of exactly 0.5 harden to 1
  Tensor half({1, 4}, 0.5f);
  auto hard = harden_bits(half);
  for (int i = 0; i < 4; ++i) CHECK(hard[0].bit(i) == 1);
}

TEST_CASE("harden_bits is invariant to monotone rescaling preserving the threshold set") {
  std::mt19937_64 rng(31);
  Tensor scores = testing::random_tensor<float>({3, 8}, rng, 0.0, 1.0);
  auto base = harden_bits(scores);
  // monotone map around 0.5: s' = 0.5 + 0.4*tanh(3*(s-0.5)) keeps crossings
  Tensor mapped = scores;
  for (std::int64_t i = 0; i < mapped.numel(); ++i)
    mapped[i] = 0.5f + 0.4f * std::tanh(3.0f * (mapped[i] - 0.5f));
  auto remapped = harden_bits(mapped);
  for (size_t n = 0; n < base.size(); ++n) CHECK(base[n] == remapped[n]);
}

TEST_CASE("gradient check through the embed -> extract composition (4x4 frame)") {
  BitCodecOptions o;
  o.payload_bits = 4;
  o.base_channels = 3;
  o.brm_channels = 4;
  o.prompt_bits = PromptShape{2, 2, 3, 2};
  BitHider<double> hider(o, 37);
  BitRecoverer<double> rec(o, 41);
  // give the residual head real weights so the composition is nontrivial
  std::mt19937_64 rng(43);
  std::normal_distribution<double> d(0.0, 0.2);
  for (std::int64_t i = 0; i < hider.params().at("out_w").value.numel(); ++i)
    hider.params().at("out_w").value[i] = d(rng);
  auto frame0 = testing::random_tensor<double>({1, 3, 4, 4}, rng, 0.2, 0.8);
  TensorD bits0({1, 4}, {1.0, -1.0, 1.0, -1.0});
  auto fn = [&](const std::vector<TensorD>& in, std::vector<TensorD>* grads) {
    GraphD g;
    Binding<double> bind(g);
    Var frame = g.leaf(in[0]);
    Var container = hider.embed(g, bind, frame, g.constant(bits0));
    Var scores = rec.extract(g, bind, container);
    Var target = g.constant(TensorD({1, 4}, {1.0, 0.0, 1.0, 0.0}));
    Var loss = g.weighted_sum({g.mse(container, frame), g.mse(scores, target)}, {1.0, 10.0});
    if (grads) {
      g.backward(loss);
      *grads = {g.grad(frame)};
    }
    return g.val(loss)[0];
  };
  auto res = testing::grad_check(fn, {frame0}, 1e-4);
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("prompt_fuse gradients (pool, attention, fuse conv) match finite differences") {
  PromptPool<double> pool(PromptShape{2, 2, 2, 2}, 3, 47);
  std::mt19937_64 rng(53);
  auto f0 = testing::random_tensor<double>({1, 3, 4, 4}, rng);
  auto fn = [&](const std::vector<TensorD>& in, std::vector<TensorD>* grads) {
    pool.params().at("pool").value = in[1];
    GraphD g;
    Binding<double> bind(g);
    Var f = g.leaf(in[0]);
    auto fused = pool.fuse(g, bind, f);
    Var loss = g.mse(fused.out, g.constant(TensorD({1, 3, 4, 4}, 0.2)));
    if (grads) {
      g.backward(loss);
      TensorD gp;
      for (auto& [p, var] : bind.bound())
        if (p == &pool.params().at("pool")) gp = g.grad(var);
      *grads = {g.grad(f), gp};
    }
    return g.val(loss)[0];
  };
  auto res = testing::grad_check(fn, {f0, pool.params().at("pool").value}, 1e-4);
  CHECK(res.max_rel_err < 1e-3);
}
