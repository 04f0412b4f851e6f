#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "support/testing.hpp"
#include "vamark/channel/channel.hpp"
#include "vamark/train/metrics.hpp"

using namespace vamark;

namespace {

VideoSequence random_video(int T, int H, int W, std::uint64_t seed, double lo = 0.2, double hi = 0.8) {
  std::mt19937_64 rng(seed);
  VideoSequence v;
  v.frames = testing::random_tensor<float>({T, 3, H, W}, rng, lo, hi);
  return v;
}

}  // namespace

TEST_CASE("transmit_video: zero mask with identity degrade is the identity") {
  VideoSequence v = random_video(2, 4, 4, 1);
  Tensor mask({2, 4, 4});
  VideoSequence rec = transmit_video(v, mask, [](const Tensor& f) { return Tensor(f.shape(), 0.0f); }, nullptr);
  CHECK(max_abs_diff(rec.frames, v.frames) == 0.0f);
}

TEST_CASE("transmit_video: full mask with identity degrade returns the tampered frames") {
  VideoSequence v = random_video(2, 4, 4, 2);
  Tensor mask({2, 4, 4}, 1.0f);
  VideoSequence rec = transmit_video(v, mask, [](const Tensor& f) { return Tensor(f.shape(), 0.25f); }, nullptr);
  for (std::int64_t i = 0; i < rec.frames.numel(); ++i) CHECK(rec.frames[i] == 0.25f);
}

TEST_CASE("transmit_video: checkerboard mask matches the per-pixel hand composition") {
  VideoSequence v = random_video(1, 2, 2, 3);
  Tensor mask({1, 2, 2});
  mask[0] = 1.0f;  // checkerboard
  mask[3] = 1.0f;
  VideoSequence rec = transmit_video(v, mask, [](const Tensor& f) { return Tensor(f.shape(), 0.0f); }, nullptr);
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < 4; ++p) {
      const float want = (p == 0 || p == 3) ? 0.0f : v.frames[c * 4 + p];
      CHECK(rec.frames[c * 4 + p] == want);
    }
}

TEST_CASE("transmit_video: composition modifies pixels only where the mask is 1") {
  VideoSequence v = random_video(2, 6, 6, 4);
  std::mt19937_64 rng(5);
  Tensor mask({2, 6, 6});
  for (std::int64_t i = 0; i < mask.numel(); ++i) mask[i] = (rng() & 1) ? 1.0f : 0.0f;
  VideoSequence rec = transmit_video(v, mask, [](const Tensor& f) { return Tensor(f.shape(), 0.9f); }, nullptr);
  for (int t = 0; t < 2; ++t)
    for (int c = 0; c < 3; ++c)
      for (int p = 0; p < 36; ++p) {
        const std::int64_t i = (t * 3 + c) * 36 + p;
        if (mask[t * 36 + p] == 0.0f)
          CHECK(rec.frames[i] == v.frames[i]);
        else
          CHECK(rec.frames[i] != v.frames[i]);
      }
}

TEST_CASE("transmit_audio: degenerate masks and an 8-sample oracle") {
  AudioSignal a;
  a.samples = {0.1f, -0.2f, 0.3f, -0.4f, 0.5f, -0.6f, 0.7f, -0.8f};
  std::vector<float> zero(8, 0.0f), one(8, 1.0f);
  auto flip = [](const std::vector<float>& s) {
    std::vector<float> out = s;
    for (auto& v : out) v = -v;
    return out;
  };
  CHECK(transmit_audio(a, zero, flip, nullptr).samples == a.samples);
  AudioSignal all = transmit_audio(a, one, flip, nullptr);
  for (size_t i = 0; i < 8; ++i) CHECK(all.samples[i] == -a.samples[i]);
  // 3-sample tampered run
  std::vector<float> run(8, 0.0f);
  run[2] = run[3] = run[4] = 1.0f;
  AudioSignal mixed = transmit_audio(a, run, flip, nullptr);
  for (size_t i = 0; i < 8; ++i) CHECK(mixed.samples[i] == (run[i] == 1.0f ? -a.samples[i] : a.samples[i]));
}

TEST_CASE("slicing tamper: mask is the exact diff set; area oracle") {
  VideoSequence v = random_video(3, 64, 64, 6, 0.3, 0.7);
  VideoSequence src;
  src.frames = Tensor({1, 3, 64, 64}, 0.0f);  // differs from every v pixel
  std::mt19937_64 rng(7);
  const Rect r{static_cast<int>(rng() % 40), static_cast<int>(rng() % 40), 17, 13};
  auto res = slicing_tamper(v, r, 0, 3, src, 0, r.x, r.y);
  double area = 0.0;
  for (std::int64_t i = 0; i < res.mask.numel(); ++i) area += res.mask[i];
  CHECK(area == doctest::Approx(3.0 * 17 * 13));
  // media changed exactly where the mask says
  for (int t = 0; t < 3; ++t)
    for (int p = 0; p < 64 * 64; ++p) {
      bool changed = false;
      for (int c = 0; c < 3; ++c)
        changed = changed || res.video.frames[(t * 3 + c) * 4096 + p] != v.frames[(t * 3 + c) * 4096 + p];
      CHECK(changed == (res.mask[t * 4096 + p] == 1.0f));
    }
}

TEST_CASE("tamper: zero-extent rect leaves media untouched with an empty mask") {
  VideoSequence v = random_video(2, 8, 8, 8);
  auto res = erase_tamper(v, Rect{2, 2, 0, 0}, 0, 2, 0.0f);
  CHECK(max_abs_diff(res.video.frames, v.frames) == 0.0f);
  for (std::int64_t i = 0; i < res.mask.numel(); ++i) CHECK(res.mask[i] == 0.0f);
}

TEST_CASE("tamper: out-of-bounds regions are rejected") {
  VideoSequence v = random_video(2, 8, 8, 9);
  CHECK_THROWS(erase_tamper(v, Rect{4, 4, 8, 2}, 0, 2, 0.0f));
  CHECK_THROWS(erase_tamper(v, Rect{0, 0, 2, 2}, 0, 3, 0.0f));
  AudioSignal a;
  a.samples.assign(100, 0.1f);
  CHECK_THROWS(insert_audio_tamper(a, a, 50, 60));
}

TEST_CASE("insert_audio_tamper: 1 s at 16 kHz covers exactly [16000, 32000)") {
  AudioSignal a;
  a.sample_rate = 16000;
  a.samples.assign(48000, 0.05f);
  AudioSignal src;
  src.sample_rate = 16000;
  src.samples.assign(16000, -0.3f);
  auto res = insert_audio_tamper(a, src, 16000, 16000);
  for (std::int64_t i = 0; i < 48000; ++i) {
    const bool in = i >= 16000 && i < 32000;
    CHECK(res.mask[static_cast<size_t>(i)] == (in ? 1.0f : 0.0f));
    CHECK(res.audio.samples[static_cast<size_t>(i)] == (in ? -0.3f : 0.05f));
  }
}

TEST_CASE("gaussian noise: sigma=0 is the identity; sigma=5 empirical std") {
  VideoSequence v = random_video(1, 64, 64, 10, 0.3, 0.7);
  std::mt19937_64 rng(11);
  Tensor same = gaussian_noise(v.frames, 0.0, rng);
  CHECK(max_abs_diff(same, v.frames) == 0.0f);
  Tensor noisy = gaussian_noise(v.frames, 5.0, rng);
  double var = 0.0;
  for (std::int64_t i = 0; i < noisy.numel(); ++i) {
    const double d = static_cast<double>(noisy[i]) - v.frames[i];
    var += d * d;
  }
  const double std_emp = std::sqrt(var / static_cast<double>(noisy.numel()));
  CHECK(std_emp == doctest::Approx(5.0 / 255.0).epsilon(0.10));
  for (std::int64_t i = 0; i < noisy.numel(); ++i) {
    CHECK(noisy[i] >= 0.0f);
    CHECK(noisy[i] <= 1.0f);
  }
}

TEST_CASE("poisson noise: preserves shape/range, unbiased at mid-gray") {
  VideoSequence v = random_video(1, 32, 32, 12, 0.5, 0.5);
  std::mt19937_64 rng(13);
  Tensor noisy = poisson_noise(v.frames, rng);
  CHECK(noisy.shape() == v.frames.shape());
  double mean = 0.0;
  for (std::int64_t i = 0; i < noisy.numel(); ++i) {
    mean += noisy[i];
    CHECK(noisy[i] >= 0.0f);
    CHECK(noisy[i] <= 1.0f);
  }
  mean /= static_cast<double>(noisy.numel());
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("dct quantization proxy: zero step identity, larger steps distort more") {
  VideoSequence v = random_video(1, 16, 16, 14);
  Tensor id = dct_quantize(v.frames, 0.0);
  CHECK(max_abs_diff(id, v.frames) < 1e-5f);
  Tensor q1 = dct_quantize(v.frames, 0.05);
  Tensor q2 = dct_quantize(v.frames, 0.20);
  const double p1 = psnr(q1, v.frames), p2 = psnr(q2, v.frames);
  CHECK(p1 > p2);
  CHECK(p2 > 10.0);
}

TEST_CASE("lowpass: 2000 Hz tone under a 1000 Hz cutoff loses >90% RMS") {
  AudioSignal tone;
  tone.sample_rate = 16000;
  tone.samples.resize(16000);
  for (size_t i = 0; i < tone.samples.size(); ++i)
    tone.samples[i] = 0.5f * std::sin(2.0 * M_PI * 2000.0 * i / 16000.0);
  AudioSignal out = lowpass_audio(tone, 1000.0);
  REQUIRE(out.samples.size() == tone.samples.size());
  auto rms = [](const std::vector<float>& s) {
    double acc = 0.0;
    for (float v : s) acc += static_cast<double>(v) * v;
    return std::sqrt(acc / s.size());
  };
  CHECK(rms(out.samples) < 0.1 * rms(tone.samples));
  // and a 200 Hz tone passes nearly unharmed
  AudioSignal low = tone;
  for (size_t i = 0; i < low.samples.size(); ++i)
    low.samples[i] = 0.5f * std::sin(2.0 * M_PI * 200.0 * i / 16000.0);
  AudioSignal kept = lowpass_audio(low, 1000.0);
  CHECK(rms(kept.samples) > 0.9 * rms(low.samples));
}

TEST_CASE("resample: 90% round trip preserves length and band-limited content") {
  AudioSignal tone;
  tone.sample_rate = 16000;
  tone.samples.resize(16000);
  for (size_t i = 0; i < tone.samples.size(); ++i)
    tone.samples[i] = 0.4f * std::sin(2.0 * M_PI * 800.0 * i / 16000.0);
  AudioSignal out = resample_audio(tone);
  REQUIRE(out.samples.size() == tone.samples.size());
  double err = 0.0, ref = 0.0;
  // ignore filter edge transients
  for (size_t i = 200; i + 200 < tone.samples.size(); ++i) {
    err += std::pow(static_cast<double>(out.samples[i]) - tone.samples[i], 2);
    ref += std::pow(static_cast<double>(tone.samples[i]), 2);
  }
  CHECK(err / ref < 0.01);
}

TEST_CASE("degradation specs parse and preserve shape/range") {
  std::mt19937_64 rng(15);
  VideoSequence v = random_video(1, 16, 16, 16);
  for (const char* name : {"identity", "gaussian5", "gaussian10", "poisson", "dctq"}) {
    DegradeSpec spec = DegradeSpec::parse(name);
    Tensor out = apply_video_degradation(v.frames, spec, rng);
    CHECK(out.shape() == v.frames.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) {
      CHECK(out[i] >= 0.0f);
      CHECK(out[i] <= 1.0f);
    }
  }
  CHECK(DegradeSpec::parse("gaussian5").param == doctest::Approx(5.0));
  CHECK_THROWS(DegradeSpec::parse("mystery"));
  CHECK(!DegradeSpec::parse("h264qp5").trainable());
}

TEST_CASE("h264 round trip errors explicitly when the encoder is missing") {
  if (h264_available()) return;  // sandbox without ffmpeg exercises the error path
  VideoSequence v = random_video(2, 16, 16, 17);
  CHECK_THROWS_WITH_AS(h264_roundtrip(v, 5), doctest::Contains("external encoder missing"), std::runtime_error);
}
