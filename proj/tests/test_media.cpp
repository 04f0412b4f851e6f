#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "support/testing.hpp"
#include "vamark/media/bits.hpp"
#include "vamark/media/config.hpp"
#include "vamark/media/image_io.hpp"
#include "vamark/media/types.hpp"
#include "vamark/media/video_io.hpp"
#include "vamark/media/wav_io.hpp"

using namespace vamark;
namespace fs = std::filesystem;

namespace {

VideoSequence make_video(int T, int H = 4, int W = 4) {
  VideoSequence v;
  v.frames = Tensor({T, 3, H, W});
  for (int t = 0; t < T; ++t)
    for (std::int64_t i = 0; i < 3 * H * W; ++i)
      v.frames[t * 3 * H * W + i] = static_cast<float>(t) / std::max(1, T);
  return v;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("make_groups: T=1 replicates the single frame") {
  auto groups = make_groups(make_video(1));
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].center_index == 0);
  const std::int64_t sz = 3 * 4 * 4;
  for (int j = 0; j < 3; ++j)
    for (std::int64_t i = 0; i < sz; ++i) CHECK(groups[0].frames[j * sz + i] == 0.0f);
}

TEST_CASE("make_groups: T=3 boundary padding rule") {
  auto v = make_video(3);
  auto groups = make_groups(v);
  REQUIRE(groups.size() == 3);
  auto frame_of = [&](int t) { return v.frames[t * 3 * 16]; };  // first value identifies the frame
  auto slot = [&](int g, int j) { return groups[static_cast<size_t>(g)].frames[j * 3 * 16]; };
  // group 0 = [f0, f0, f1]
  CHECK(slot(0, 0) == frame_of(0));
  CHECK(slot(0, 1) == frame_of(0));
  CHECK(slot(0, 2) == frame_of(1));
  // group 1 = [f0, f1, f2]
  CHECK(slot(1, 0) == frame_of(0));
  CHECK(slot(1, 1) == frame_of(1));
  CHECK(slot(1, 2) == frame_of(2));
  // group 2 = [f1, f2, f2]
  CHECK(slot(2, 0) == frame_of(1));
  CHECK(slot(2, 1) == frame_of(2));
  CHECK(slot(2, 2) == frame_of(2));
}

TEST_CASE("make_groups: T=5 enumerated against the padding rule") {
  auto v = make_video(5);
  auto groups = make_groups(v);
  REQUIRE(groups.size() == 5);
  for (int k = 0; k < 5; ++k) {
    CHECK(groups[static_cast<size_t>(k)].center_index == k);
    for (int j = 0; j < 3; ++j) {
      const int expected = std::clamp(k + j - 1, 0, 4);
      CHECK(groups[static_cast<size_t>(k)].frames[j * 3 * 16] == v.frames[expected * 3 * 16]);
    }
  }
  // center always equals the source frame at center_index; every group frame exists in the source
  for (const auto& g : groups) CHECK(g.frames[1 * 3 * 16] == v.frames[g.center_index * 3 * 16]);
}

TEST_CASE("video io: save/load round trip within one 8-bit step") {
  TempDir dir("vamark_test_video_rt");
  std::mt19937_64 rng(3);
  VideoSequence v;
  v.frames = testing::random_tensor<float>({3, 3, 8, 8}, rng, 0.0, 1.0);
  save_video(dir.path.string(), v);
  VideoSequence back = load_video(dir.path.string());
  REQUIRE(back.T() == 3);
  CHECK(max_abs_diff(back.frames, v.frames) <= 0.5f / 255.0f + 1e-6f);
}

TEST_CASE("video io: error paths") {
  TempDir dir("vamark_test_video_err");
  CHECK_THROWS_WITH_AS(load_video((dir.path / "missing").string()), doctest::Contains("missing path"),
                       std::runtime_error);
  fs::create_directories(dir.path / "empty");
  CHECK_THROWS_WITH_AS(load_video((dir.path / "empty").string()), doctest::Contains("zero frames"),
                       std::runtime_error);
  // two frames of differing height
  fs::create_directories(dir.path / "mixed");
  save_image((dir.path / "mixed" / "a.png").string(), Tensor({3, 8, 8}, 0.5f));
  save_image((dir.path / "mixed" / "b.png").string(), Tensor({3, 6, 8}, 0.5f));
  CHECK_THROWS_WITH_AS(load_video((dir.path / "mixed").string()), doctest::Contains("inconsistent dimensions"),
                       std::runtime_error);
}

TEST_CASE("image io: masks use the 0/255 grayscale convention") {
  TempDir dir("vamark_test_mask");
  Tensor mask({4, 4});
  mask[5] = 1.0f;
  mask[10] = 1.0f;
  const std::string p = (dir.path / "m.png").string();
  save_mask(p, mask);
  Tensor img = load_image(p);
  REQUIRE(img.shape() == Shape{1, 4, 4});
  CHECK(img[5] == 1.0f);   // 255
  CHECK(img[0] == 0.0f);   // 0
  Tensor back = load_mask(p);
  CHECK(max_abs_diff(back, mask) == 0.0f);
}

TEST_CASE("audio io: 1 second at 16 kHz gives L=16000 and round trips") {
  TempDir dir("vamark_test_audio");
  AudioSignal a;
  a.sample_rate = 16000;
  a.samples.resize(16000);
  for (size_t i = 0; i < a.samples.size(); ++i)
    a.samples[i] = 0.5f * std::sin(2.0f * 3.14159265f * 440.0f * i / 16000.0f);
  const std::string p = (dir.path / "tone.wav").string();
  save_audio(p, a);
  AudioSignal back = load_audio(p);
  CHECK(back.sample_rate == 16000);
  CHECK(back.length() == 16000);
  float md = 0.0f;
  for (size_t i = 0; i < a.samples.size(); ++i) md = std::max(md, std::abs(a.samples[i] - back.samples[i]));
  CHECK(md <= 1.0f / 32767.0f + 1e-6f);
}

TEST_CASE("audio io: stereo downmix by channel mean, duration preserved") {
  TempDir dir("vamark_test_stereo");
  // hand-written stereo WAV: left = +0.5, right = -0.5 -> mean 0
  const std::string p = (dir.path / "st.wav").string();
  {
    std::ofstream f(p, std::ios::binary);
    auto w32 = [&](std::uint32_t v) { f.write(reinterpret_cast<char*>(&v), 4); };
    auto w16 = [&](std::uint16_t v) { f.write(reinterpret_cast<char*>(&v), 2); };
    const int frames = 100;
    f.write("RIFF", 4);
    w32(36 + frames * 4);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    w32(16);
    w16(1);
    w16(2);
    w32(8000);
    w32(8000 * 4);
    w16(4);
    w16(16);
    f.write("data", 4);
    w32(frames * 4);
    for (int i = 0; i < frames; ++i) {
      w16(static_cast<std::uint16_t>(16384));                      // left +0.5
      w16(static_cast<std::uint16_t>(static_cast<std::int16_t>(-16384)));  // right -0.5
    }
  }
  AudioSignal a = load_audio(p, 8000);
  CHECK(a.length() == 100);
  for (float s : a.samples) CHECK(std::abs(s) < 1e-4f);
}

TEST_CASE("audio io: empty data is an error") {
  TempDir dir("vamark_test_audio_empty");
  const std::string p = (dir.path / "e.wav").string();
  std::ofstream(p).close();
  CHECK_THROWS(load_audio(p));
}

TEST_CASE("bitstring hex interchange: MSB first, zero padded") {
  BitString b = BitString::zeros(32);
  b.set(0, 1);   // MSB of first hex digit
  b.set(31, 1);  // LSB of last digit
  CHECK(b.to_hex() == "80000001");
  BitString parsed = BitString::from_hex("80000001", 32);
  CHECK(parsed == b);
  CHECK(BitString::from_hex("0000000f", 32).bit(28) == 1);
  CHECK_THROWS(BitString::from_hex("80", 32));      // wrong width
  CHECK_THROWS(BitString::from_hex("8000000g", 32));  // bad character
  CHECK(BitString::random(32, 1).to_hex() != BitString::random(32, 2).to_hex());
}

TEST_CASE("config file parsing with overrides and validation") {
  TempDir dir("vamark_test_cfg");
  const std::string p = (dir.path / "run.cfg").string();
  {
    std::ofstream f(p);
    f << "# comment\n";
    f << "bits_k = 32\n";
    f << "tau = 0.25  # inline comment\n";
    f << "train_degradations = identity, gaussian5\n";
  }
  ConfigFile file = ConfigFile::load(p);
  CHECK(file.get_int("bits_k", 0) == 32);
  CHECK(file.get_double("tau", 0.0) == doctest::Approx(0.25));
  file.set("tau", "0.2");  // CLI-style override wins
  RunConfig cfg = RunConfig::from_file(file);
  CHECK(cfg.tau == doctest::Approx(0.2));
  REQUIRE(cfg.train_degradations.size() == 2);
  CHECK(cfg.train_degradations[1] == "gaussian5");

  file.set("bits_n", "64");  // n > k violates the invariant
  CHECK_THROWS(RunConfig::from_file(file));
  file.set("bits_n", "16");
  file.set("tau", "1.5");
  CHECK_THROWS(RunConfig::from_file(file));
}

TEST_CASE("localization watermark is pure blue by default convention") {
  VideoSequence wm = make_localization_watermark(2, 4, 4, 0.0f, 0.0f, 1.0f);
  CHECK(wm.frames.at4(0, 0, 1, 1) == 0.0f);
  CHECK(wm.frames.at4(0, 1, 1, 1) == 0.0f);
  CHECK(wm.frames.at4(0, 2, 1, 1) == 1.0f);
  wm.validate();
}
