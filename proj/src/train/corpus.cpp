#include "vamark/train/corpus.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "vamark/core/rng.hpp"

namespace vamark {

namespace {

constexpr double kPi = std::numbers::pi;

struct Texture {
  double fx, fy, phase, base, amp;
  double sample(double x, double y) const { return base + amp * std::sin(2.0 * kPi * (fx * x + fy * y) + phase); }
};

Texture random_texture(std::mt19937_64& rng, double base_lo, double base_hi, double amp_hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Texture t;
  t.fx = (u(rng) - 0.5) * 0.25;
  t.fy = (u(rng) - 0.5) * 0.25;
  t.phase = u(rng) * 2.0 * kPi;
  t.base = base_lo + u(rng) * (base_hi - base_lo);
  t.amp = 0.05 + u(rng) * (amp_hi - 0.05);
  return t;
}

struct MovingShape {
  bool circle;
  double cx, cy;      // center, moves over time
  double vx, vy;      // velocity in pixels per frame
  double half_w, half_h;
  Texture tex[3];

  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    if (circle) return (dx * dx) / (half_w * half_w) + (dy * dy) / (half_h * half_h) <= 1.0;
    return std::abs(dx) <= half_w && std::abs(dy) <= half_h;
  }

  void advance(int W, int H) {
    cx += vx;
    cy += vy;
    if (cx < half_w || cx > W - half_w) {
      vx = -vx;
      cx = std::clamp(cx, half_w, static_cast<double>(W) - half_w);
    }
    if (cy < half_h || cy > H - half_h) {
      vy = -vy;
      cy = std::clamp(cy, half_h, static_cast<double>(H) - half_h);
    }
  }
};

}  // namespace

VideoSequence synthetic_clip(const CorpusConfig& cfg, int index) {
  if (cfg.height < 16 || cfg.width < 16 || cfg.frames < 1) throw std::invalid_argument("corpus: invalid resolution");
  std::mt19937_64 rng = make_rng(cfg.seed, static_cast<std::uint64_t>(index) * 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  Texture bg[3];
  for (auto& t : bg) t = random_texture(rng, 0.25, 0.75, 0.18);

  const int n_shapes = 2 + static_cast<int>(rng() % 2);
  std::vector<MovingShape> shapes;
  for (int s = 0; s < n_shapes; ++s) {
    MovingShape sh;
    sh.circle = (rng() & 1) != 0;
    sh.half_w = (0.10 + 0.12 * u(rng)) * cfg.width;
    sh.half_h = (0.10 + 0.12 * u(rng)) * cfg.height;
    sh.cx = sh.half_w + u(rng) * (cfg.width - 2.0 * sh.half_w);
    sh.cy = sh.half_h + u(rng) * (cfg.height - 2.0 * sh.half_h);
    auto vel = [&]() {
      const double v = 0.8 + 1.7 * u(rng);
      return (rng() & 1) ? v : -v;
    };
    sh.vx = vel();
    sh.vy = vel();
    for (auto& t : sh.tex) t = random_texture(rng, 0.15, 0.85, 0.3);
    shapes.push_back(sh);
  }
  const double drift_phase = u(rng) * 2.0 * kPi;

  VideoSequence v;
  v.frame_rate = cfg.frame_rate;
  v.frames = Tensor({cfg.frames, 3, cfg.height, cfg.width});
  const std::int64_t hw = static_cast<std::int64_t>(cfg.height) * cfg.width;
  for (int t = 0; t < cfg.frames; ++t) {
    const double light = 1.0 + 0.04 * std::sin(2.0 * kPi * t / std::max(1, cfg.frames) + drift_phase);
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const MovingShape* hit = nullptr;
        for (auto it = shapes.rbegin(); it != shapes.rend(); ++it)
          if (it->contains(x + 0.5, y + 0.5)) {
            hit = &*it;
            break;
          }
        for (int c = 0; c < 3; ++c) {
          const double raw = hit ? hit->tex[c].sample(x, y) : bg[c].sample(x, y);
          v.frames[(static_cast<std::int64_t>(t) * 3 + c) * hw + static_cast<std::int64_t>(y) * cfg.width + x] =
              static_cast<float>(std::clamp(raw * light, 0.0, 1.0));
        }
      }
    for (auto& sh : shapes) sh.advance(cfg.width, cfg.height);
  }
  return v;
}

AudioSignal synthetic_audio(const CorpusConfig& cfg, int index) {
  std::mt19937_64 rng = make_rng(cfg.seed, static_cast<std::uint64_t>(index) * 2 + 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::int64_t L = std::max<std::int64_t>(1, static_cast<std::int64_t>(cfg.audio_seconds * cfg.sample_rate));

  AudioSignal a;
  a.sample_rate = cfg.sample_rate;
  a.samples.assign(static_cast<size_t>(L), 0.0f);

  const int tones = 2 + static_cast<int>(rng() % 3);
  for (int k = 0; k < tones; ++k) {
    const double f = 120.0 + u(rng) * 2800.0;
    const double amp = 0.12 + 0.25 * u(rng);
    const double am_f = 0.5 + 3.5 * u(rng);
    const double phase = u(rng) * 2.0 * kPi;
    const double am_phase = u(rng) * 2.0 * kPi;
    for (std::int64_t i = 0; i < L; ++i) {
      const double t = static_cast<double>(i) / cfg.sample_rate;
      const double env = 0.55 + 0.45 * std::sin(2.0 * kPi * am_f * t + am_phase);
      a.samples[static_cast<size_t>(i)] += static_cast<float>(amp * env * std::sin(2.0 * kPi * f * t + phase));
    }
  }
  // speech-like noise floor, first-order lowpassed
  std::normal_distribution<double> noise(0.0, 0.02);
  double state = 0.0;
  for (std::int64_t i = 0; i < L; ++i) {
    state = 0.95 * state + 0.05 * noise(rng);
    a.samples[static_cast<size_t>(i)] += static_cast<float>(state * 8.0);
  }
  float peak = 0.0f;
  for (float s : a.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.65f)
    for (auto& s : a.samples) s *= 0.65f / peak;
  return a;
}

SyntheticCorpus make_synthetic_corpus(const CorpusConfig& cfg) {
  SyntheticCorpus out;
  out.videos.reserve(static_cast<size_t>(cfg.clips));
  out.audios.reserve(static_cast<size_t>(cfg.clips));
  for (int i = 0; i < cfg.clips; ++i) {
    out.videos.push_back(synthetic_clip(cfg, i));
    out.audios.push_back(synthetic_audio(cfg, i));
  }
  return out;
}

}  // namespace vamark
