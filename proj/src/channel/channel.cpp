#include "vamark/channel/channel.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <stdexcept>

#include "vamark/media/video_io.hpp"

namespace fs = std::filesystem;

namespace vamark {

namespace {

void check_rect(const VideoSequence& v, const Rect& r, int t0, int t1) {
  if (r.w < 0 || r.h < 0 || r.x < 0 || r.y < 0 || r.x + r.w > v.W() || r.y + r.h > v.H())
    throw std::invalid_argument("tamper region out of bounds");
  if (t0 < 0 || t1 > v.T() || t0 > t1) throw std::invalid_argument("tamper frame range out of bounds");
}

// Exact modified-coordinate mask by diffing before/after.
Tensor diff_mask(const VideoSequence& before, const VideoSequence& after) {
  const int T = before.T(), C = before.C(), H = before.H(), W = before.W();
  Tensor mask({T, H, W});
  const std::int64_t hw = static_cast<std::int64_t>(H) * W;
  for (int t = 0; t < T; ++t)
    for (std::int64_t p = 0; p < hw; ++p) {
      bool changed = false;
      for (int c = 0; c < C && !changed; ++c)
        changed = before.frames[(static_cast<std::int64_t>(t) * C + c) * hw + p] !=
                  after.frames[(static_cast<std::int64_t>(t) * C + c) * hw + p];
      mask[static_cast<std::int64_t>(t) * hw + p] = changed ? 1.0f : 0.0f;
    }
  return mask;
}

}  // namespace

VideoTamperResult slicing_tamper(const VideoSequence& video, Rect rect, int t0, int t1, const VideoSequence& source,
                                 int src_t, int src_x, int src_y) {
  check_rect(video, rect, t0, t1);
  if (src_x < 0 || src_y < 0 || src_x + rect.w > source.W() || src_y + rect.h > source.H())
    throw std::invalid_argument("tamper source region out of bounds");
  VideoTamperResult out;
  out.video = video;
  const std::int64_t hw = static_cast<std::int64_t>(video.H()) * video.W();
  const std::int64_t shw = static_cast<std::int64_t>(source.H()) * source.W();
  for (int t = t0; t < t1; ++t) {
    const int st = std::clamp(src_t + (t - t0), 0, source.T() - 1);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < rect.h; ++y)
        for (int x = 0; x < rect.w; ++x)
          out.video.frames[(static_cast<std::int64_t>(t) * 3 + c) * hw + static_cast<std::int64_t>(rect.y + y) * video.W() + rect.x + x] =
              source.frames[(static_cast<std::int64_t>(st) * 3 + c) * shw + static_cast<std::int64_t>(src_y + y) * source.W() + src_x + x];
  }
  out.mask = diff_mask(video, out.video);
  return out;
}

VideoTamperResult erase_tamper(const VideoSequence& video, Rect rect, int t0, int t1, float fill) {
  check_rect(video, rect, t0, t1);
  VideoTamperResult out;
  out.video = video;
  const std::int64_t hw = static_cast<std::int64_t>(video.H()) * video.W();
  for (int t = t0; t < t1; ++t)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < rect.h; ++y)
        for (int x = 0; x < rect.w; ++x)
          out.video.frames[(static_cast<std::int64_t>(t) * 3 + c) * hw + static_cast<std::int64_t>(rect.y + y) * video.W() + rect.x + x] = fill;
  out.mask = diff_mask(video, out.video);
  return out;
}

AudioTamperResult insert_audio_tamper(const AudioSignal& audio, const AudioSignal& source, std::int64_t start,
                                      std::int64_t duration_samples) {
  if (start < 0 || duration_samples < 0 || start + duration_samples > audio.length())
    throw std::invalid_argument("audio tamper region out of bounds");
  if (duration_samples > 0 && source.samples.empty())
    throw std::invalid_argument("audio tamper source is empty");
  AudioTamperResult out;
  out.audio = audio;
  out.mask.assign(audio.samples.size(), 0.0f);
  for (std::int64_t i = 0; i < duration_samples; ++i) {
    out.audio.samples[static_cast<size_t>(start + i)] =
        source.samples[static_cast<size_t>(i % source.length())];
    out.mask[static_cast<size_t>(start + i)] = 1.0f;
  }
  return out;
}

// ---------------------------------------------------------------------------

Tensor gaussian_noise(const Tensor& x, double sigma255, std::mt19937_64& rng, float lo, float hi) {
  Tensor out = x;
  if (sigma255 == 0.0) return out;
  std::normal_distribution<double> dist(0.0, sigma255 / 255.0);
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = std::clamp(out[i] + static_cast<float>(dist(rng)), lo, hi);
  return out;
}

Tensor poisson_noise(const Tensor& x, std::mt19937_64& rng, double peak) {
  Tensor out = x;
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    const double lam = std::clamp(static_cast<double>(x[i]), 0.0, 1.0) * peak;
    std::poisson_distribution<long> dist(lam);
    out[i] = std::clamp(static_cast<float>(dist(rng) / peak), 0.0f, 1.0f);
  }
  return out;
}

namespace {

struct Dct8 {
  float m[8][8];
  Dct8() {
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        m[i][j] = static_cast<float>(std::sqrt((i == 0 ? 1.0 : 2.0) / 8.0) *
                                     std::cos((2 * j + 1) * i * std::numbers::pi / 16.0));
  }
};

}  // namespace

Tensor dct_quantize(const Tensor& x, double step) {
  if (x.ndim() != 4) throw std::invalid_argument("dct_quantize: expects [N,C,H,W]");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 8 != 0 || W % 8 != 0) throw std::invalid_argument("dct_quantize: H and W must be multiples of 8");
  static const Dct8 dct;
  Tensor out = x;
  const float s = static_cast<float>(step);
  float blk[8][8], tmp[8][8];
#ifdef _OPENMP
#pragma omp parallel for schedule(static) private(blk, tmp)
#endif
  for (int img = 0; img < N * C; ++img) {
    const std::int64_t base = static_cast<std::int64_t>(img) * H * W;
    for (int by = 0; by < H; by += 8)
      for (int bx = 0; bx < W; bx += 8) {
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) blk[i][j] = x[base + static_cast<std::int64_t>(by + i) * W + bx + j];
        // coeff = D * blk * D^T
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            float acc = 0.0f;
            for (int k = 0; k < 8; ++k) acc += dct.m[i][k] * blk[k][j];
            tmp[i][j] = acc;
          }
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            float acc = 0.0f;
            for (int k = 0; k < 8; ++k) acc += tmp[i][k] * dct.m[j][k];
            blk[i][j] = s > 0.0f ? std::round(acc / s) * s : acc;
          }
        // back = D^T * blk * D
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            float acc = 0.0f;
            for (int k = 0; k < 8; ++k) acc += dct.m[k][i] * blk[k][j];
            tmp[i][j] = acc;
          }
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            float acc = 0.0f;
            for (int k = 0; k < 8; ++k) acc += tmp[i][k] * dct.m[k][j];
            out[base + static_cast<std::int64_t>(by + i) * W + bx + j] = std::clamp(acc, 0.0f, 1.0f);
          }
      }
  }
  return out;
}

namespace {

std::string h264_command_template() {
  const char* env = std::getenv("VAMARK_H264_CMD");
  if (env) return env;
  return "ffmpeg -v error -y -framerate {fps} -i {in}/frame_%06d.png -c:v libx264 -qp {qp} -pix_fmt yuv420p "
         "{tmp}.mp4 && ffmpeg -v error -y -i {tmp}.mp4 {out}/frame_%06d.png";
}

std::string substitute(std::string templ, const std::string& key, const std::string& value) {
  size_t pos;
  while ((pos = templ.find(key)) != std::string::npos) templ.replace(pos, key.size(), value);
  return templ;
}

}  // namespace

bool h264_available() {
  return std::system("command -v ffmpeg >/dev/null 2>&1") == 0 || std::getenv("VAMARK_H264_CMD") != nullptr;
}

VideoSequence h264_roundtrip(const VideoSequence& video, int qp) {
  if (qp != 5 && qp != 10 && (qp < 0 || qp > 51)) throw std::invalid_argument("h264_roundtrip: bad QP");
  if (!h264_available())
    throw std::runtime_error("external encoder missing: ffmpeg (or VAMARK_H264_CMD) is required for h264_roundtrip");
  const fs::path tmp = fs::temp_directory_path() / ("vamark_h264_" + std::to_string(::getpid()));
  const fs::path in_dir = tmp / "in";
  const fs::path out_dir = tmp / "out";
  fs::create_directories(in_dir);
  fs::create_directories(out_dir);
  save_video(in_dir.string(), video);
  std::string cmd = h264_command_template();
  cmd = substitute(cmd, "{in}", in_dir.string());
  cmd = substitute(cmd, "{out}", out_dir.string());
  cmd = substitute(cmd, "{tmp}", (tmp / "clip").string());
  cmd = substitute(cmd, "{qp}", std::to_string(qp));
  cmd = substitute(cmd, "{fps}", std::to_string(std::max(1, static_cast<int>(video.frame_rate))));
  const int rc = std::system(cmd.c_str());
  if (rc != 0) {
    fs::remove_all(tmp);
    throw std::runtime_error("h264 round trip failed (exit " + std::to_string(rc) + ")");
  }
  VideoSequence out = load_video(out_dir.string(), video.frame_rate);
  fs::remove_all(tmp);
  if (out.T() != video.T()) throw std::runtime_error("h264 round trip changed frame count");
  return out;
}

// ---------------------------------------------------------------------------

std::vector<float> rational_resample(const std::vector<float>& x, int L, int M) {
  if (L < 1 || M < 1) throw std::invalid_argument("rational_resample: factors must be positive");
  if (x.empty()) return {};
  const int n_in = static_cast<int>(x.size());
  const std::int64_t n_out = (static_cast<std::int64_t>(n_in) * L + M - 1) / M;
  // Anti-alias/interpolation cutoff in input-rate units and a Hann-windowed
  // sinc with 8 zero crossings per side. Weights are renormalized per output
  // sample, which keeps unity DC gain including at the edges.
  const int zc = 8;
  const double fc = std::min(1.0, static_cast<double>(L) / M);
  const int half = static_cast<int>(std::ceil(zc / fc));
  std::vector<float> out(static_cast<size_t>(n_out));
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < n_out; ++j) {
    // output sample j sits at input-domain position j*M/L
    const double center = static_cast<double>(j) * M / L;
    const std::int64_t i0 = static_cast<std::int64_t>(std::ceil(center - half));
    const std::int64_t i1 = static_cast<std::int64_t>(std::floor(center + half));
    double acc = 0.0, wsum = 0.0;
    for (std::int64_t i = i0; i <= i1; ++i) {
      if (i < 0 || i >= n_in) continue;
      const double t = static_cast<double>(i) - center;
      const double sinc = t == 0.0 ? 1.0 : std::sin(std::numbers::pi * fc * t) / (std::numbers::pi * fc * t);
      const double win = 0.5 * (1.0 + std::cos(std::numbers::pi * t / half));
      const double w = sinc * win;
      wsum += w;
      acc += w * x[static_cast<size_t>(i)];
    }
    out[static_cast<size_t>(j)] = wsum != 0.0 ? static_cast<float>(acc / wsum) : 0.0f;
  }
  return out;
}

AudioSignal resample_audio(const AudioSignal& a, int up, int down) {
  AudioSignal out = a;
  std::vector<float> low = rational_resample(a.samples, up, down);
  std::vector<float> back = rational_resample(low, down, up);
  back.resize(a.samples.size(), 0.0f);
  for (auto& v : back) v = std::clamp(v, -1.0f, 1.0f);
  out.samples = std::move(back);
  return out;
}

AudioSignal lowpass_audio(const AudioSignal& a, double cutoff_hz) {
  if (cutoff_hz <= 0.0 || cutoff_hz >= a.sample_rate / 2.0)
    throw std::invalid_argument("lowpass_audio: cutoff must lie in (0, Nyquist)");
  constexpr int kOrder = 8;
  const double K = std::tan(std::numbers::pi * cutoff_hz / a.sample_rate);
  struct Biquad {
    double b0, b1, b2, a1, a2;
  };
  std::vector<Biquad> sections;
  for (int k = 1; k <= kOrder / 2; ++k) {
    const double c = 2.0 * std::sin((2.0 * k - 1.0) * std::numbers::pi / (2.0 * kOrder));
    const double d = 1.0 + c * K + K * K;
    sections.push_back({K * K / d, 2.0 * K * K / d, K * K / d, 2.0 * (K * K - 1.0) / d, (1.0 - c * K + K * K) / d});
  }
  auto filter = [&](std::vector<float> x) {
    for (const Biquad& s : sections) {
      double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
      for (float& v : x) {
        const double x0 = v;
        const double y0 = s.b0 * x0 + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
        x2 = x1;
        x1 = x0;
        y2 = y1;
        y1 = y0;
        v = static_cast<float>(y0);
      }
    }
    return x;
  };
  AudioSignal out = a;
  std::vector<float> y = filter(a.samples);
  std::reverse(y.begin(), y.end());
  y = filter(std::move(y));
  std::reverse(y.begin(), y.end());
  for (auto& v : y) v = std::clamp(v, -1.0f, 1.0f);
  out.samples = std::move(y);
  return out;
}

// ---------------------------------------------------------------------------

DegradeSpec DegradeSpec::parse(const std::string& name) {
  DegradeSpec s;
  if (name == "identity" || name == "clean") {
    s.kind = Kind::kIdentity;
  } else if (name.rfind("gaussian", 0) == 0) {
    s.kind = Kind::kGaussian;
    s.param = name.size() > 8 ? std::stod(name.substr(8)) : 5.0;
  } else if (name == "poisson") {
    s.kind = Kind::kPoisson;
  } else if (name.rfind("dctq", 0) == 0) {
    s.kind = Kind::kDctQuant;
    s.param = name.size() > 4 ? std::stod(name.substr(4)) : 0.06;
  } else if (name.rfind("h264qp", 0) == 0) {
    s.kind = Kind::kH264;
    s.param = name.size() > 6 ? std::stod(name.substr(6)) : 5.0;
  } else if (name == "resample") {
    s.kind = Kind::kResample;
  } else if (name == "lowpass") {
    s.kind = Kind::kLowpass;
    s.param = 1000.0;
  } else {
    throw std::invalid_argument("unknown degradation: " + name);
  }
  return s;
}

std::string DegradeSpec::name() const {
  switch (kind) {
    case Kind::kIdentity:
      return "identity";
    case Kind::kGaussian:
      return "gaussian" + std::to_string(static_cast<int>(param));
    case Kind::kPoisson:
      return "poisson";
    case Kind::kDctQuant:
      return "dctq";
    case Kind::kH264:
      return "h264qp" + std::to_string(static_cast<int>(param));
    case Kind::kResample:
      return "resample";
    case Kind::kLowpass:
      return "lowpass";
  }
  return "unknown";
}

Tensor apply_video_degradation(const Tensor& frames, const DegradeSpec& spec, std::mt19937_64& rng) {
  switch (spec.kind) {
    case DegradeSpec::Kind::kIdentity:
      return frames;
    case DegradeSpec::Kind::kGaussian:
      return gaussian_noise(frames, spec.param, rng);
    case DegradeSpec::Kind::kPoisson:
      return poisson_noise(frames, rng);
    case DegradeSpec::Kind::kDctQuant:
      return dct_quantize(frames, spec.param == 0.0 ? 0.06 : spec.param);
    case DegradeSpec::Kind::kH264: {
      VideoSequence v;
      v.frames = frames;
      return h264_roundtrip(v, static_cast<int>(spec.param)).frames;
    }
    default:
      throw std::invalid_argument("degradation " + spec.name() + " does not apply to video");
  }
}

AudioSignal apply_audio_degradation(const AudioSignal& a, const DegradeSpec& spec) {
  switch (spec.kind) {
    case DegradeSpec::Kind::kIdentity:
      return a;
    case DegradeSpec::Kind::kResample:
      return resample_audio(a);
    case DegradeSpec::Kind::kLowpass:
      return lowpass_audio(a, spec.param == 0.0 ? 1000.0 : spec.param);
    default:
      throw std::invalid_argument("degradation " + spec.name() + " does not apply to audio");
  }
}

// ---------------------------------------------------------------------------

VideoSequence transmit_video(const VideoSequence& container, const Tensor& mask, const VideoTamperFn& tamper,
                             const VideoDegradeFn& degrade) {
  const int T = container.T(), C = container.C(), H = container.H(), W = container.W();
  if (mask.ndim() != 3 || mask.dim(0) != T || mask.dim(1) != H || mask.dim(2) != W)
    throw std::invalid_argument("transmit_video: mask must be [T,H,W] matching the container");
  Tensor tampered = tamper ? tamper(container.frames) : container.frames;
  check_same_shape(container.frames, tampered, "transmit_video tamper");
  Tensor mixed(container.frames.shape());
  const std::int64_t hw = static_cast<std::int64_t>(H) * W;
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < C; ++c)
      for (std::int64_t p = 0; p < hw; ++p) {
        const std::int64_t i = (static_cast<std::int64_t>(t) * C + c) * hw + p;
        const float m = mask[static_cast<std::int64_t>(t) * hw + p];
        mixed[i] = container.frames[i] * (1.0f - m) + tampered[i] * m;
      }
  Tensor received = degrade ? degrade(mixed) : mixed;
  check_same_shape(mixed, received, "transmit_video degrade");
  for (std::int64_t i = 0; i < received.numel(); ++i) received[i] = std::clamp(received[i], 0.0f, 1.0f);
  VideoSequence out;
  out.frames = std::move(received);
  out.frame_rate = container.frame_rate;
  return out;
}

AudioSignal transmit_audio(const AudioSignal& container, const std::vector<float>& mask, const AudioTamperFn& tamper,
                           const AudioDegradeFn& degrade) {
  if (mask.size() != container.samples.size())
    throw std::invalid_argument("transmit_audio: mask length must match the container");
  std::vector<float> tampered = tamper ? tamper(container.samples) : container.samples;
  if (tampered.size() != container.samples.size())
    throw std::invalid_argument("transmit_audio: tamper changed the length");
  std::vector<float> mixed(container.samples.size());
  for (size_t i = 0; i < mixed.size(); ++i)
    mixed[i] = container.samples[i] * (1.0f - mask[i]) + tampered[i] * mask[i];
  std::vector<float> received = degrade ? degrade(mixed) : mixed;
  if (received.size() != container.samples.size())
    throw std::invalid_argument("transmit_audio: degradation changed the length");
  for (auto& v : received) v = std::clamp(v, -1.0f, 1.0f);
  AudioSignal out;
  out.sample_rate = container.sample_rate;
  out.samples = std::move(received);
  return out;
}

}  // namespace vamark
