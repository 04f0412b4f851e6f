#include "vamark/media/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace vamark {

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void write_u32(std::ofstream& f, std::uint32_t v) {
  std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                       static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
  f.write(reinterpret_cast<char*>(b), 4);
}
void write_u16(std::ofstream& f, std::uint16_t v) {
  std::uint8_t b[2] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
  f.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

AudioSignal load_audio(const std::string& path, int target_rate) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open audio file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);

  int channels = 0, rate = 0, bits = 0;
  size_t data_off = 0, data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t len = read_u32(bytes.data() + pos + 4);
    if (std::memcmp(id, "fmt ", 4) == 0 && pos + 8 + 16 <= bytes.size()) {
      const std::uint8_t* p = bytes.data() + pos + 8;
      const int format = read_u16(p);
      channels = read_u16(p + 2);
      rate = static_cast<int>(read_u32(p + 4));
      bits = read_u16(p + 14);
      if (format != 1 || bits != 16) throw std::runtime_error("only 16-bit PCM WAV is supported: " + path);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_off = pos + 8;
      data_len = std::min<size_t>(len, bytes.size() - data_off);
    }
    pos += 8 + len + (len & 1);
  }
  if (channels <= 0 || rate <= 0 || data_off == 0) throw std::runtime_error("malformed WAV file: " + path);

  const size_t frame_bytes = static_cast<size_t>(channels) * 2;
  const size_t frames = data_len / frame_bytes;
  if (frames == 0) throw std::runtime_error("audio file has zero samples: " + path);

  AudioSignal out;
  out.sample_rate = rate;
  out.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0.0;  // stereo downmix by channel mean
    for (int c = 0; c < channels; ++c) {
      const std::uint8_t* p = bytes.data() + data_off + i * frame_bytes + static_cast<size_t>(c) * 2;
      const std::int16_t s = static_cast<std::int16_t>(p[0] | (p[1] << 8));
      acc += s / 32768.0;
    }
    out.samples[i] = static_cast<float>(std::clamp(acc / channels, -1.0, 1.0));
  }
  if (target_rate > 0 && target_rate != rate) out = resample_to_rate(out, target_rate);
  return out;
}

void save_audio(const std::string& path, const AudioSignal& audio) {
  if (audio.samples.empty()) throw std::invalid_argument("save_audio: empty signal");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open audio file for writing: " + path);
  const std::uint32_t data_len = static_cast<std::uint32_t>(audio.samples.size() * 2);
  f.write("RIFF", 4);
  write_u32(f, 36 + data_len);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  write_u32(f, 16);
  write_u16(f, 1);  // PCM
  write_u16(f, 1);  // mono
  write_u32(f, static_cast<std::uint32_t>(audio.sample_rate));
  write_u32(f, static_cast<std::uint32_t>(audio.sample_rate * 2));
  write_u16(f, 2);
  write_u16(f, 16);
  f.write("data", 4);
  write_u32(f, data_len);
  for (float s : audio.samples) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    const std::int16_t q = static_cast<std::int16_t>(std::lround(c * 32767.0f));
    std::uint8_t b[2] = {static_cast<std::uint8_t>(q & 0xFF), static_cast<std::uint8_t>((q >> 8) & 0xFF)};
    f.write(reinterpret_cast<char*>(b), 2);
  }
  if (!f) throw std::runtime_error("audio write failed: " + path);
}

AudioSignal resample_to_rate(const AudioSignal& in, int new_rate) {
  if (new_rate <= 0) throw std::invalid_argument("resample_to_rate: bad rate");
  if (new_rate == in.sample_rate) return in;
  const double ratio = static_cast<double>(new_rate) / in.sample_rate;
  const std::int64_t out_len = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(in.length() * ratio)));
  AudioSignal out;
  out.sample_rate = new_rate;
  out.samples.resize(static_cast<size_t>(out_len));
  for (std::int64_t i = 0; i < out_len; ++i) {
    const double src = i / ratio;
    const std::int64_t i0 = std::min<std::int64_t>(static_cast<std::int64_t>(src), in.length() - 1);
    const std::int64_t i1 = std::min<std::int64_t>(i0 + 1, in.length() - 1);
    const double frac = src - static_cast<double>(i0);
    out.samples[static_cast<size_t>(i)] =
        static_cast<float>((1.0 - frac) * in.samples[static_cast<size_t>(i0)] + frac * in.samples[static_cast<size_t>(i1)]);
  }
  return out;
}

}  // namespace vamark
