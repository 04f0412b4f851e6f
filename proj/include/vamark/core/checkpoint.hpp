#pragma once

// Checkpoint archive: a self-describing container of named float arrays.
// Layout: magic "VAMARKCK", u32 format version, u32 entry count, then per
// entry: u32 name length, name bytes, u32 ndim, i64 dims..., f32 data.
// All integers little-endian.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "vamark/core/params.hpp"
#include "vamark/core/tensor.hpp"

namespace vamark {

inline constexpr char kCheckpointMagic[8] = {'V', 'A', 'M', 'A', 'R', 'K', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointWriter {
 public:
  void put(const std::string& name, const Tensor& t) {
    if (entries_.count(name)) throw std::invalid_argument("duplicate checkpoint entry: " + name);
    entries_[name] = t;
  }

  template <typename T>
  void put_params(const ParamSet<T>& params, const std::string& prefix = "") {
    for (const Param<T>* p : params.all()) put(prefix + p->name, p->value.template cast<float>());
  }

  void put_scalar(const std::string& name, double v) { put(name, Tensor({1}, {static_cast<float>(v)})); }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write(kCheckpointMagic, 8);
    write_u32(f, kCheckpointVersion);
    write_u32(f, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, t] : entries_) {
      write_u32(f, static_cast<std::uint32_t>(name.size()));
      f.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_u32(f, static_cast<std::uint32_t>(t.ndim()));
      for (int i = 0; i < t.ndim(); ++i) {
        const std::int64_t d = t.dim(i);
        f.write(reinterpret_cast<const char*>(&d), sizeof(d));
      }
      f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
  }

 private:
  std::map<std::string, Tensor> entries_;

  static void write_u32(std::ofstream& f, std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), sizeof(v)); }
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
      throw std::runtime_error("not a checkpoint archive: " + path);
    const std::uint32_t version = read_u32(f);
    if (version != kCheckpointVersion)
      throw std::runtime_error("unsupported checkpoint format version " + std::to_string(version));
    const std::uint32_t count = read_u32(f);
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint32_t name_len = read_u32(f);
      std::string name(name_len, '\0');
      f.read(name.data(), name_len);
      const std::uint32_t ndim = read_u32(f);
      Shape shape(ndim);
      for (std::uint32_t d = 0; d < ndim; ++d) {
        std::int64_t v = 0;
        f.read(reinterpret_cast<char*>(&v), sizeof(v));
        shape[d] = static_cast<int>(v);
      }
      Tensor t(shape);
      f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
      if (!f) throw std::runtime_error("truncated checkpoint: " + path);
      entries_.emplace(std::move(name), std::move(t));
    }
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  const Tensor& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("checkpoint has no entry: " + name);
    return it->second;
  }

  double get_scalar(const std::string& name) const {
    const Tensor& t = get(name);
    if (t.numel() != 1) throw std::runtime_error("checkpoint entry is not scalar: " + name);
    return t[0];
  }

  template <typename T>
  void load_params(ParamSet<T>& params, const std::string& prefix = "") const {
    for (Param<T>* p : params.all()) {
      const Tensor& src = get(prefix + p->name);
      if (src.shape() != p->value.shape())
        throw std::runtime_error("checkpoint shape mismatch for " + prefix + p->name + ": " +
                                 shape_str(src.shape()) + " vs " + shape_str(p->value.shape()));
      p->value = src.cast<T>();
    }
  }

  const std::map<std::string, Tensor>& entries() const { return entries_; }

 private:
  std::map<std::string, Tensor> entries_;

  static std::uint32_t read_u32(std::ifstream& f) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
};

}  // namespace vamark
