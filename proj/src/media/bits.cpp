#include "vamark/media/bits.hpp"

#include <random>
#include <stdexcept>

namespace vamark {

BitString::BitString(std::vector<int> bits) : bits_(std::move(bits)) {
  for (int b : bits_)
    if (b != 0 && b != 1) throw std::invalid_argument("bitstring values must be 0 or 1");
}

BitString BitString::zeros(int length) {
  if (length < 1) throw std::invalid_argument("bitstring length must be positive");
  return BitString(std::vector<int>(static_cast<size_t>(length), 0));
}

BitString BitString::random(int length, std::uint64_t seed) {
  BitString b = zeros(length);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < length; ++i) b.bits_[static_cast<size_t>(i)] = static_cast<int>(rng() & 1u);
  return b;
}

void BitString::set(int i, int v) {
  if (v != 0 && v != 1) throw std::invalid_argument("bit must be 0 or 1");
  bits_.at(static_cast<size_t>(i)) = v;
}

BitString BitString::from_hex(const std::string& hex, int length) {
  if (length < 1 || length % 4 != 0) throw std::invalid_argument("hex bitstrings need length divisible by 4");
  if (static_cast<int>(hex.size()) != length / 4)
    throw std::invalid_argument("hex payload '" + hex + "' does not encode " + std::to_string(length) + " bits");
  BitString out = zeros(length);
  for (int i = 0; i < length / 4; ++i) {
    const char c = hex[static_cast<size_t>(i)];
    int v;
    if (c >= '0' && c <= '9')
      v = c - '0';
    else if (c >= 'a' && c <= 'f')
      v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F')
      v = c - 'A' + 10;
    else
      throw std::invalid_argument(std::string("invalid hex character '") + c + "'");
    for (int j = 0; j < 4; ++j) out.bits_[static_cast<size_t>(i * 4 + j)] = (v >> (3 - j)) & 1;
  }
  return out;
}

std::string BitString::to_hex() const {
  if (length() % 4 != 0) throw std::logic_error("bitstring length not divisible by 4");
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (int i = 0; i < length(); i += 4) {
    int v = 0;
    for (int j = 0; j < 4; ++j) v = (v << 1) | bits_[static_cast<size_t>(i + j)];
    out += digits[v];
  }
  return out;
}

BitString BitString::prefix(int n) const {
  if (n < 1 || n > length()) throw std::invalid_argument("prefix length out of range");
  return BitString(std::vector<int>(bits_.begin(), bits_.begin() + n));
}

double BitString::matched_fraction(const BitString& a, const BitString& b) {
  if (a.length() != b.length() || a.length() == 0) throw std::invalid_argument("matched_fraction: length mismatch");
  int same = 0;
  for (int i = 0; i < a.length(); ++i) same += a.bit(i) == b.bit(i) ? 1 : 0;
  return static_cast<double>(same) / a.length();
}

}  // namespace vamark
