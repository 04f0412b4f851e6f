#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vamark {

// Fixed-length bitstring; values are strictly 0/1.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::vector<int> bits);
  static BitString zeros(int length);
  static BitString random(int length, std::uint64_t seed);

  // Hex interchange: most significant bit first, zero-padded to the declared
  // bit length (which must be a multiple of 4 for exact hex framing).
  static BitString from_hex(const std::string& hex, int length);
  std::string to_hex() const;

  int length() const { return static_cast<int>(bits_.size()); }
  int bit(int i) const { return bits_.at(static_cast<size_t>(i)); }
  void set(int i, int v);
  const std::vector<int>& bits() const { return bits_; }

  BitString prefix(int n) const;
  bool operator==(const BitString& o) const { return bits_ == o.bits_; }

  // Fraction of positions where the two strings agree.
  static double matched_fraction(const BitString& a, const BitString& b);

 private:
  std::vector<int> bits_;
};

}  // namespace vamark
