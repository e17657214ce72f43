#pragma once

#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <vector>

namespace csifb {

static_assert(std::endian::native == std::endian::little,
              "serialized formats and fingerprints assume a little-endian host");

// FNV-1a, 64-bit.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Accumulates POD values into a byte stream for fingerprinting.
class ByteSink {
 public:
  template <typename T>
  void put(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  template <typename T>
  void put_range(const T* p, std::size_t n) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* b = reinterpret_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), b, b + n * sizeof(T));
  }

  std::uint64_t hash() const { return fnv1a64(bytes_.data(), bytes_.size()); }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

}  // namespace csifb
