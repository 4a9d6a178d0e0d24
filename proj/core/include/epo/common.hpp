#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace epo {

// ---------------------------------------------------------------------------
// Errors

/// Input or config rejected before any work started.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A binary artifact failed structural validation (bad magic, short read, ...).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Two artifacts that must belong together carry different content hashes.
struct HashMismatchError : std::runtime_error {
  HashMismatchError(const std::string& what, std::uint64_t expected,
                    std::uint64_t actual);
  std::uint64_t expected = 0;
  std::uint64_t actual = 0;
};

// ---------------------------------------------------------------------------
// Deterministic randomness
//
// All sampling goes through this wrapper so results do not depend on the
// standard library's distribution implementations.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Modulo bias is irrelevant here: n is always far below 2^64.
    return n == 0 ? 0 : engine_() % n;
  }

  /// Standard normal via Box-Muller (deterministic, no cached spare).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with a stream index into an independent sub-seed.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index);

// ---------------------------------------------------------------------------
// Content hashing (FNV-1a, 64-bit) for the artifact hash chain.

class Fnv1a64 {
 public:
  void update(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= bytes[i];
      state_ *= 0x100000001b3ull;
    }
  }

  template <typename T>
  void update_value(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    update(&value, sizeof(value));
  }

  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

std::uint64_t hash_bytes(const void* data, std::size_t size);
std::uint64_t hash_file(const std::string& path);

std::string hex64(std::uint64_t value);

// ---------------------------------------------------------------------------
// Little-endian binary I/O for the artifact file formats.
// Host is assumed little-endian (checked at startup of any reader/writer).

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t size);
  void u32(std::uint32_t value) { raw(value); }
  void u64(std::uint64_t value) { raw(value); }
  void f32(float value) { raw(value); }
  void str(const std::string& value);

 private:
  template <typename T>
  void raw(T value) {
    bytes(&value, sizeof(value));
  }
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  void bytes(void* data, std::size_t size);
  std::uint32_t u32() { return raw<std::uint32_t>(); }
  std::uint64_t u64() { return raw<std::uint64_t>(); }
  float f32() { return raw<float>(); }
  std::string str();

 private:
  template <typename T>
  T raw() {
    T value{};
    bytes(&value, sizeof(value));
    return value;
  }
  std::istream& in_;
};

/// Rounds a double through f32 so the value survives f32 serialization
/// bit-exactly.
inline double quantize_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace epo
