#include "epo/common.hpp"

#include <bit>
#include <fstream>
#include <ostream>
#include <sstream>

namespace epo {

static_assert(std::endian::native == std::endian::little,
              "artifact file formats are little-endian");

HashMismatchError::HashMismatchError(const std::string& what,
                                     std::uint64_t expected_in,
                                     std::uint64_t actual_in)
    : std::runtime_error(what + " (expected " + hex64(expected_in) + ", got " +
                         hex64(actual_in) + ")"),
      expected(expected_in),
      actual(actual_in) {}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over seed xor index; small indices alone would
  // leave mt19937_64 streams correlated.
  std::uint64_t z = (seed ^ index) + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t hash_bytes(const void* data, std::size_t size) {
  Fnv1a64 h;
  h.update(data, size);
  return h.digest();
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file for hashing: " + path);
  Fnv1a64 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.digest();
}

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << "0x" << std::hex << value;
  return os.str();
}

void BinaryWriter::bytes(const void* data, std::size_t size) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out_) throw FormatError("binary write failed");
}

void BinaryWriter::str(const std::string& value) {
  u32(static_cast<std::uint32_t>(value.size()));
  bytes(value.data(), value.size());
}

void BinaryReader::bytes(void* data, std::size_t size) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in_.gcount()) != size) {
    throw FormatError("binary read past end of file");
  }
}

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  if (n > (1u << 24)) throw FormatError("unreasonable string length in file");
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

}  // namespace epo
