#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Little-endian primitive IO. Every on-disk format in this project goes
// through these helpers so the byte layout is identical on all hosts.

namespace ardm::io {

inline void put_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void get_bytes(std::istream& is, void* p, size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("unexpected end of stream");
}

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(v);
  for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  put_bytes(os, buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  get_bytes(is, buf, sizeof(T));
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(buf[i]) << (8 * i);
  return static_cast<T>(u);
}

inline void write_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  write_le<uint32_t>(os, u);
}

inline float read_f32(std::istream& is) {
  uint32_t u = read_le<uint32_t>(is);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

inline void write_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  write_le<uint64_t>(os, u);
}

inline double read_f64(std::istream& is) {
  uint64_t u = read_le<uint64_t>(is);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

inline void write_magic(std::ostream& os, const char (&m)[5]) { put_bytes(os, m, 4); }

inline void check_magic(std::istream& is, const char (&m)[5], const char* what) {
  char buf[4];
  get_bytes(is, buf, 4);
  if (std::memcmp(buf, m, 4) != 0)
    throw std::runtime_error(std::string("bad magic for ") + what);
}

}  // namespace ardm::io
