// Copyright 2026 The mmvc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mmvc/common.hpp"

namespace mmvc {

// Little-endian binary IO for the on-disk formats. The writers emit
// byte-by-byte so the layout does not depend on host endianness.

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!os) throw IoError("write failed");
}

inline void read_bytes(std::istream& is, void* p, size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n) throw IoError("unexpected end of file");
}

inline void write_u32(std::ostream& os, uint32_t v) {
  std::array<unsigned char, 4> b;
  for (int i = 0; i < 4; ++i) b[static_cast<size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b.data(), 4);
}

inline uint32_t read_u32(std::istream& is) {
  std::array<unsigned char, 4> b;
  read_bytes(is, b.data(), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[static_cast<size_t>(i)]) << (8 * i);
  return v;
}

inline void write_u64(std::ostream& os, uint64_t v) {
  std::array<unsigned char, 8> b;
  for (int i = 0; i < 8; ++i) b[static_cast<size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b.data(), 8);
}

inline uint64_t read_u64(std::istream& is) {
  std::array<unsigned char, 8> b;
  read_bytes(is, b.data(), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[static_cast<size_t>(i)]) << (8 * i);
  return v;
}

inline void write_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline float read_f32(std::istream& is) {
  const uint32_t bits = read_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline void write_f64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

inline double read_f64(std::istream& is) {
  const uint64_t bits = read_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  if (!s.empty()) write_bytes(os, s.data(), s.size());
}

inline std::string read_str(std::istream& is, uint32_t max_len = 1u << 24) {
  const uint32_t n = read_u32(is);
  if (n > max_len) throw IoError("string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  if (n > 0) read_bytes(is, s.data(), n);
  return s;
}

// CRC-32 (IEEE 802.3, reflected, polynomial 0xEDB88320).
class Crc32 {
 public:
  Crc32() { init_table(); }

  void update(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      state_ = table_[(state_ ^ p[i]) & 0xFFu] ^ (state_ >> 8);
    }
  }

  uint32_t value() const { return state_ ^ 0xFFFFFFFFu; }

 private:
  static void init_table() {
    if (table_ready_) return;
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1u) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
      table_[i] = c;
    }
    table_ready_ = true;
  }

  static inline uint32_t table_[256];
  static inline bool table_ready_ = false;

  uint32_t state_ = 0xFFFFFFFFu;
};

inline uint32_t crc32_of(const void* data, size_t n) {
  Crc32 c;
  c.update(data, n);
  return c.value();
}

// Stream wrapper that mirrors every written byte into a running CRC.
class CrcWriter {
 public:
  explicit CrcWriter(std::ostream& os) : os_(os) {}

  void bytes(const void* p, size_t n) {
    write_bytes(os_, p, n);
    crc_.update(p, n);
  }

  void u32(uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }

  void u64(uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }

  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    if (!s.empty()) bytes(s.data(), s.size());
  }

  uint32_t crc() const { return crc_.value(); }

 private:
  std::ostream& os_;
  Crc32 crc_;
};

// Stream wrapper that mirrors every read byte into a running CRC.
class CrcReader {
 public:
  explicit CrcReader(std::istream& is) : is_(is) {}

  void bytes(void* p, size_t n) {
    read_bytes(is_, p, n);
    crc_.update(p, n);
  }

  uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
  }

  uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
  }

  std::string str(uint32_t max_len = 1u << 24) {
    const uint32_t n = u32();
    if (n > max_len) throw IoError("string length " + std::to_string(n) + " exceeds limit");
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n);
    return s;
  }

  uint32_t crc() const { return crc_.value(); }

 private:
  std::istream& is_;
  Crc32 crc_;
};

}  // namespace mmvc
