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

#include "mmvc/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <type_traits>

#include "mmvc/io.hpp"

namespace mmvc {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'V', 'C'};
constexpr uint32_t kVersion = 1;

uint32_t f32_bits(float v) {
  uint32_t b;
  std::memcpy(&b, &v, 4);
  return b;
}

float f32_from_bits(uint32_t b) {
  float v;
  std::memcpy(&v, &b, 4);
  return v;
}

uint64_t f64_bits(double v) {
  uint64_t b;
  std::memcpy(&b, &v, 8);
  return b;
}

double f64_from_bits(uint64_t b) {
  double v;
  std::memcpy(&v, &b, 8);
  return v;
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  CrcWriter w(os);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.str(c.config_json);
  w.u64(static_cast<uint64_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    w.str(t.name);
    w.u64(static_cast<uint64_t>(t.shape.size()));
    for (int64_t d : t.shape) w.u64(static_cast<uint64_t>(d));
    w.u32(static_cast<uint32_t>(t.dtype));
    const size_t n = static_cast<size_t>(t.size());
    if (t.dtype == DType::kF32) {
      if (t.f32.size() != n) throw IoError("tensor '" + t.name + "': payload size mismatch");
      for (float v : t.f32) w.u32(f32_bits(v));
    } else {
      if (t.f64.size() != n) throw IoError("tensor '" + t.name + "': payload size mismatch");
      for (double v : t.f64) w.u64(f64_bits(v));
    }
  }
  write_u32(os, w.crc());
  if (!os) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  CrcReader r(is);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("'" + path + "' is not a checkpoint file (bad magic)");
  }
  const uint32_t version = r.u32();
  if (version != kVersion) {
    throw IoError("checkpoint version mismatch: file has " + std::to_string(version) +
                  ", this build reads " + std::to_string(kVersion));
  }
  Checkpoint c;
  c.config_json = r.str();
  const uint64_t count = r.u64();
  for (uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str();
    const uint64_t rank = r.u64();
    if (rank > 16) throw IoError("tensor '" + t.name + "': implausible rank");
    for (uint64_t d = 0; d < rank; ++d) t.shape.push_back(static_cast<int64_t>(r.u64()));
    const uint32_t tag = r.u32();
    if (tag > 1) throw IoError("tensor '" + t.name + "': unknown dtype tag");
    t.dtype = static_cast<DType>(tag);
    const size_t n = static_cast<size_t>(t.size());
    if (t.dtype == DType::kF32) {
      t.f32.reserve(n);
      for (size_t k = 0; k < n; ++k) t.f32.push_back(f32_from_bits(r.u32()));
    } else {
      t.f64.reserve(n);
      for (size_t k = 0; k < n; ++k) t.f64.push_back(f64_from_bits(r.u64()));
    }
    c.tensors.push_back(std::move(t));
  }
  const uint32_t want = r.crc();
  const uint32_t have = read_u32(is);
  if (want != have) throw IoError("checkpoint corrupt: checksum mismatch in '" + path + "'");
  return c;
}

template <class T>
void pack_params(const ParamMap<T>& pm, Checkpoint* c, const std::string& prefix) {
  for (const auto& e : pm.entries()) {
    NamedTensor t;
    t.name = prefix + e.name;
    t.shape = e.tensor->shape();
    if constexpr (std::is_same_v<T, float>) {
      t.dtype = DType::kF32;
      t.f32 = e.tensor->values();
    } else {
      t.dtype = DType::kF64;
      t.f64 = e.tensor->values();
    }
    c->tensors.push_back(std::move(t));
  }
}

template <class T>
void unpack_params(const Checkpoint& c, const ParamMap<T>& pm, const std::string& prefix) {
  for (const auto& e : pm.entries()) {
    const NamedTensor* t = c.find(prefix + e.name);
    if (t == nullptr) throw IoError("checkpoint is missing tensor '" + prefix + e.name + "'");
    if (t->shape != e.tensor->shape()) {
      throw IoError("checkpoint tensor '" + t->name + "' has shape " + shape_str(t->shape) +
                    ", parameter wants " + shape_str(e.tensor->shape()));
    }
    const DType want = std::is_same_v<T, float> ? DType::kF32 : DType::kF64;
    if (t->dtype != want) throw IoError("checkpoint tensor '" + t->name + "': dtype mismatch");
    if constexpr (std::is_same_v<T, float>) {
      std::copy(t->f32.begin(), t->f32.end(), e.tensor->mutable_data());
    } else {
      std::copy(t->f64.begin(), t->f64.end(), e.tensor->mutable_data());
    }
  }
}

template <class T>
void pack_vector(const std::vector<T>& v, const std::string& name, Checkpoint* c) {
  NamedTensor t;
  t.name = name;
  t.shape = Shape{static_cast<int64_t>(v.size())};
  if constexpr (std::is_same_v<T, float>) {
    t.dtype = DType::kF32;
    t.f32 = v;
  } else {
    t.dtype = DType::kF64;
    t.f64 = v;
  }
  c->tensors.push_back(std::move(t));
}

template <class T>
std::vector<T> unpack_vector(const Checkpoint& c, const std::string& name) {
  const NamedTensor* t = c.find(name);
  if (t == nullptr) throw IoError("checkpoint is missing tensor '" + name + "'");
  const DType want = std::is_same_v<T, float> ? DType::kF32 : DType::kF64;
  if (t->dtype != want) throw IoError("checkpoint tensor '" + name + "': dtype mismatch");
  if constexpr (std::is_same_v<T, float>) {
    return t->f32;
  } else {
    return t->f64;
  }
}

#define MMVC_INSTANTIATE_CHECKPOINT(T)                                                \
  template void pack_params<T>(const ParamMap<T>&, Checkpoint*, const std::string&);  \
  template void unpack_params<T>(const Checkpoint&, const ParamMap<T>&,               \
                                 const std::string&);                                 \
  template void pack_vector<T>(const std::vector<T>&, const std::string&, Checkpoint*); \
  template std::vector<T> unpack_vector<T>(const Checkpoint&, const std::string&)

MMVC_INSTANTIATE_CHECKPOINT(float);
MMVC_INSTANTIATE_CHECKPOINT(double);

}  // namespace mmvc
