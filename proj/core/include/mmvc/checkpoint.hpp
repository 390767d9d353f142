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

#include <cstdint>
#include <string>
#include <vector>

#include "mmvc/nn.hpp"
#include "mmvc/tensor.hpp"

namespace mmvc {

// On-disk layout: magic "MMVC", u32 version, config blob (u32 length +
// bytes), u64 tensor count, then per tensor the name (u32 length + utf8),
// u64 rank, dims as u64, u32 dtype tag, raw little-endian payload; a CRC32
// over everything before it closes the file. Save -> load -> save is
// byte-identical. The dtype tag is DType's enumerator value (kF32=0, kF64=1).

struct NamedTensor {
  std::string name;
  Shape shape;
  DType dtype = DType::kF32;
  std::vector<float> f32;   // payload when dtype == kF32
  std::vector<double> f64;  // payload when dtype == kF64

  int64_t size() const { return numel(shape); }
};

struct Checkpoint {
  std::string config_json;  // run config snapshot, RNG state included
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Appends every registered parameter (trainable or not) as prefix + name.
template <class T>
void pack_params(const ParamMap<T>& pm, Checkpoint* c, const std::string& prefix = "");

// Writes stored values back into the registered tensors; every parameter
// must be present with its exact shape and dtype.
template <class T>
void unpack_params(const Checkpoint& c, const ParamMap<T>& pm, const std::string& prefix = "");

// Raw vector payloads (optimizer moments) under a single name.
template <class T>
void pack_vector(const std::vector<T>& v, const std::string& name, Checkpoint* c);
template <class T>
std::vector<T> unpack_vector(const Checkpoint& c, const std::string& name);

}  // namespace mmvc
