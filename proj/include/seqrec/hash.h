// Copyright 2026 The seqrec Authors.
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

// 64-bit FNV-1a content hashing for lineage tags.

#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

namespace seqrec {

class Fnv1a {
 public:
  Fnv1a& Bytes(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  // Length-prefixed so that ("ab","c") and ("a","bc") differ.
  Fnv1a& String(std::string_view s) {
    U64(s.size());
    return Bytes(s.data(), s.size());
  }
  Fnv1a& U64(uint64_t v) { return Bytes(&v, sizeof(v)); }
  Fnv1a& I64(int64_t v) { return Bytes(&v, sizeof(v)); }
  Fnv1a& Double(double v) { return Bytes(&v, sizeof(v)); }
  Fnv1a& Doubles(std::span<const double> v) {
    U64(v.size());
    return Bytes(v.data(), v.size() * sizeof(double));
  }
  Fnv1a& Ints(std::span<const int32_t> v) {
    U64(v.size());
    return Bytes(v.data(), v.size() * sizeof(int32_t));
  }

  uint64_t digest() const { return state_; }
  std::string hex() const { return ToHex(state_); }

  static std::string ToHex(uint64_t v) {
    static const char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[i] = kDigits[v & 0xf];
    return out;
  }

 private:
  uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace seqrec
