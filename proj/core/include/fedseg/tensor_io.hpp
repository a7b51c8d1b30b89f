#pragma once

#include <cstdint>
#include <string>

#include "fedseg/bytes.hpp"
#include "fedseg/tensor.hpp"

namespace fedseg {

// FDT1 tensor record:
//   'F' 'D' 'T' '1' | u8 dtype (0 = f32, 1 = f64) | u8 ndim | ndim x u32 dims |
//   little-endian element data.
inline constexpr std::uint8_t kTensorMagic[4] = {0x46, 0x44, 0x54, 0x31};

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

template <typename T>
constexpr DType dtype_of() {
  return std::is_same_v<T, float> ? DType::F32 : DType::F64;
}

template <typename T>
void write_tensor(ByteWriter& out, const Tensor<T>& t);

// Reads one record. The element type in the record must match T.
template <typename T>
Tensor<T> read_tensor(ByteReader& in);

template <typename T>
Bytes encode_tensor(const Tensor<T>& t) {
  Bytes out;
  ByteWriter w(out);
  write_tensor(w, t);
  return out;
}

template <typename T>
Tensor<T> decode_tensor(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Tensor<T> t = read_tensor<T>(r);
  if (!r.at_end()) r.fail("trailing bytes after tensor record");
  return t;
}

// File helpers. I/O failures raise IoError naming the path; malformed content
// raises FormatError.
template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t);

template <typename T>
Tensor<T> load_tensor(const std::string& path);

}  // namespace fedseg
