#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "fedseg/bytes.hpp"
#include "fedseg/parameter_set.hpp"

namespace fedseg {

// FDLC checkpoint:
//   'F' 'D' 'L' 'C' | u16 version (1) | u32 entry count |
//   per entry: u16 name length, UTF-8 name, FDT1 tensor record.
inline constexpr std::uint8_t kCheckpointMagic[4] = {0x46, 0x44, 0x4C, 0x43};
inline constexpr std::uint16_t kCheckpointVersion = 1;

template <typename T>
void write_checkpoint(ByteWriter& out, const ParameterSet<T>& params);

// FormatError with absolute offset on any malformed input.
template <typename T>
ParameterSet<T> read_checkpoint(ByteReader& in);

template <typename T>
Bytes encode_checkpoint(const ParameterSet<T>& params) {
  Bytes out;
  out.reserve(16 + params.element_count() * sizeof(T) + params.size() * 64);
  ByteWriter w(out);
  write_checkpoint(w, params);
  return out;
}

template <typename T>
ParameterSet<T> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto p = read_checkpoint<T>(r);
  if (!r.at_end()) r.fail("trailing bytes after checkpoint");
  return p;
}

void save_checkpoint(const std::string& path, const ParameterSet<float>& params);
// IoError naming the file when it is missing or malformed.
ParameterSet<float> load_checkpoint(const std::string& path);

}  // namespace fedseg
