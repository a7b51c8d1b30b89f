#include "fedseg/tensor_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

namespace fedseg {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

void validate_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw ShapeError("tensor rank must be 1..4, got shape " + shape_to_string(shape));
  }
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("zero dimension in shape " + shape_to_string(shape));
  }
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing '" + path + "'");
}

template <typename T>
void write_tensor(ByteWriter& out, const Tensor<T>& t) {
  validate_shape(t.shape());
  for (auto b : kTensorMagic) out.u8(b);
  out.u8(static_cast<std::uint8_t>(dtype_of<T>()));
  out.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    if (d > UINT32_MAX) throw ShapeError("dimension exceeds u32 range");
    out.u32(static_cast<std::uint32_t>(d));
  }
  if constexpr (std::endian::native == std::endian::little) {
    out.raw(std::span(reinterpret_cast<const std::uint8_t*>(t.raw()), t.size() * sizeof(T)));
  } else {
    for (T v : t.data()) {
      if constexpr (std::is_same_v<T, float>) {
        out.f32(v);
      } else {
        out.f64(v);
      }
    }
  }
}

template <typename T>
Tensor<T> read_tensor(ByteReader& in) {
  const std::size_t start = in.offset();
  for (auto b : kTensorMagic) {
    if (in.u8() != b) throw FormatError(start, "bad tensor magic");
  }
  const auto dtype_pos = in.offset();
  const auto dtype = in.u8();
  if (dtype > 1) throw FormatError(dtype_pos, "unknown dtype tag " + std::to_string(dtype));
  if (dtype != static_cast<std::uint8_t>(dtype_of<T>())) {
    throw FormatError(dtype_pos, "tensor dtype does not match requested element type");
  }
  const auto rank_pos = in.offset();
  const auto rank = in.u8();
  if (rank < 1 || rank > 4) throw FormatError(rank_pos, "tensor rank must be 1..4");
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    const auto dim_pos = in.offset();
    d = in.u32();
    if (d == 0) throw FormatError(dim_pos, "zero tensor dimension");
    if (count > (SIZE_MAX / sizeof(T)) / d) throw FormatError(dim_pos, "tensor element count overflows");
    count *= d;
  }
  if (count * sizeof(T) > in.remaining()) {
    in.fail("truncated tensor data: need " + std::to_string(count * sizeof(T)) + " bytes");
  }
  Tensor<T> out(std::move(shape));
  auto data = out.data();
  auto raw = in.take(count * sizeof(T));
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(data.data(), raw.data(), raw.size());
  } else {
    ByteReader elems(raw);
    for (auto& v : data) {
      if constexpr (std::is_same_v<T, float>) {
        v = elems.f32();
      } else {
        v = elems.f64();
      }
    }
  }
  return out;
}

template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t) {
  write_file(path, encode_tensor(t));
}

template <typename T>
Tensor<T> load_tensor(const std::string& path) {
  const Bytes bytes = read_file(path);
  try {
    return decode_tensor<T>(bytes);
  } catch (const FormatError& e) {
    throw IoError("corrupt tensor file '" + path + "': " + e.what());
  }
}

template void write_tensor<float>(ByteWriter&, const Tensor<float>&);
template void write_tensor<double>(ByteWriter&, const Tensor<double>&);
template Tensor<float> read_tensor<float>(ByteReader&);
template Tensor<double> read_tensor<double>(ByteReader&);
template void save_tensor<float>(const std::string&, const Tensor<float>&);
template void save_tensor<double>(const std::string&, const Tensor<double>&);
template Tensor<float> load_tensor<float>(const std::string&);
template Tensor<double> load_tensor<double>(const std::string&);

}  // namespace fedseg
