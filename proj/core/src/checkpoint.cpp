#include "fedseg/checkpoint.hpp"

#include "fedseg/tensor_io.hpp"

namespace fedseg {

template <typename T>
void write_checkpoint(ByteWriter& out, const ParameterSet<T>& params) {
  for (auto b : kCheckpointMagic) out.u8(b);
  out.u16(kCheckpointVersion);
  if (params.size() > UINT32_MAX) throw UsageError("checkpoint: too many entries");
  out.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    if (name.empty() || name.size() > UINT16_MAX) throw UsageError("checkpoint: entry name length out of range");
    out.u16(static_cast<std::uint16_t>(name.size()));
    out.raw(name);
    write_tensor(out, tensor);
  }
}

template <typename T>
ParameterSet<T> read_checkpoint(ByteReader& in) {
  const std::size_t start = in.offset();
  for (auto b : kCheckpointMagic) {
    if (in.u8() != b) throw FormatError(start, "bad checkpoint magic");
  }
  const std::size_t version_at = in.offset();
  if (const auto v = in.u16(); v != kCheckpointVersion) {
    throw FormatError(version_at, "unsupported checkpoint version " + std::to_string(v));
  }
  const std::uint32_t count = in.u32();
  ParameterSet<T> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t entry_at = in.offset();
    const std::uint16_t len = in.u16();
    if (len == 0) throw FormatError(entry_at, "empty entry name");
    std::string name = in.string(len);
    if (out.contains(name)) throw FormatError(entry_at, "duplicate entry '" + name + "'");
    out.add(std::move(name), read_tensor<T>(in));
  }
  return out;
}

template void write_checkpoint<float>(ByteWriter&, const ParameterSet<float>&);
template void write_checkpoint<double>(ByteWriter&, const ParameterSet<double>&);
template ParameterSet<float> read_checkpoint<float>(ByteReader&);
template ParameterSet<double> read_checkpoint<double>(ByteReader&);

void save_checkpoint(const std::string& path, const ParameterSet<float>& params) {
  write_file(path, encode_checkpoint(params));
}

ParameterSet<float> load_checkpoint(const std::string& path) {
  const Bytes bytes = read_file(path);
  try {
    return decode_checkpoint<float>(bytes);
  } catch (const FormatError& e) {
    throw IoError("corrupt checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace fedseg
