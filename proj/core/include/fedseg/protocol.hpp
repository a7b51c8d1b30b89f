#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "fedseg/bytes.hpp"
#include "fedseg/parameter_set.hpp"

namespace fedseg {

// FDLP frame, all integers little-endian:
//   off  0  u32  total frame length in bytes, this prefix included
//   off  4  'F' 'D' 'L' 'P'
//   off  8  u16  version (1)
//   off 10  u8   kind
//   off 11  u32  round
//   off 15  u32  node id
//   off 19  u64  sample count
//   off 27  u32  payload length
//   off 31  payload: FDLC parameter set (GLOBAL_MODEL, LOCAL_UPDATE),
//                    UTF-8 text (ERROR), empty (HELLO, DONE)
inline constexpr std::uint8_t kFrameMagic[4] = {0x46, 0x44, 0x4C, 0x50};
inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 31;
inline constexpr std::size_t kDefaultFrameCap = std::size_t{256} << 20;

enum class MessageKind : std::uint8_t { Hello = 1, GlobalModel = 2, LocalUpdate = 3, Done = 4, Error = 5 };

std::string to_string(MessageKind kind);

struct FedMessage {
  MessageKind kind = MessageKind::Hello;
  std::uint32_t round = 0;
  std::uint32_t node_id = 0;
  std::uint64_t sample_count = 0;
  std::optional<ParameterSet<float>> params;
  std::string error_text;

  static FedMessage hello(std::uint32_t node_id, std::uint64_t sample_count);
  static FedMessage global_model(std::uint32_t round, std::uint32_t node_id, ParameterSet<float> params);
  static FedMessage local_update(std::uint32_t round, std::uint32_t node_id, std::uint64_t sample_count,
                                 ParameterSet<float> params);
  static FedMessage done(std::uint32_t round, std::uint32_t node_id);
  static FedMessage error(std::uint32_t round, std::uint32_t node_id, std::string text);

  // Throws UsageError when payload presence does not fit the kind.
  void validate() const;

  bool operator==(const FedMessage&) const = default;
};

Bytes encode(const FedMessage& msg);

// Decodes exactly one complete frame. Every malformation (truncation, bad
// magic/version/kind, inconsistent lengths, oversize, bad payload) raises
// ProtocolError carrying the byte offset inside the frame.
FedMessage decode(std::span<const std::uint8_t> frame, std::size_t frame_cap = kDefaultFrameCap);

// Reads the length prefix of a frame and checks it against the cap and the
// minimum header size. ProtocolError otherwise.
std::size_t frame_length(std::span<const std::uint8_t, 4> prefix, std::size_t frame_cap = kDefaultFrameCap);

}  // namespace fedseg
