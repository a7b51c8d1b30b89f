#include "fedseg/protocol.hpp"

#include "fedseg/checkpoint.hpp"

namespace fedseg {

namespace {

bool carries_model(MessageKind k) { return k == MessageKind::GlobalModel || k == MessageKind::LocalUpdate; }

}  // namespace

std::string to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::Hello: return "HELLO";
    case MessageKind::GlobalModel: return "GLOBAL_MODEL";
    case MessageKind::LocalUpdate: return "LOCAL_UPDATE";
    case MessageKind::Done: return "DONE";
    case MessageKind::Error: return "ERROR";
  }
  return "UNKNOWN";
}

FedMessage FedMessage::hello(std::uint32_t node_id, std::uint64_t sample_count) {
  return FedMessage{MessageKind::Hello, 0, node_id, sample_count, std::nullopt, {}};
}

FedMessage FedMessage::global_model(std::uint32_t round, std::uint32_t node_id, ParameterSet<float> params) {
  return FedMessage{MessageKind::GlobalModel, round, node_id, 0, std::move(params), {}};
}

FedMessage FedMessage::local_update(std::uint32_t round, std::uint32_t node_id, std::uint64_t sample_count,
                                    ParameterSet<float> params) {
  return FedMessage{MessageKind::LocalUpdate, round, node_id, sample_count, std::move(params), {}};
}

FedMessage FedMessage::done(std::uint32_t round, std::uint32_t node_id) {
  return FedMessage{MessageKind::Done, round, node_id, 0, std::nullopt, {}};
}

FedMessage FedMessage::error(std::uint32_t round, std::uint32_t node_id, std::string text) {
  return FedMessage{MessageKind::Error, round, node_id, 0, std::nullopt, std::move(text)};
}

void FedMessage::validate() const {
  if (carries_model(kind)) {
    if (!params || params->empty()) throw UsageError(to_string(kind) + " requires a parameter payload");
  } else if (params) {
    throw UsageError(to_string(kind) + " must not carry a parameter payload");
  }
  if (kind != MessageKind::Error && !error_text.empty()) {
    throw UsageError("only ERROR messages carry text");
  }
}

Bytes encode(const FedMessage& msg) {
  msg.validate();
  Bytes out;
  // Header, tensor data, and a generous allowance for names and shapes.
  out.reserve(kFrameHeaderSize + msg.error_text.size() +
              (msg.params ? msg.params->element_count() * sizeof(float) + msg.params->size() * 64 + 16 : 0));
  ByteWriter w(out);
  w.u32(0);  // patched below
  for (auto b : kFrameMagic) w.u8(b);
  w.u16(kProtocolVersion);
  w.u8(static_cast<std::uint8_t>(msg.kind));
  w.u32(msg.round);
  w.u32(msg.node_id);
  w.u64(msg.sample_count);
  w.u32(0);  // payload length, patched below
  const std::size_t payload_at = w.position();
  if (msg.params) {
    write_checkpoint(w, *msg.params);
  } else if (msg.kind == MessageKind::Error) {
    w.raw(msg.error_text);
  }
  const std::size_t payload = out.size() - payload_at;
  if (out.size() > UINT32_MAX) throw UsageError("frame exceeds u32 length");
  w.patch_u32(0, static_cast<std::uint32_t>(out.size()));
  w.patch_u32(27, static_cast<std::uint32_t>(payload));
  return out;
}

std::size_t frame_length(std::span<const std::uint8_t, 4> prefix, std::size_t frame_cap) {
  const std::size_t len = static_cast<std::size_t>(prefix[0]) | static_cast<std::size_t>(prefix[1]) << 8 |
                          static_cast<std::size_t>(prefix[2]) << 16 | static_cast<std::size_t>(prefix[3]) << 24;
  if (len > frame_cap) {
    throw ProtocolError(0, "frame length " + std::to_string(len) + " exceeds cap " + std::to_string(frame_cap));
  }
  if (len < kFrameHeaderSize) throw ProtocolError(0, "frame length " + std::to_string(len) + " below header size");
  return len;
}

FedMessage decode(std::span<const std::uint8_t> frame, std::size_t frame_cap) {
  if (frame.size() < 4) throw ProtocolError(frame.size(), "truncated frame: missing length prefix");
  const std::size_t declared = frame_length(frame.first<4>(), frame_cap);
  if (frame.size() < declared) {
    throw ProtocolError(frame.size(), "truncated frame: declared " + std::to_string(declared) + " bytes, got " +
                                          std::to_string(frame.size()));
  }
  if (frame.size() > declared) {
    throw ProtocolError(declared, "frame carries " + std::to_string(frame.size() - declared) + " trailing bytes");
  }

  try {
    ByteReader r(frame);
    r.u32();
    for (auto b : kFrameMagic) {
      if (r.u8() != b) throw ProtocolError(4, "bad frame magic");
    }
    if (const auto v = r.u16(); v != kProtocolVersion) {
      throw ProtocolError(8, "unsupported protocol version " + std::to_string(v));
    }
    const std::uint8_t kind_raw = r.u8();
    if (kind_raw < 1 || kind_raw > 5) throw ProtocolError(10, "unknown message kind " + std::to_string(kind_raw));
    FedMessage m;
    m.kind = static_cast<MessageKind>(kind_raw);
    m.round = r.u32();
    m.node_id = r.u32();
    m.sample_count = r.u64();
    const std::uint32_t payload_len = r.u32();
    if (payload_len != declared - kFrameHeaderSize) {
      throw ProtocolError(27, "payload length " + std::to_string(payload_len) + " inconsistent with frame length");
    }
    auto payload = r.take(payload_len);
    if (carries_model(m.kind)) {
      if (payload.empty()) throw ProtocolError(kFrameHeaderSize, to_string(m.kind) + " without payload");
      ByteReader pr(payload, kFrameHeaderSize);
      m.params = read_checkpoint<float>(pr);
      if (!pr.at_end()) throw ProtocolError(pr.offset(), "trailing bytes after parameter payload");
      if (m.params->empty()) throw ProtocolError(kFrameHeaderSize, to_string(m.kind) + " with empty parameter set");
    } else if (m.kind == MessageKind::Error) {
      m.error_text.assign(reinterpret_cast<const char*>(payload.data()), payload.size());
    } else if (!payload.empty()) {
      throw ProtocolError(kFrameHeaderSize, to_string(m.kind) + " must not carry a payload");
    }
    return m;
  } catch (const FormatError& e) {
    throw ProtocolError(e.offset(), e.what());
  } catch (const ShapeError& e) {
    throw ProtocolError(kFrameHeaderSize, e.what());
  } catch (const UsageError& e) {
    throw ProtocolError(kFrameHeaderSize, e.what());
  }
}

}  // namespace fedseg
