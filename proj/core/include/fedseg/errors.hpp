#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedseg {

// Root of every error raised by the library. Subclasses map one-to-one onto
// the failure classes the CLI turns into exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& name, const std::string& what)
      : Error("parameter sets not aligned at '" + name + "': " + what), name_(name) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

// Malformed binary record (FDT1 / FDLC). Carries the byte offset where
// decoding stopped.
class FormatError : public Error {
 public:
  FormatError(std::size_t offset, const std::string& what)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ProtocolError : public Error {
 public:
  ProtocolError(std::size_t offset, const std::string& what)
      : Error("protocol error: " + what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit ProtocolError(const std::string& what) : Error("protocol error: " + what), offset_(0) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedseg
