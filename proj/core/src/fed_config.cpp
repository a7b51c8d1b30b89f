#include "fedseg/fed_config.hpp"

#include <cmath>
#include <string>

#include "fedseg/errors.hpp"

namespace fedseg {

void FedConfig::validate() const {
  auto bad = [](const std::string& what) { throw ConfigError("federation config: " + what); };
  if (rounds < 1) bad("rounds must be >= 1");
  if (node_count < 1) bad("node_count must be >= 1");
  if (local_epochs < 1) bad("local_epochs must be >= 1");
  if (batch_size < 2) bad("batch_size must be >= 2 (batch norm needs two samples)");
  if (!(lr > 0.0) || !std::isfinite(lr)) bad("lr must be a positive finite number");
  if (round_timeout.count() <= 0) bad("round_timeout must be positive");
  if (connect_attempts < 1) bad("connect_attempts must be >= 1");
  if (connect_backoff.count() < 0) bad("connect_backoff must be >= 0");
  if (frame_cap < kFrameHeaderSize) bad("frame_cap smaller than a frame header");
}

}  // namespace fedseg
