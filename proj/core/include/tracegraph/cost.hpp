#pragma once

#include <cstdint>

namespace tracegraph {

/// Token and wall-clock spend of one run. Only ever grows.
struct CostMeter {
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
  double wall_seconds = 0.0;

  std::uint64_t total_tokens() const { return input_tokens + output_tokens; }

  CostMeter& operator+=(const CostMeter& other) {
    input_tokens += other.input_tokens;
    output_tokens += other.output_tokens;
    wall_seconds += other.wall_seconds;
    return *this;
  }

  friend bool operator==(const CostMeter&, const CostMeter&) = default;
};

}  // namespace tracegraph
