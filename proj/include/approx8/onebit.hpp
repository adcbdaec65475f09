#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "approx8/codec.hpp"

namespace approx8 {

/// Error-feedback state for 1-bit quantization of one gradient tensor.
/// `residual` carries the quantization error into the next step.
struct OneBitState {
  std::vector<float> residual;

  OneBitState() = default;
  explicit OneBitState(std::size_t n) : residual(n, 0.0f) {}
};

/// Quantizes g + residual to one bit per element (bit set iff the value is
/// >= 0). The two reconstruction levels are the means of the set and unset
/// groups. Updates state.residual to (g + residual) - reconstruction.
/// Not safe to call concurrently on the same state.
QuantizedTensor onebit_quantize(std::span<const float> g, OneBitState& state);

/// Reconstruction from packed bits and the two levels.
std::vector<float> onebit_decode(const QuantizedTensor& q);
void onebit_decode_into(const QuantizedTensor& q, std::span<float> out);

inline bool packed_bit(const std::vector<std::uint8_t>& bits, std::size_t i) {
  return (bits[i >> 3] >> (i & 7)) & 1u;
}

}  // namespace approx8
