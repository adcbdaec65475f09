#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "approx8/codec.hpp"

namespace approx8 {

/// Binary tensor container, all fields little-endian:
///
///   offset  size  field
///   0       4     magic "A8T1"
///   4       1     dtype tag: 0 = f32, 1 = u8 codes, 2 = packed bits
///   5       1     data kind (0 for f32, 5 for 1-bit, else DataKind)
///   6       1     normalization kind
///   7       1     decade offset (int8)
///   8       4     scale (f32)
///   12      4     positive level (f32, 1-bit only)
///   16      4     negative level (f32, 1-bit only)
///   20      4     rank (u32)
///   24      8*r   dims (u64 each)
///   ...           payload: product(dims) elements, packed bits LSB-first
enum class TensorTag : std::uint8_t { F32 = 0, Codes8 = 1, PackedBits = 2 };

struct TensorFile {
  TensorTag tag = TensorTag::F32;
  std::vector<std::size_t> shape;
  std::vector<float> values;       // F32
  QuantizedTensor quantized;       // Codes8 / PackedBits

  static TensorFile from_floats(std::vector<float> v, std::vector<std::size_t> shape);
  static TensorFile from_quantized(QuantizedTensor q);
};

inline constexpr std::uint8_t kOneBitKindTag = 5;

std::vector<std::uint8_t> serialize_tensor(const TensorFile& t);
TensorFile parse_tensor(std::span<const std::uint8_t> bytes);

void write_tensor_file(const std::filesystem::path& path, const TensorFile& t);
TensorFile read_tensor_file(const std::filesystem::path& path);

}  // namespace approx8
