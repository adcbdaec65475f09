#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace approx8 {

/// The four 8-bit approximation formats.
///
/// Every format reserves bit 7 for the sign and interprets the remaining
/// seven payload bits differently:
///
///   DynamicTree  z leading zeros, a flag bit, then 6-z bisection-tree bits
///                over (0.1, 1); decodes to tree_value * 10^-z
///   StaticTree   3 exponent bits e, 4 tree bits over (0.1, 1);
///                decodes to tree_value * 10^-e
///   LinearQuant  7-bit level c over [0, 1]; decodes to c / 127
///   Mantissa8    3 exponent bits e, 4 mantissa bits m; decodes to m * 10^-e
///
/// The all-zero payload always decodes to exactly 0.
enum class DataKind : std::uint8_t { DynamicTree = 1, StaticTree = 2, LinearQuant = 3, Mantissa8 = 4 };

enum class NormKind : std::uint8_t { None = 0, AbsMax = 1, DecadeOffset = 2 };

struct Normalization {
  NormKind kind = NormKind::None;
  int decades = 0;  // only meaningful for DecadeOffset

  static Normalization none() { return {}; }
  static Normalization absmax() { return {NormKind::AbsMax, 0}; }
  static Normalization decade(int d) { return {NormKind::DecadeOffset, d}; }

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

struct DataTypeSpec {
  DataKind kind = DataKind::DynamicTree;
  Normalization norm;

  /// Throws ConfigError when the kind/normalization pairing is not allowed.
  void validate() const;

  friend bool operator==(const DataTypeSpec&, const DataTypeSpec&) = default;
};

inline constexpr int kMaxDecades = 7;

std::string_view to_string(DataKind kind);
std::string to_string(const Normalization& norm);
std::string to_string(const DataTypeSpec& spec);

/// Parses the CLI names: dynamic-tree | static-tree | linear | mantissa.
DataKind parse_data_kind(std::string_view name);
/// Parses none | absmax | decade:N.
Normalization parse_normalization(std::string_view text);

/// Immutable lookup tables for one data type.
///
/// `decode_table` maps every code byte to its value (before scaling).
/// `sorted_values` holds each distinct non-negative value once, ascending,
/// and `sorted_codes` the canonical (lowest) code producing it. Encoding is a
/// binary search over `sorted_values`. Codes outside the canonical set (the
/// negative zero 0x80 and, for Mantissa8, duplicate values such as 1*10^0 and
/// 10*10^-1) still decode but are never emitted by the encoder.
struct Codebook {
  DataTypeSpec spec;
  std::array<float, 256> decode_table{};
  std::vector<float> sorted_values;
  std::vector<std::uint8_t> sorted_codes;

  float max_value() const { return sorted_values.back(); }
  bool is_canonical(std::uint8_t code) const;
};

Codebook build_codebook(const DataTypeSpec& spec);

/// Nearest non-negative codebook entry for a normalized magnitude.
/// Ties resolve toward the smaller value.
std::uint8_t nearest_code(const Codebook& cb, double magnitude);

/// Tag describing how the codes in a QuantizedTensor are laid out.
enum class CodeFormat : std::uint8_t { Byte = 1, PackedBits = 2 };

struct QuantizedTensor {
  CodeFormat format = CodeFormat::Byte;
  DataTypeSpec spec;                 // ignored for PackedBits
  std::vector<std::uint8_t> codes;   // one byte per element, or LSB-first bits
  std::vector<std::size_t> shape;
  float scale = 1.0f;
  float pos_level = 0.0f;            // 1-bit only
  float neg_level = 0.0f;            // 1-bit only

  std::size_t element_count() const;
};

/// Scale applied at decode time: absmax, 10^d, or 1.
double decode_scale(const QuantizedTensor& q);

QuantizedTensor encode_buffer(std::span<const float> x, const Codebook& cb);
QuantizedTensor encode_buffer(std::span<const float> x, const Codebook& cb,
                              std::vector<std::size_t> shape);

std::vector<float> decode_buffer(const QuantizedTensor& q, const Codebook& cb);
void decode_into(const QuantizedTensor& q, const Codebook& cb, std::span<float> out);

/// Encode then decode in place. Returns the scale that was used.
float round_trip_inplace(std::span<float> x, const Codebook& cb);

/// Writes `code<TAB>value` lines, codes ascending, 9 significant digits.
void dump_codebook(std::ostream& os, const Codebook& cb);

}  // namespace approx8
