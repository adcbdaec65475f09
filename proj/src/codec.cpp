#include "approx8/codec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "approx8/errors.hpp"
#include "approx8/parallel.hpp"

namespace approx8 {

namespace {

constexpr std::uint8_t kSignBit = 0x80;
constexpr std::uint8_t kPayloadMask = 0x7F;

// Exact powers of ten for |e| <= 7; every one of them is representable in a double.
double pow10(int e) {
  double p = 1.0;
  for (int i = 0; i < std::abs(e); ++i) p *= 10.0;
  return e >= 0 ? p : 1.0 / p;
}

double tree_leaf(unsigned leaf, unsigned depth) {
  const double width = 0.9 / static_cast<double>(1u << depth);
  return 0.1 + (static_cast<double>(leaf) + 0.5) * width;
}

double payload_value(DataKind kind, std::uint8_t payload) {
  if (payload == 0) return 0.0;
  switch (kind) {
    case DataKind::Mantissa8: {
      const unsigned e = payload >> 4;
      const unsigned m = payload & 0x0F;
      return static_cast<double>(m) / pow10(static_cast<int>(e));
    }
    case DataKind::StaticTree: {
      const unsigned e = payload >> 4;
      return tree_leaf(payload & 0x0F, 4) / pow10(static_cast<int>(e));
    }
    case DataKind::DynamicTree: {
      unsigned zeros = 0;
      while (!(payload & (0x40u >> zeros))) ++zeros;
      const unsigned depth = 6 - zeros;
      const unsigned leaf = payload & ((1u << depth) - 1u);
      return tree_leaf(leaf, depth) / pow10(static_cast<int>(zeros));
    }
    case DataKind::LinearQuant:
      return static_cast<double>(payload) / 127.0;
  }
  return 0.0;
}

double normalize(double x, const QuantizedTensor& q, const Codebook& cb) {
  switch (cb.spec.norm.kind) {
    case NormKind::None:
      return x;
    case NormKind::AbsMax:
      return x / static_cast<double>(q.scale);
    case NormKind::DecadeOffset:
      return x / pow10(cb.spec.norm.decades);
  }
  return x;
}

}  // namespace

void DataTypeSpec::validate() const {
  switch (kind) {
    case DataKind::DynamicTree:
    case DataKind::StaticTree:
    case DataKind::LinearQuant:
    case DataKind::Mantissa8:
      break;
    default:
      throw ConfigError("dtype: unknown data kind " + std::to_string(static_cast<int>(kind)));
  }
  const bool tree_or_linear = kind == DataKind::DynamicTree || kind == DataKind::LinearQuant;
  switch (norm.kind) {
    case NormKind::None:
      break;
    case NormKind::AbsMax:
      if (!tree_or_linear)
        throw ConfigError("norm: absmax is only valid for dynamic-tree and linear, not " +
                          std::string(to_string(kind)));
      break;
    case NormKind::DecadeOffset:
      if (tree_or_linear)
        throw ConfigError("norm: decade offsets are only valid for static-tree and mantissa, not " +
                          std::string(to_string(kind)));
      if (norm.decades < -kMaxDecades || norm.decades > kMaxDecades)
        throw ConfigError("norm: decade offset " + std::to_string(norm.decades) +
                          " outside [-7, 7]");
      break;
    default:
      throw ConfigError("norm: unknown normalization");
  }
}

std::string_view to_string(DataKind kind) {
  switch (kind) {
    case DataKind::DynamicTree: return "dynamic-tree";
    case DataKind::StaticTree: return "static-tree";
    case DataKind::LinearQuant: return "linear";
    case DataKind::Mantissa8: return "mantissa";
  }
  return "unknown";
}

std::string to_string(const Normalization& norm) {
  switch (norm.kind) {
    case NormKind::None: return "none";
    case NormKind::AbsMax: return "absmax";
    case NormKind::DecadeOffset: return "decade:" + std::to_string(norm.decades);
  }
  return "unknown";
}

std::string to_string(const DataTypeSpec& spec) {
  return std::string(to_string(spec.kind)) + "/" + to_string(spec.norm);
}

DataKind parse_data_kind(std::string_view name) {
  if (name == "dynamic-tree") return DataKind::DynamicTree;
  if (name == "static-tree") return DataKind::StaticTree;
  if (name == "linear") return DataKind::LinearQuant;
  if (name == "mantissa") return DataKind::Mantissa8;
  throw ConfigError("dtype: unknown data type '" + std::string(name) + "'");
}

Normalization parse_normalization(std::string_view text) {
  if (text == "none") return Normalization::none();
  if (text == "absmax") return Normalization::absmax();
  constexpr std::string_view prefix = "decade:";
  if (text.starts_with(prefix)) {
    const auto digits = text.substr(prefix.size());
    int d = 0;
    const auto* first = digits.data();
    const auto* last = digits.data() + digits.size();
    if (!digits.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, d);
    if (ec != std::errc{} || ptr != last || first == last)
      throw ConfigError("norm: bad decade offset '" + std::string(digits) + "'");
    return Normalization::decade(d);
  }
  throw ConfigError("norm: unknown normalization '" + std::string(text) + "'");
}

bool Codebook::is_canonical(std::uint8_t code) const {
  const std::uint8_t payload = code & kPayloadMask;
  if (payload == 0) return code == 0;
  const auto it = std::find(sorted_codes.begin(), sorted_codes.end(), payload);
  return it != sorted_codes.end();
}

Codebook build_codebook(const DataTypeSpec& spec) {
  spec.validate();
  Codebook cb;
  cb.spec = spec;

  // value -> lowest payload producing it
  std::map<float, std::uint8_t> canonical;
  for (unsigned payload = 0; payload <= kPayloadMask; ++payload) {
    const auto v = static_cast<float>(payload_value(spec.kind, static_cast<std::uint8_t>(payload)));
    cb.decode_table[payload] = v;
    cb.decode_table[payload | kSignBit] = v == 0.0f ? 0.0f : -v;  // no negative zero
    canonical.emplace(v, static_cast<std::uint8_t>(payload));
  }
  cb.sorted_values.reserve(canonical.size());
  cb.sorted_codes.reserve(canonical.size());
  for (const auto& [value, code] : canonical) {
    cb.sorted_values.push_back(value);
    cb.sorted_codes.push_back(code);
  }
  return cb;
}

std::uint8_t nearest_code(const Codebook& cb, double magnitude) {
  const auto& values = cb.sorted_values;
  const auto it = std::lower_bound(values.begin(), values.end(), magnitude,
                                   [](float v, double m) { return static_cast<double>(v) < m; });
  if (it == values.begin()) return cb.sorted_codes.front();
  if (it == values.end()) return cb.sorted_codes.back();
  const auto hi = static_cast<std::size_t>(it - values.begin());
  const auto lo = hi - 1;
  const double d_lo = magnitude - static_cast<double>(values[lo]);
  const double d_hi = static_cast<double>(values[hi]) - magnitude;
  return d_hi < d_lo ? cb.sorted_codes[hi] : cb.sorted_codes[lo];
}

std::size_t QuantizedTensor::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

double decode_scale(const QuantizedTensor& q) {
  if (q.spec.norm.kind == NormKind::DecadeOffset) return pow10(q.spec.norm.decades);
  return static_cast<double>(q.scale);
}

QuantizedTensor encode_buffer(std::span<const float> x, const Codebook& cb) {
  return encode_buffer(x, cb, {x.size()});
}

QuantizedTensor encode_buffer(std::span<const float> x, const Codebook& cb,
                              std::vector<std::size_t> shape) {
  QuantizedTensor q;
  q.format = CodeFormat::Byte;
  q.spec = cb.spec;
  q.shape = std::move(shape);
  if (q.element_count() != x.size())
    throw UsageError("encode: shape holds " + std::to_string(q.element_count()) +
                     " elements but buffer has " + std::to_string(x.size()));
  q.codes.resize(x.size());
  q.scale = 1.0f;
  if (x.empty()) return q;

  float absmax = 0.0f;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]))
      throw InputError("encode: non-finite value at element " + std::to_string(i));
    absmax = std::max(absmax, std::fabs(x[i]));
  }
  switch (cb.spec.norm.kind) {
    case NormKind::None:
      break;
    case NormKind::AbsMax:
      q.scale = absmax > 0.0f ? absmax : 1.0f;
      break;
    case NormKind::DecadeOffset:
      q.scale = static_cast<float>(pow10(cb.spec.norm.decades));
      break;
  }

  parallel_chunks(x.size(), std::size_t{1} << 18, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double n = normalize(static_cast<double>(x[i]), q, cb);
      std::uint8_t code = nearest_code(cb, std::fabs(n));
      if (n < 0.0 && code != 0) code |= kSignBit;
      q.codes[i] = code;
    }
  });
  return q;
}

void decode_into(const QuantizedTensor& q, const Codebook& cb, std::span<float> out) {
  if (q.format != CodeFormat::Byte)
    throw UsageError("decode: tensor holds packed 1-bit codes, not 8-bit codes");
  if (!(q.spec == cb.spec))
    throw UsageError("decode: tensor was encoded as " + to_string(q.spec) +
                     " but codebook is " + to_string(cb.spec));
  if (q.codes.size() != q.element_count())
    throw UsageError("decode: code count does not match shape");
  if (out.size() != q.codes.size())
    throw UsageError("decode: output buffer has wrong size");
  const double scale = decode_scale(q);
  for (std::size_t i = 0; i < q.codes.size(); ++i)
    out[i] = static_cast<float>(static_cast<double>(cb.decode_table[q.codes[i]]) * scale);
}

std::vector<float> decode_buffer(const QuantizedTensor& q, const Codebook& cb) {
  std::vector<float> out(q.codes.size());
  decode_into(q, cb, out);
  return out;
}

float round_trip_inplace(std::span<float> x, const Codebook& cb) {
  const auto q = encode_buffer(std::span<const float>(x.data(), x.size()), cb);
  decode_into(q, cb, x);
  return q.scale;
}

void dump_codebook(std::ostream& os, const Codebook& cb) {
  char line[64];
  for (unsigned code = 0; code < 256; ++code) {
    std::snprintf(line, sizeof line, "%u\t%.9g\n", code,
                  static_cast<double>(cb.decode_table[code]));
    os << line;
  }
}

}  // namespace approx8
